use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetricInput { asymmetry: f64 },

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("linear system is singular")]
    SingularSystem,

    #[error("truthful baseline cost {cost:e} is degenerate; ratio undefined")]
    DegenerateBaseline { cost: f64 },

    #[error("a shared susceptibility is required")]
    SharedAlphaRequired,

    #[error("no Nash equilibrium: system inconsistent (residual {residual:e})")]
    NoNashEquilibrium { residual: f64 },

    #[error("gradient mismatch for agent {agent}: analytic {analytic:e}, finite difference {numeric:e}")]
    GradientMismatch {
        agent: usize,
        analytic: f64,
        numeric: f64,
    },

    #[error("best-response coefficient of agent {agent} vanishes")]
    DegenerateCoefficient { agent: usize },

    #[error("equilibrium failed first-order check (max gradient {max_gradient:e})")]
    UnverifiedEquilibrium { max_gradient: f64 },

    #[error("oracle identity failed: {0}")]
    OracleMismatch(String),

    #[error("susceptibility of node {node} is {alpha}, must lie in (0, 1)")]
    SingularSusceptibility { node: usize, alpha: f64 },

    #[error("sample needs at least {needed} entries, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("active-set design has rank {rank} < {columns} columns")]
    RankDeficientActiveSet { rank: usize, columns: usize },

    #[error("n = {n} exceeds the enumeration limit {max}")]
    TooLarge { n: usize, max: usize },

    #[error("smallest community {smallest} does not exceed required {required:.3}")]
    SizeConditionViolated { smallest: usize, required: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input (as opposed to numerical failure).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidGraph(_)
                | Error::DimensionMismatch { .. }
                | Error::InvalidParameter(_)
                | Error::SharedAlphaRequired
                | Error::SingularSusceptibility { .. }
                | Error::TooFewSamples { .. }
                | Error::EmptySample
                | Error::TooLarge { .. }
                | Error::SizeConditionViolated { .. }
                | Error::Parse { .. }
                | Error::Io(_)
        )
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
