//! Friedkin–Johnsen equilibria, agent costs and platform metrics.
//!
//! The equilibrium of the FJ game with intrinsic opinions `s` is
//! `z = B s` with `B = ((I − A)L + A)⁻¹ A`. Since
//! `(I − A)L + A = (I − A)(L + Ã)` with `Ã = diag(α̃)`, `B = (L + Ã)⁻¹ Ã`
//! and every solve goes through a Cholesky factor of the SPD matrix `L + Ã`.

use std::ops::Deref;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, Error, Result};
use crate::graph::{laplacian, spectral_decomposition, WeightedGraph};

/// Per-agent susceptibility `α_i ∈ (0, 1)` and `α̃_i = α_i / (1 − α_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SusceptibilityProfile {
    alpha: Vec<f64>,
    alpha_tilde: Vec<f64>,
}

impl SusceptibilityProfile {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if let Some((node, &a)) = alpha
            .iter()
            .enumerate()
            .find(|(_, &a)| !(a > 0.0 && a < 1.0))
        {
            return Err(Error::SingularSusceptibility { node, alpha: a });
        }
        let alpha_tilde = alpha.iter().map(|a| a / (1.0 - a)).collect();
        Ok(Self { alpha, alpha_tilde })
    }

    pub fn shared(n: usize, alpha: f64) -> Result<Self> {
        Self::new(vec![alpha; n])
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_tilde(&self) -> &[f64] {
        &self.alpha_tilde
    }

    /// The common value when every agent has the same susceptibility.
    pub fn shared_value(&self) -> Option<f64> {
        let first = *self.alpha.first()?;
        self.alpha.iter().all(|&a| a == first).then_some(first)
    }

    pub fn min(&self) -> f64 {
        self.alpha.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpinionRole {
    IntrinsicTrue,
    IntrinsicReported,
    Expressed,
}

/// A finite opinion vector tagged with what it represents.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionProfile {
    role: OpinionRole,
    values: Vec<f64>,
}

impl OpinionProfile {
    pub fn new(role: OpinionRole, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "opinion of node {i} is not finite"
            )));
        }
        Ok(Self { role, values })
    }

    pub fn intrinsic(values: Vec<f64>) -> Result<Self> {
        Self::new(OpinionRole::IntrinsicTrue, values)
    }

    pub(crate) fn trusted(role: OpinionRole, values: Vec<f64>) -> Self {
        Self { role, values }
    }

    pub fn role(&self) -> OpinionRole {
        self.role
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl Deref for OpinionProfile {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

fn require_truthful(s: &OpinionProfile) -> Result<()> {
    if s.role() == OpinionRole::IntrinsicTrue {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "costs are charged against truthful intrinsic opinions, got {:?}",
            s.role()
        )))
    }
}

/// `B = ((I − A)L + A)⁻¹ A` together with the factorization used to build it.
#[derive(Debug, Clone)]
pub struct ResponseMatrix {
    b: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    alpha: SusceptibilityProfile,
    laplacian: DMatrix<f64>,
    residual: f64,
}

impl ResponseMatrix {
    pub fn new(graph: &WeightedGraph, alpha: &SusceptibilityProfile) -> Result<Self> {
        let n = graph.n();
        check_len(n, alpha.len())?;
        let l = laplacian(graph);
        let mut shifted = l.clone();
        for (i, at) in alpha.alpha_tilde().iter().enumerate() {
            shifted[(i, i)] += at;
        }
        let factor = Cholesky::new(shifted).ok_or(Error::SingularSystem)?;
        let rhs = DMatrix::from_diagonal(&DVector::from_column_slice(alpha.alpha_tilde()));
        let b = factor.solve(&rhs);
        let mut out = Self {
            b,
            factor,
            alpha: alpha.clone(),
            laplacian: l,
            residual: 0.0,
        };
        out.residual = out.probe_residual();
        if out.residual.is_nan() || out.residual > 1e-8 {
            return Err(Error::SingularSystem);
        }
        Ok(out)
    }

    /// Max-entry residual of `((I − A)L + A)B − A` on the probes `𝟏` and
    /// an alternating sign vector.
    fn probe_residual(&self) -> f64 {
        let n = self.n();
        let probes = [
            DVector::from_element(n, 1.0),
            DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 }),
        ];
        probes
            .iter()
            .map(|x| {
                let bx = &self.b * x;
                let lbx = &self.laplacian * &bx;
                (0..n)
                    .map(|i| {
                        let a = self.alpha.alpha()[i];
                        ((1.0 - a) * lbx[i] + a * bx[i] - a * x[i]).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn n(&self) -> usize {
        self.b.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    pub fn alpha(&self) -> &SusceptibilityProfile {
        &self.alpha
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `B s`, solved through the factorization.
    pub fn apply(&self, s: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), s.len())?;
        let rhs = DVector::from_iterator(
            s.len(),
            s.iter().zip(self.alpha.alpha_tilde()).map(|(x, at)| x * at),
        );
        Ok(self.factor.solve(&rhs).iter().copied().collect())
    }

    /// `B⁻¹ z = Ã⁻¹ (L + Ã) z`.
    pub fn apply_inverse(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), z.len())?;
        let lz = &self.laplacian * DVector::from_column_slice(z);
        Ok((0..z.len())
            .map(|i| z[i] + lz[i] / self.alpha.alpha_tilde()[i])
            .collect())
    }

    pub fn equilibrium(&self, s: &[f64]) -> Result<OpinionProfile> {
        Ok(OpinionProfile::trusted(OpinionRole::Expressed, self.apply(s)?))
    }
}

/// Expressed opinions at the FJ equilibrium, `z = B s`.
pub fn fj_equilibrium(
    graph: &WeightedGraph,
    alpha: &SusceptibilityProfile,
    s: &[f64],
) -> Result<OpinionProfile> {
    check_len(graph.n(), s.len())?;
    ResponseMatrix::new(graph, alpha)?.equilibrium(s)
}

pub const DYNAMICS_MAX_ITER: usize = 100_000;

/// Synchronous best-response dynamics: every agent moves to the minimizer
/// of its own quadratic cost given the neighbors' current opinions,
/// `z_i ← (α_i s_i + (1−α_i) Σ_j w_ij z_j) / (α_i + (1−α_i) d_i)`.
///
/// Stops once `ρ/(1−ρ)·‖Δz‖∞ ≤ tol`, where `ρ < 1` is the ∞-norm of the
/// iteration matrix, so the returned point is within `tol` of `B s`.
pub fn best_response_dynamics(
    graph: &WeightedGraph,
    alpha: &SusceptibilityProfile,
    s: &[f64],
    z0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(OpinionProfile, usize)> {
    let n = graph.n();
    check_len(n, alpha.len())?;
    check_len(n, s.len())?;
    check_len(n, z0.len())?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("tol = {tol} must be > 0")));
    }
    let a = alpha.alpha();
    let rho = (0..n)
        .map(|i| {
            let pull = (1.0 - a[i]) * graph.degree(i);
            pull / (a[i] + pull)
        })
        .fold(0.0, f64::max);
    let amplify = rho / (1.0 - rho);

    let mut z = z0.to_vec();
    for iter in 1..=max_iter {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let pull: f64 = graph.neighbors(i).iter().map(|&(j, w)| w * z[j]).sum();
                let weight = (1.0 - a[i]) * graph.degree(i);
                (a[i] * s[i] + (1.0 - a[i]) * pull) / (a[i] + weight)
            })
            .collect();
        let delta = next
            .iter()
            .zip(&z)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        z = next;
        if delta * amplify <= tol {
            return Ok((OpinionProfile::trusted(OpinionRole::Expressed, z), iter));
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
    })
}

/// `c_i = (1−α_i) Σ_{j∼i} w_ij (z_i − z_j)² + α_i (z_i − s_i)²`.
pub fn agent_cost(
    i: usize,
    z: &[f64],
    s_true: &OpinionProfile,
    graph: &WeightedGraph,
    alpha: &SusceptibilityProfile,
) -> Result<f64> {
    require_truthful(s_true)?;
    check_cost_inputs(z, s_true, graph, alpha)?;
    if i >= graph.n() {
        return Err(Error::InvalidParameter(format!("agent {i} out of range")));
    }
    Ok(raw_agent_cost(i, z, s_true, graph, alpha.alpha()))
}

fn check_cost_inputs(
    z: &[f64],
    s: &[f64],
    graph: &WeightedGraph,
    alpha: &SusceptibilityProfile,
) -> Result<()> {
    let n = graph.n();
    check_len(n, z.len())?;
    check_len(n, s.len())?;
    check_len(n, alpha.len())
}

pub(crate) fn raw_agent_cost(
    i: usize,
    z: &[f64],
    s: &[f64],
    graph: &WeightedGraph,
    alpha: &[f64],
) -> f64 {
    let social: f64 = graph
        .neighbors(i)
        .iter()
        .map(|&(j, w)| w * (z[i] - z[j]).powi(2))
        .sum();
    (1.0 - alpha[i]) * social + alpha[i] * (z[i] - s[i]).powi(2)
}

pub(crate) fn raw_total_cost(z: &[f64], s: &[f64], graph: &WeightedGraph, alpha: &[f64]) -> f64 {
    (0..graph.n())
        .map(|i| raw_agent_cost(i, z, s, graph, alpha))
        .sum()
}

/// Total cost `C(z) = Σ_i c_i(z)`.
pub fn total_cost(
    z: &[f64],
    s_true: &OpinionProfile,
    graph: &WeightedGraph,
    alpha: &SusceptibilityProfile,
) -> Result<f64> {
    require_truthful(s_true)?;
    check_cost_inputs(z, s_true, graph, alpha)?;
    Ok(raw_total_cost(z, s_true, graph, alpha.alpha()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub polarization: f64,
    pub disagreement: f64,
    pub total_cost: f64,
    pub mean_opinion: f64,
}

pub fn polarization(z: &[f64]) -> f64 {
    if z.is_empty() {
        return 0.0;
    }
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    z.iter().map(|x| (x - mean).powi(2)).sum()
}

/// Disagreement as the Laplacian quadratic form `zᵀLz` (each edge once).
pub fn disagreement(z: &[f64], graph: &WeightedGraph) -> f64 {
    graph.quadratic_form(z)
}

pub fn metrics(
    z: &[f64],
    s_true: &OpinionProfile,
    graph: &WeightedGraph,
    alpha: &SusceptibilityProfile,
) -> Result<MetricsReport> {
    let total_cost = total_cost(z, s_true, graph, alpha)?;
    let mean_opinion = if z.is_empty() {
        0.0
    } else {
        z.iter().sum::<f64>() / z.len() as f64
    };
    Ok(MetricsReport {
        polarization: polarization(z),
        disagreement: disagreement(z, graph),
        total_cost,
        mean_opinion,
    })
}

pub const DEGENERATE_COST: f64 = 1e-14;

/// Price of Misreporting `C(z′) / C(z)`.
pub fn pom(
    z_corrupted: &[f64],
    z_truthful: &[f64],
    s_true: &OpinionProfile,
    graph: &WeightedGraph,
    alpha: &SusceptibilityProfile,
) -> Result<f64> {
    let baseline = total_cost(z_truthful, s_true, graph, alpha)?;
    if baseline <= DEGENERATE_COST {
        return Err(Error::DegenerateBaseline { cost: baseline });
    }
    Ok(total_cost(z_corrupted, s_true, graph, alpha)? / baseline)
}

/// `(λ_n + 4α̃)(λ_n + α̃)² / α̃⁵`.
pub fn pom_upper_bound_shared(lambda_n: f64, alpha_tilde: f64) -> f64 {
    (lambda_n + 4.0 * alpha_tilde) * (lambda_n + alpha_tilde).powi(2) / alpha_tilde.powi(5)
}

/// `((1−α_min)/(1−α_max))·(λ_n + 4α̃_max)(λ_n + α̃_max)² / α̃_min` with
/// `α̃_min = α_min/(1−α_max)` and `α̃_max = α_max/(1−α_min)`.
pub fn pom_upper_bound_hetero(lambda_n: f64, alpha_min: f64, alpha_max: f64) -> f64 {
    let at_min = alpha_min / (1.0 - alpha_max);
    let at_max = alpha_max / (1.0 - alpha_min);
    (1.0 - alpha_min) / (1.0 - alpha_max) * (lambda_n + 4.0 * at_max) * (lambda_n + at_max).powi(2)
        / at_min
}

/// `Q = BLB + α̃(I − 2B + B²)` for a shared susceptibility, with its
/// spectrum. `sᵀQs = zᵀLz + α̃‖z − s‖²` at `z = Bs`.
#[derive(Debug, Clone)]
pub struct QMatrixOracle {
    pub q: DMatrix<f64>,
    /// Eigenvalues of `Q`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Laplacian eigenvalues, ascending.
    pub laplacian_eigenvalues: Vec<f64>,
    pub alpha_tilde: f64,
}

impl QMatrixOracle {
    pub fn quadratic_form(&self, s: &[f64]) -> f64 {
        let v = DVector::from_column_slice(s);
        v.dot(&(&self.q * &v))
    }

    /// Eigenvalues predicted from the graph spectrum, `α̃λ_i/(λ_i + α̃)`.
    pub fn predicted_spectrum(&self) -> Vec<f64> {
        let at = self.alpha_tilde;
        let mut out: Vec<f64> = self
            .laplacian_eigenvalues
            .iter()
            .map(|l| at * l / (l + at))
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }
}

/// Builds `Q` and checks its spectrum against the graph spectrum; a
/// mismatch means `B` is wrong.
pub fn q_matrix_oracle(graph: &WeightedGraph, alpha: f64) -> Result<QMatrixOracle> {
    let n = graph.n();
    let profile = SusceptibilityProfile::shared(n, alpha)?;
    let response = ResponseMatrix::new(graph, &profile)?;
    let b = response.matrix();
    let l = response.laplacian();
    let at = alpha / (1.0 - alpha);
    let identity = DMatrix::<f64>::identity(n, n);
    let q = b * l * b + (&identity - b * 2.0 + b * b) * at;
    let q = (&q + q.transpose()) * 0.5;
    let eigenvalues: Vec<f64> = spectral_decomposition(&q)?.eigenvalues.iter().copied().collect();
    let laplacian_eigenvalues: Vec<f64> =
        spectral_decomposition(l)?.eigenvalues.iter().copied().collect();
    let oracle = QMatrixOracle {
        q,
        eigenvalues,
        laplacian_eigenvalues,
        alpha_tilde: at,
    };
    let predicted = oracle.predicted_spectrum();
    let scale = predicted.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    for (got, want) in oracle.eigenvalues.iter().zip(&predicted) {
        if (got - want).abs() > 1e-7 * scale {
            return Err(Error::OracleMismatch(format!(
                "Q eigenvalue {got} vs predicted {want}"
            )));
        }
    }
    Ok(oracle)
}
