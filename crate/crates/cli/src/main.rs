use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(name = "misreport", version, about = "Opinion dynamics under strategic misreporting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct GraphArgs {
    /// Edge list `u v [w]`, `#` comments.
    #[arg(long)]
    pub graph: PathBuf,
    /// Minimum node count (isolated trailing nodes).
    #[arg(long, default_value_t = 0)]
    pub nodes: usize,
}

#[derive(Args, Clone)]
pub struct AlphaArgs {
    /// Shared susceptibility or a susceptibility file.
    #[arg(long)]
    pub alpha: String,
}

#[derive(Args, Clone, Default)]
pub struct SetArgs {
    /// Strategic set file, one node per line.
    #[arg(long, group = "set_source")]
    pub set: Option<PathBuf>,
    /// Top fraction of nodes by eigenvector centrality.
    #[arg(long, group = "set_source")]
    pub top_frac: Option<f64>,
    /// Uniformly random fraction of nodes (seeded).
    #[arg(long, group = "set_source")]
    pub random_frac: Option<f64>,
}

#[derive(Args, Clone, Default)]
pub struct OpinionArgs {
    /// Intrinsic opinion file.
    #[arg(long, group = "opinion_source")]
    pub opinions: Option<PathBuf>,
    /// Gaussian opinions `mean,sd`.
    #[arg(long, group = "opinion_source", value_delimiter = ',')]
    pub gaussian: Option<Vec<f64>>,
    /// ±1 opinions with P(+1) = p.
    #[arg(long, group = "opinion_source")]
    pub rademacher: Option<f64>,
    /// Opinions `s = Xv` from the embedding, `v` comma separated.
    #[arg(long, group = "opinion_source", value_delimiter = ',', allow_hyphen_values = true)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Args, Clone)]
pub struct OutArgs {
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Default)]
pub enum VariantArg {
    #[default]
    Fc,
    Gd,
}

#[derive(Subcommand)]
enum Command {
    /// Expressed opinions z = Bs.
    Equilibrium {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        alpha: AlphaArgs,
        #[arg(long)]
        opinions: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Nash equilibrium of the misreporting game.
    Strategic {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        alpha: AlphaArgs,
        #[arg(long)]
        opinions: PathBuf,
        #[command(flatten)]
        set: SetArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Polarization, disagreement and cost of an opinion profile.
    Metrics {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        alpha: AlphaArgs,
        #[arg(long)]
        opinions: PathBuf,
        /// Corrupted equilibrium to compare against the truthful one.
        #[arg(long)]
        zprime: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Hypothesis test for manipulation.
    Detect {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        alpha: AlphaArgs,
        #[arg(long)]
        zprime: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        mu0: f64,
        #[arg(long, default_value_t = 0.05)]
        significance: f64,
        /// Emit one machine-readable CSV line.
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Identify strategic agents by robust regression.
    Recover {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        alpha: AlphaArgs,
        #[arg(long)]
        zprime: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t)]
        variant: VariantArg,
        /// True intrinsic opinions, for the recovery error.
        #[arg(long)]
        opinions: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Damage ratios over a grid of shared susceptibilities.
    SweepAlpha {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        opinions: OpinionArgs,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[command(flatten)]
        set: SetArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Damage ratios over strategic fractions (top centrality).
    SweepFrac {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        alpha: AlphaArgs,
        #[command(flatten)]
        opinions: OpinionArgs,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.05,0.1,0.2,0.5,1")]
        fracs: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Type I / II rates of the detection test.
    DetectExp {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        alpha: AlphaArgs,
        /// Gaussian opinions `mean,sd`.
        #[arg(long, value_delimiter = ',', default_value = "0,1", allow_hyphen_values = true)]
        gaussian: Vec<f64>,
        #[command(flatten)]
        set: SetArgs,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// Shift added to strategic reports, in units of σ.
        #[arg(long, default_value_t = 5.0)]
        shift: f64,
        #[arg(long, default_value_t = 0.05)]
        significance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Recovery error and balanced accuracy over random strategic sets.
    RecoverExp {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        alpha: AlphaArgs,
        #[command(flatten)]
        opinions: OpinionArgs,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.15,0.2")]
        fracs: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        trials: u64,
        #[arg(long, value_enum, default_value_t)]
        variant: VariantArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Stochastic blockmodel edge list and one-hot embedding.
    GenBlockmodel {
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long)]
        p_in: f64,
        #[arg(long)]
        p_out: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the one-hot community embedding here.
        #[arg(long)]
        embedding_out: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// SSC/SSS certificate for one-hot blockmodel features.
    SscCert {
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long)]
        gamma: f64,
        #[command(flatten)]
        out: OutArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
