use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ipgap_core::bounds::{Horizon, Mode, SweepAxis};

#[derive(Debug, Parser)]
#[command(name = "ipgap", version, about = "Iterated Poincare gaps and concentration bounds for Markov chains")]
pub struct Cli {
    /// Output format; defaults to csv for `verify` and `sweep`, json otherwise.
    #[arg(long, value_enum, global = true)]
    pub output_format: Option<OutputFormat>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Human,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral gaps of a chain or generator.
    Gaps(GapsArgs),
    /// Closed-form tail bound from summary quantities.
    Bound(BoundArgs),
    /// Exact (and optionally simulated) moment generating function against its bound.
    Mgf(MgfArgs),
    /// Monte Carlo tail estimates against the tail bound.
    Verify(VerifyArgs),
    /// Tail bound along one parameter axis.
    Sweep(SweepArgs),
    /// Real and complex numerical radius of a square matrix.
    Radius(RadiusArgs),
    /// Built-in example instances and their known facts.
    Examples(ExamplesArgs),
}

pub fn parse_p(s: &str) -> Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
        other => other.parse::<f64>().map_err(|e| format!("{s:?}: {e}")),
    }
}

#[derive(Debug, Args)]
pub struct GapsArgs {
    /// Chain file (JSON).
    pub chain: PathBuf,
    /// Largest power used by the truncated pseudo gap.
    #[arg(long, default_value_t = ipgap_core::spectral::DEFAULT_PSEUDO_KMAX)]
    pub pseudo_kmax: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Discrete,
    Continuous,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Discrete => Mode::Discrete,
            ModeArg::Continuous => Mode::Continuous,
        }
    }
}

#[derive(Debug, Args, Clone)]
#[group(required = true, multiple = false)]
pub struct HorizonArgs {
    /// Number of steps (discrete time).
    #[arg(long)]
    pub n: Option<u64>,
    /// Time horizon (continuous time).
    #[arg(long)]
    pub t: Option<f64>,
}

impl HorizonArgs {
    pub fn horizon(&self) -> Horizon {
        match (self.n, self.t) {
            (Some(n), _) => Horizon::Steps(n),
            (None, Some(t)) => Horizon::Time(t),
            (None, None) => unreachable!("clap requires one of --n/--t"),
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct BoundArgs {
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[command(flatten)]
    pub horizon: HorizonArgs,
    #[arg(long)]
    pub delta: f64,
    /// Sup norm of the centered observable.
    #[arg(long = "M")]
    pub m: f64,
    #[arg(long)]
    pub sigma2: f64,
    #[arg(long)]
    pub eta_p: f64,
    /// Integrability exponent of the initial density; `inf` allowed.
    #[arg(long, default_value = "inf", value_parser = parse_p)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub nu_norm: f64,
}

#[derive(Debug, Args)]
pub struct ObservableArgs {
    /// Observable values, overriding `f` in the chain file.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub f: Option<Vec<f64>>,
    /// Initial distribution, overriding `nu` in the chain file.
    #[arg(long, value_delimiter = ',')]
    pub nu: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 10_000)]
    pub replicas: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Confidence intervals have level 1 - alpha.
    #[arg(long, default_value_t = ipgap_core::simulate::DEFAULT_ALPHA)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct MgfArgs {
    pub chain: PathBuf,
    #[command(flatten)]
    pub horizon: HorizonArgs,
    /// One or more theta values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub theta: Vec<f64>,
    #[command(flatten)]
    pub observable: ObservableArgs,
    /// Also estimate the MGF by simulation.
    #[arg(long)]
    pub simulate: bool,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub chain: PathBuf,
    #[command(flatten)]
    pub horizon: HorizonArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub delta_grid: Vec<f64>,
    #[command(flatten)]
    pub observable: ObservableArgs,
    #[arg(long, default_value = "inf", value_parser = parse_p)]
    pub p: f64,
    /// Claimed gap to test instead of the computed one.
    #[arg(long)]
    pub eta_p: Option<f64>,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub base: BoundArgs,
    /// Axis to vary: n, t, delta or eta_p.
    #[arg(long)]
    pub axis: SweepAxis,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct RadiusArgs {
    /// JSON file holding a square matrix as a list of rows.
    #[arg(conflicts_with = "matrix", required_unless_present = "matrix")]
    pub file: Option<PathBuf>,
    /// Matrix given inline, e.g. '[[0,1],[-1,0]]'.
    #[arg(long, allow_hyphen_values = true)]
    pub matrix: Option<String>,
    #[arg(long, default_value_t = ipgap_core::spectral::DEFAULT_RADIUS_GRID)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct ExamplesArgs {
    /// One of appendix-a, skew-radius, flip-chain.
    pub name: String,
}
