use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "ghz-sim",
    version,
    about = "Multi-ensemble GHZ entanglement generation: closed forms and Monte Carlo"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form times and step probabilities for one configuration.
    Analytic(AnalyticArgs),
    /// Monte Carlo trials of the basic or improved scheme.
    Simulate(SimulateArgs),
    /// Exact evaluation of a named protocol step.
    Oracle(OracleArgs),
    /// Closed-form sweep over ensemble counts and loss values.
    Scaling(ScalingArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Micro,
    Abstract,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Basic,
    Improved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhasesArg {
    Zero,
    Random,
    Mirrored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RestartArg {
    All,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Parallel,
    Sequential,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.01)]
    pub p0: f64,
    /// Pulse repetition rate in Hz.
    #[arg(long, default_value_t = 1e7)]
    pub fp: f64,
    #[command(flatten)]
    pub output: Output,
}

/// Every option may also come from `--config`; flags win.
#[derive(Debug, Args, Default)]
pub struct SimulateArgs {
    /// File of `key=value` lines using the long flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub fp: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub engine: Option<EngineArg>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long, value_enum)]
    pub phases: Option<PhasesArg>,
    #[arg(long, value_enum)]
    pub restart: Option<RestartArg>,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleArg>,
    /// Per-trial budget of pair preparations.
    #[arg(long)]
    pub max_pair_preps: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    /// pair, step-i, step-ii or closure.
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
    pub ns: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3333333333333333,0.5")]
    pub etas: Vec<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub p0: f64,
    #[arg(long, default_value_t = 1e7)]
    pub fp: f64,
    #[command(flatten)]
    pub output: Output,
}
