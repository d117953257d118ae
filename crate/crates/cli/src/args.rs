use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use colonies_core::{ModelParams, PopulationState, SpinalMode, SplitLaw};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "colonies",
    version,
    about = "Simulate colonial branching diffusions and their spinal estimators"
)]
pub struct Cli {
    /// File of key=value lines supplying defaults for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads; defaults to the hardware parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump the path of one trajectory as CSV.
    Simulate(SimulateArgs),
    /// Monte-Carlo estimates of population functionals.
    Estimate(EstimateArgs),
    /// Run both estimators on one functional and report their efficiency.
    Compare(CompareArgs),
    /// Data and reference curves for one of the standard figures.
    Figure(FigureArgs),
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub delta: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub mu: f64,
    /// uniform | det:<p> | beta:<shape>
    #[arg(long, default_value = "uniform")]
    pub theta_law: SplitLaw,
    /// Initial number of colonies.
    #[arg(long, default_value_t = 1)]
    pub n0: usize,
    /// Initial total resource, shared equally; defaults to n0.
    #[arg(long, allow_negative_numbers = true)]
    pub r0: Option<f64>,
    /// Explicit comma-separated initial traits; overrides n0 and r0.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub traits: Option<Vec<f64>>,
    /// End time.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ModelArgs {
    pub fn params(&self) -> Result<ModelParams, CliError> {
        Ok(ModelParams::new(
            self.a,
            self.sigma,
            self.delta,
            self.lambda,
            self.mu,
            self.theta_law,
        )?)
    }

    pub fn initial_state(&self) -> Result<PopulationState, CliError> {
        if let Some(traits) = &self.traits {
            return Ok(PopulationState::new(0.0, traits)?);
        }
        let r0 = self.r0.unwrap_or(self.n0 as f64);
        Ok(PopulationState::uniform(self.n0, r0)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodChoice {
    Direct,
    Spinal,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum SpinalModeArg {
    #[default]
    Exact,
    Thinning,
}

impl From<SpinalModeArg> for SpinalMode {
    fn from(mode: SpinalModeArg) -> Self {
        match mode {
            SpinalModeArg::Exact => SpinalMode::Exact,
            SpinalModeArg::Thinning => SpinalMode::Thinning,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = MethodChoice::Direct)]
    pub method: MethodChoice,
    #[arg(long, value_enum, default_value_t = SpinalModeArg::Exact)]
    pub spinal_mode: SpinalModeArg,
    /// Spacing of the output grid added to the event times; defaults to t/100.
    #[arg(long)]
    pub grid: Option<f64>,
    /// Output CSV; standard output if absent or "-".
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Functional name; repeatable. Defaults to the whole registry.
    #[arg(long = "functional")]
    pub functionals: Vec<String>,
    #[arg(long, value_enum, default_value_t = MethodChoice::Spinal)]
    pub method: MethodChoice,
    /// Threshold for concentration_tail; repeatable.
    #[arg(long = "gamma")]
    pub gammas: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub trajectories: u64,
    #[arg(long, value_enum, default_value_t = SpinalModeArg::Exact)]
    pub spinal_mode: SpinalModeArg,
    /// Write measured wall times instead of 0, at the cost of byte-stable output.
    #[arg(long)]
    pub timing: bool,
    /// Report how many contributions would overflow single precision.
    #[arg(long)]
    pub simulate_f32_accumulation: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "variance_total_resource")]
    pub functional: String,
    /// Trajectories for the direct method.
    #[arg(long, default_value_t = 10_000)]
    pub trajectories: u64,
    /// Trajectories for the spinal method; defaults to --trajectories.
    #[arg(long)]
    pub trajectories_spinal: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    /// 1, 2, 3 or 5.
    pub id: u8,
    #[arg(long, default_value_t = 10_000)]
    pub trajectories: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for figure<ID>.csv and figure<ID>_oracle.csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}
