//! `qbra`: command line driver for the qbra-core engines.

mod run;
mod tools;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "qbra", version, about = "Queue-based random-access network experiments")]
struct Cli {
    /// Worker threads for replications (default: available cores).
    #[arg(long, global = true, env = "QBRA_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the pre-limit jump chain for every seed.
    Simulate(RunArgs),
    /// Generate random fluid paths for every seed.
    Fluid(RunArgs),
    /// Integrate the fast-mixing drift ODE for every seed.
    Fastmix(RunArgs),
    /// Decide capacity-region membership of a load vector.
    Capacity(CapacityArgs),
    /// Minimal set covers of the node set by maximal schedules.
    Cover(GraphArgs),
    /// Build the k-duplicate of a graph.
    Duplicate(DuplicateArgs),
    /// Broken-diamond constants, fluid cycle diagnostics and M1-exit law.
    Analyze(AnalyzeArgs),
    /// Estimate the M2/M3 exit probabilities from pre-limit runs.
    EstimatePq(PqArgs),
}

/// Where an experiment comes from and what to override.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// Experiment file (TOML).
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in experiment: paper-sec6, diamond-stable or duplicate-k.
    #[arg(long)]
    pub preset: Option<String>,
    /// Seeds: `7`, `1..100`, `1..=100` or `1,4,9`.
    #[arg(long, visible_alias = "seed")]
    pub seeds: Option<String>,
    /// Output root; files go to `<root>/<experiment name>/`.
    #[arg(long, env = "QBRA_OUT", default_value = "qbra-out")]
    pub out: PathBuf,
    /// Fluid scale R.
    #[arg(long = "R", visible_alias = "r")]
    pub r: Option<f64>,
    /// Ticks (simulate) or scaled time (fluid, fastmix).
    #[arg(long)]
    pub horizon: Option<f64>,
    #[command(flatten)]
    pub topology: TopologyArgs,
    /// Arrival rates: one value or one per node.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambda: Option<Vec<f64>>,
    /// Back-off exponent γ (`inf` for random capture).
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct TopologyArgs {
    /// Built-in topology name or graph file.
    #[arg(long)]
    pub topology: Option<String>,
    /// Node count for complete, cycle and empty graphs.
    #[arg(long)]
    pub n: Option<usize>,
    /// Component sizes for diamond and complete-partite graphs.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
pub struct GraphArgs {
    #[command(flatten)]
    pub topology: TopologyArgs,
    /// Take the topology from an experiment file instead.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CapacityArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Load vector ρ, one entry per node.
    #[arg(long, value_delimiter = ',', required = true)]
    pub rho: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct DuplicateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Duplicates per node.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Write the graph here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// κ₁,κ₂,κ₃,κ₆.
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [0.4, 0.4, 0.4, 0.2])]
    pub kappa: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.99)]
    pub rho: f64,
    /// Six arrival rates; replaces κ, α and ρ.
    #[arg(long, value_delimiter = ',', num_args = 6)]
    pub lambda: Option<Vec<f64>>,
    /// Supermartingale exponents m.
    #[arg(long, value_delimiter = ',', default_values_t = [2.0])]
    pub m: Vec<f64>,
    /// Fluid segments per seed for the cycle diagnostics (0 skips them).
    #[arg(long, default_value_t = 0)]
    pub segments: usize,
    /// Pre-limit runs for the M1-exit law (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub m1_exits: usize,
    /// Initial scale for the M1-exit runs.
    #[arg(long = "R", visible_alias = "r", default_value_t = 1e4)]
    pub r: f64,
    /// Back-off exponent for the M1-exit runs.
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    #[arg(long, visible_alias = "seed", default_value = "1")]
    pub seeds: String,
    #[arg(long, env = "QBRA_OUT", default_value = "qbra-out")]
    pub out: PathBuf,
    /// Subdirectory of the output root.
    #[arg(long, default_value = "analyze")]
    pub name: String,
}

#[derive(Args, Debug)]
pub struct PqArgs {
    /// Start period: m2 or m3.
    #[arg(long, default_value = "m2")]
    pub side: String,
    /// Six arrival rates (default: κ = 0.4,0.4,0.4,0.2 with α = 0.05, ρ = 0.99).
    #[arg(long, value_delimiter = ',', num_args = 6)]
    pub lambda: Option<Vec<f64>>,
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    /// Scales R to run.
    #[arg(long, value_delimiter = ',', default_values_t = [1e3, 3e3, 1e4])]
    pub ladder: Vec<f64>,
    /// Runs per scale.
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, env = "QBRA_OUT", default_value = "qbra-out")]
    pub out: PathBuf,
    #[arg(long, default_value = "estimate-pq")]
    pub name: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: cannot start {jobs} workers: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => run::execute(&a, qbra_core::config::Engine::Prelimit),
        Command::Fluid(a) => run::execute(&a, qbra_core::config::Engine::Fluid),
        Command::Fastmix(a) => run::execute(&a, qbra_core::config::Engine::Fastmix),
        Command::Capacity(a) => tools::capacity(&a),
        Command::Cover(a) => tools::cover(&a),
        Command::Duplicate(a) => tools::duplicate(&a),
        Command::Analyze(a) => tools::analyze(&a),
        Command::EstimatePq(a) => tools::estimate_pq(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
