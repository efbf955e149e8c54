use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "btties", version, about = "Bayesian Bradley-Terry with ties: fitting, simulation and the study server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the tie model to a judgement CSV under a spatial prior.
    Fit(FitArgs),
    /// Simulate a comparison dataset from the tie model.
    Simulate(SimulateArgs),
    /// Run one of the simulation studies and write its report as CSV.
    Bench {
        #[arg(value_enum)]
        study: Study,
        /// Scenario file (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Effective sample size of each chain in a draws file.
    Ess {
        /// NDJSON draws written by `fit --draws`, or numeric CSV columns.
        chain: PathBuf,
    },
    /// Host the study API.
    Serve(ServeArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Study {
    Efficiency,
    Scalability,
    Sensitivity,
}

#[derive(clap::Args, Debug)]
struct FitArgs {
    /// Judgements: `judge_id,ward_i,ward_j,outcome,timestamp`.
    #[arg(long)]
    judgements: PathBuf,
    /// Edge list: `ward_a,ward_b`.
    #[arg(long)]
    adjacency: PathBuf,
    /// One ward label per line. Needed when some ward has no neighbour.
    #[arg(long)]
    wards: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    iterations: usize,
    #[arg(long, default_value_t = 100)]
    burn_in: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fix `δ` instead of learning it.
    #[arg(long)]
    delta: Option<f64>,
    /// Fix `α²` instead of learning it.
    #[arg(long)]
    alpha2: Option<f64>,
    /// Use the random-walk Metropolis baseline instead of the Gibbs sampler.
    #[arg(long)]
    mhrw: bool,
    /// Run single-threaded.
    #[arg(long)]
    sequential: bool,
    /// Write the summary as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write every retained draw as NDJSON here.
    #[arg(long)]
    draws: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 64)]
    wards: usize,
    /// Total comparisons; ten per ward when omitted.
    #[arg(long)]
    comparisons: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw the prior correlation from a Wishart instead of a grid graph.
    #[arg(long)]
    wishart: bool,
    /// Receives `judgements.csv`, `adjacency.csv` and `truth.csv`.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(clap::Args, Debug)]
struct ServeArgs {
    /// Overridden by `PORT`.
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Overridden by `DATA_DIR`.
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    /// Seeds the pair scheduler.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Fit(args) => commands::fit(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Bench { study, config, out } => commands::bench(study, config, out),
        Command::Ess { chain } => commands::ess(&chain),
        Command::Serve(args) => commands::serve(args),
    }
}
