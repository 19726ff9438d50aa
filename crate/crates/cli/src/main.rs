//! Command-line front end for the pattern-mining pipeline.
//!
//! `habitminer run` ingests a 3-column call-record file, mines it with the
//! selected engine(s) and writes the report artifacts plus a digest
//! manifest. `habitminer synth` generates a planted-pattern benchmark in
//! the same raw format.

mod artifacts;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use artifacts::Format;
use habitminer_core::TauExp;
use run::{EngineChoice, RunOptions, SynthOptions};

/// Exit codes: 2 configuration, 3 input, 4 engine failure.
#[derive(Debug)]
pub enum CliError {
    Config(anyhow::Error),
    Input(anyhow::Error),
    Engine(anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Engine(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(e) => format!("configuration error: {e:#}"),
            CliError::Input(e) => format!("input error: {e:#}"),
            CliError::Engine(e) => format!("engine error: {e:#}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "habitminer",
    about = "Mine recurrent patterns in call data records",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analysis pipeline on a raw record file.
    Run(RunArgs),
    /// Generate a synthetic benchmark with planted patterns.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Raw input file: user_id, conn_datetime, subref_id per line.
    #[arg(long)]
    input: PathBuf,
    /// User to analyze; may be omitted for single-user files.
    #[arg(long)]
    user: Option<String>,
    /// Engine to run: ldabcd, proclus or both.
    #[arg(long, default_value = "ldabcd")]
    engine: String,
    /// Cluster quality acceptance threshold.
    #[arg(long = "tau-cq", default_value_t = 0.8)]
    tau_cq: f64,
    /// Meta-cluster merge radius.
    #[arg(long, default_value_t = 0.2)]
    theta: f64,
    /// Edge weight scale: a positive number or "auto".
    #[arg(long = "tau-exp", default_value = "auto")]
    tau_exp: String,
    /// Projected clustering: number of clusters.
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Projected clustering: average subspace dimensionality.
    #[arg(long, default_value_t = 5)]
    l: usize,
    /// Projected clustering: minimum cluster support fraction.
    #[arg(long = "min-dev", default_value_t = 0.1)]
    min_dev: f64,
    /// Number of seeded runs; above 1 a stability report is produced.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory for all artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated artifact formats.
    #[arg(long, default_value = "json,csv,svg")]
    format: String,
    /// Discovery agents.
    #[arg(long, default_value_t = 8)]
    agents: usize,
    /// Walks each agent performs per sampled PC.
    #[arg(long = "walks-per-pc", default_value_t = 20)]
    walks_per_pc: usize,
    /// Smallest acceptable cluster.
    #[arg(long = "min-cluster-size", default_value_t = 5)]
    min_cluster_size: usize,
    /// Dense-region radius in standardized projection units.
    #[arg(long = "region-radius", default_value_t = 0.5)]
    region_radius: f64,
    /// Smallest meta-cluster count forming a dense region.
    #[arg(long = "region-min-size", default_value_t = 1)]
    region_min_size: usize,
    /// Smallest share of the total discovery support a region must carry.
    #[arg(long = "region-min-share", default_value_t = 0.10)]
    region_min_share: f64,
    /// Meta-clusters merged from fewer clusters than this are kept in the
    /// result but left out of the projection analysis.
    #[arg(long = "min-support", default_value_t = 3)]
    min_support: usize,
    /// Scale increment of the automatic sweep.
    #[arg(long = "sweep-step", default_value_t = 1.0)]
    sweep_step: f64,
    /// Walks per scale value in the automatic sweep.
    #[arg(long = "sweep-walks", default_value_t = 150)]
    sweep_walks: usize,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON file with planted pattern specs; defaults to the built-in
    /// four-pattern benchmark.
    #[arg(long)]
    patterns: Option<PathBuf>,
    /// Number of uniform noise records.
    #[arg(long, default_value_t = 100)]
    noise: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output raw record file.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth sidecar path; defaults to the output with a
    /// .truth.json extension.
    #[arg(long)]
    truth: Option<PathBuf>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("HABITMINER_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.parse().map_err(|_| {
        CliError::Config(anyhow::anyhow!(
            "HABITMINER_THREADS must be a positive integer, got {value:?}"
        ))
    })?;
    if threads == 0 {
        return Err(CliError::Config(anyhow::anyhow!(
            "HABITMINER_THREADS must be positive"
        )));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(anyhow::anyhow!("cannot configure thread pool: {e}")))
}

fn parse_run_args(args: RunArgs) -> Result<RunOptions, CliError> {
    let engine = match args.engine.as_str() {
        "ldabcd" => EngineChoice::Ldabcd,
        "proclus" => EngineChoice::Proclus,
        "both" => EngineChoice::Both,
        other => {
            return Err(CliError::Config(anyhow::anyhow!(
                "unknown engine {other:?} (expected ldabcd, proclus or both)"
            )))
        }
    };
    let tau_exp = match args.tau_exp.as_str() {
        "auto" => TauExp::Auto,
        number => {
            let value: f64 = number.parse().map_err(|_| {
                CliError::Config(anyhow::anyhow!(
                    "--tau-exp must be a number or \"auto\", got {number:?}"
                ))
            })?;
            TauExp::Fixed(value)
        }
    };
    let formats = Format::parse_list(&args.format).map_err(CliError::Config)?;
    Ok(RunOptions {
        input: args.input,
        user: args.user,
        engine,
        tau_cq: args.tau_cq,
        theta: args.theta,
        tau_exp,
        k: args.k,
        l: args.l,
        min_dev: args.min_dev,
        runs: args.runs,
        seed: args.seed,
        out: args.out,
        formats,
        agents: args.agents,
        walks_per_pc: args.walks_per_pc,
        min_cluster_size: args.min_cluster_size,
        region_radius: args.region_radius,
        region_min_size: args.region_min_size,
        region_min_share: args.region_min_share,
        min_support: args.min_support,
        sweep_step: args.sweep_step,
        sweep_walks: args.sweep_walks,
    })
}

fn dispatch() -> Result<(), CliError> {
    configure_threads()?;
    match Cli::parse().command {
        Command::Run(args) => {
            let options = parse_run_args(args)?;
            run::run(&options)
        }
        Command::Synth(args) => run::run_synth(&SynthOptions {
            patterns: args.patterns,
            noise: args.noise,
            seed: args.seed,
            out: args.out,
            truth: args.truth,
        }),
    }
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("{}", error.message());
            ExitCode::from(error.exit_code())
        }
    }
}
