//! `geobench`: generate data, run workloads, verify answers, and report.
//!
//! Exit codes: 0 success, 1 verification mismatch, 2 usage or config error,
//! 3 the benchmark could not run.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use commands::{CmdResult, Failure};
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "geobench", version, about = "Spatiotemporal moving-object store benchmark")]
struct Cli {
    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    /// Output directory; overrides the config and GEOBENCH_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for both data generation and the workload.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment configuration (YAML).
    #[arg(long, short)]
    config: PathBuf,
}

#[derive(Args)]
struct Against {
    /// Second system from another config file (its sut and workload sections).
    #[arg(long, conflicts_with_all = ["against_adapter", "against_profile", "against_connection"])]
    against_config: Option<PathBuf>,
    /// Second system: adapter id.
    #[arg(long)]
    against_adapter: Option<String>,
    /// Second system: configuration profile, e.g. rtree/space(4).
    #[arg(long)]
    against_profile: Option<String>,
    /// Second system: connection string.
    #[arg(long)]
    against_connection: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write instants.csv, trips.csv, features.geojson and stats.json.
    Generate(ConfigArg),
    /// Run the workload; writes results.csv, resources.csv, plan.json and summary.json.
    Run(ConfigArg),
    /// Run the same plan on two systems and compare every answer.
    Verify {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        against: Against,
    },
    /// Summarize results files; later inputs are compared with the first.
    Report {
        #[arg(required = true)]
        results: Vec<PathBuf>,
    },
    /// generate, run and report in one go.
    Bench(ConfigArg),
}

fn load(path: &Path, cli: &Cli) -> CmdResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).map_err(Failure::Usage)?;
    cfg.apply_overrides(cli.out.as_deref(), cli.seed);
    Ok(cfg)
}

fn against_config(cfg: &ExperimentConfig, against: &Against, cli: &Cli) -> CmdResult<ExperimentConfig> {
    if let Some(path) = &against.against_config {
        let other = load(path, cli)?;
        let mut merged = cfg.clone();
        merged.sut = other.sut;
        merged.workload = other.workload;
        return Ok(merged);
    }
    if against.against_adapter.is_none() && against.against_profile.is_none() {
        return Err(Failure::Usage(anyhow::anyhow!(
            "verify needs a second system: --against-config, --against-adapter or --against-profile"
        )));
    }
    let mut other = cfg.clone();
    if let Some(a) = &against.against_adapter {
        other.sut.adapter = a.clone();
        other.sut.connection = None;
    }
    if let Some(p) = &against.against_profile {
        other.sut.profile = p.clone();
    }
    if let Some(c) = &against.against_connection {
        other.sut.connection = Some(c.clone());
    }
    Ok(other)
}

fn dispatch(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Generate(c) => commands::cmd_generate(&load(&c.config, cli)?),
        Command::Run(c) => commands::cmd_run(&load(&c.config, cli)?).map(drop),
        Command::Verify { config, against } => {
            let cfg = load(&config.config, cli)?;
            let other = against_config(&cfg, against, cli)?;
            commands::cmd_verify(&cfg, &other)
        }
        Command::Report { results } => {
            let out = cli
                .out
                .clone()
                .or_else(|| std::env::var_os(config::OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            commands::cmd_report(results, &out)
        }
        Command::Bench(c) => commands::cmd_bench(&load(&c.config, cli)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            error!("{f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
