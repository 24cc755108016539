//! finscale: corpus construction and scaling analysis for financial filings.
//!
//! Configuration precedence, lowest to highest: key-value config file,
//! `FINSCALE_*` environment variables, `--set key=value` overrides in the
//! order given, then the dedicated flags. Exit code 1 means the configuration
//! was rejected before any stage ran; 2 means a stage failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use finscale_cli::fixtures::{self, FixtureSpec};
use finscale_cli::pipeline;
use finscale_cli::RunConfig;

#[derive(Parser)]
#[command(name = "finscale", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Key-value config file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config key, repeatable: --set seed=7
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Where stage artifacts go.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Archive endpoint: an https base URL or a local directory.
    #[arg(long)]
    endpoint: Option<String>,
    /// Master seed; every stage derives its own from it.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Download filings into the fetch artifact.
    Fetch(RunArgs),
    /// Pull whitelisted sections out of fetched filings.
    Extract(RunArgs),
    /// Remove near-duplicate sections.
    Dedup(RunArgs),
    /// Tokenize and pack the surviving text into shards.
    Pack(RunArgs),
    /// Train the reference learners over the checkpoint schedule.
    Train(RunArgs),
    /// Fit scaling laws and run the drift and frontier analyses.
    Analyze(RunArgs),
    /// Render the report, the token-requirement table, and the plots.
    Report(RunArgs),
    /// Run every stage in order.
    All(RunArgs),
    /// Write a synthetic offline corpus and a config pointing at it.
    GenFixtures {
        /// Directory for the generated tree.
        #[arg(long, value_name = "DIR")]
        dir: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Seconds-scale corpus instead of the full desk-run size.
        #[arg(long)]
        smoke: bool,
    },
}

impl Command {
    fn stage(&self) -> Option<&'static str> {
        match self {
            Command::Fetch(_) => Some("fetch"),
            Command::Extract(_) => Some("extract"),
            Command::Dedup(_) => Some("dedup"),
            Command::Pack(_) => Some("pack"),
            Command::Train(_) => Some("train"),
            Command::Analyze(_) => Some("analyze"),
            Command::Report(_) | Command::All(_) => Some("report"),
            Command::GenFixtures { .. } => None,
        }
    }

    fn run_args(&self) -> Option<&RunArgs> {
        match self {
            Command::Fetch(a)
            | Command::Extract(a)
            | Command::Dedup(a)
            | Command::Pack(a)
            | Command::Train(a)
            | Command::Analyze(a)
            | Command::Report(a)
            | Command::All(a) => Some(a),
            Command::GenFixtures { .. } => None,
        }
    }
}

fn build_config(args: &RunArgs) -> finscale_core::Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    config.apply_env();
    for pair in &args.set {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            finscale_core::Error::Config(format!("--set needs key=value, got {pair:?}"))
        })?;
        config.set(key, value)?;
    }
    if let Some(out_dir) = &args.out_dir {
        config.out_dir = out_dir.clone();
    }
    if let Some(endpoint) = &args.endpoint {
        config.endpoint = endpoint.clone();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    if let Command::GenFixtures { dir, seed, smoke } = &cli.command {
        let spec = if *smoke {
            FixtureSpec::smoke(*seed)
        } else {
            FixtureSpec::desk(*seed)
        };
        return match fixtures::generate(dir, &spec) {
            Ok(config_path) => {
                println!("{}", config_path.display());
                ExitCode::SUCCESS
            }
            Err(err) => {
                eprintln!("fixture generation failed: {err}");
                ExitCode::from(2)
            }
        };
    }

    let args = cli.command.run_args().expect("stage commands carry args");
    let config = match build_config(args) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("config rejected: {err}");
            return ExitCode::from(1);
        }
    };

    let stage = cli.command.stage().expect("stage commands name a stage");
    match pipeline::run_through(&config, stage) {
        Ok(outcomes) => {
            for outcome in &outcomes {
                println!(
                    "{}: {}",
                    outcome.stage,
                    if outcome.skipped { "up to date" } else { "ran" }
                );
            }
            if stage == "report" {
                println!(
                    "report written to {}",
                    config.stage_dir("report").join("report.txt").display()
                );
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("run failed: {err:#}");
            ExitCode::from(2)
        }
    }
}
