use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use enpgf::config::{ExperimentConfig, Issue, Mode, REFERENCE};
use enpgf::experiment::{self, RunOptions};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "enpgf", version, about = "Ensemble Poisson-Gamma filter for Hawkes influence networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-node updates (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (default: config out_dir, else "out").
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a discrete Hawkes process.
    SimulateHawkes,
    /// Simulate the agent-based model.
    SimulateAbm,
    /// Bin and clean a timestamped event log.
    Aggregate,
    /// Run the filter on a counts CSV.
    Filter,
    /// Network and centrality reports from a filter snapshot.
    Analyze,
    /// Perfect-model scenarios.
    #[command(name = "experiment-1")]
    Experiment1,
    /// Agent-based data filtered with the Hawkes model.
    #[command(name = "experiment-2")]
    Experiment2,
    /// Scaled Frobenius error against the scenario scalars.
    Sweep,
    /// Check a configuration without running it.
    Validate {
        /// Print the documented reference configuration and exit.
        #[arg(long)]
        reference: bool,
        /// Mode to validate against when the file sets none.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
    },
}

impl Command {
    fn mode(&self) -> Option<Mode> {
        Some(match self {
            Command::SimulateHawkes => Mode::SimulateHawkes,
            Command::SimulateAbm => Mode::SimulateAbm,
            Command::Aggregate => Mode::Aggregate,
            Command::Filter => Mode::Filter,
            Command::Analyze => Mode::Analyze,
            Command::Experiment1 => Mode::Experiment1,
            Command::Experiment2 => Mode::Experiment2,
            Command::Sweep => Mode::Sweep,
            Command::Validate { .. } => return None,
        })
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = Mode::ALL.iter().map(|m| m.name()).collect();
        format!("unknown mode {s:?}; expected one of {}", names.join(", "))
    })
}

fn load(common: &Common) -> Result<ExperimentConfig, String> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    Ok(cfg)
}

fn print_issues(issues: &[Issue]) {
    for i in issues {
        eprintln!("error: {i}");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let common = &cli.common;

    if let Command::Validate { reference, mode } = cli.command {
        if reference {
            print!("{REFERENCE}");
            return ExitCode::SUCCESS;
        }
        if common.config.is_none() {
            eprintln!("error: validate needs --config");
            return ExitCode::from(EXIT_VALIDATION);
        }
        let mut cfg = match load(common) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_VALIDATION);
            }
        };
        if cfg.mode.is_none() {
            cfg.mode = mode;
        }
        let issues = cfg.validate();
        let report = serde_json::json!({ "valid": issues.is_empty(), "issues": issues });
        println!("{}", serde_json::to_string_pretty(&report).expect("json"));
        return if issues.is_empty() {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(EXIT_VALIDATION)
        };
    }

    let mode = cli.command.mode().expect("run subcommand");
    let mut cfg = match load(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    match cfg.mode {
        Some(m) if m != mode => {
            eprintln!("error: mode: config says {m} but the subcommand is {mode}");
            return ExitCode::from(EXIT_VALIDATION);
        }
        _ => cfg.mode = Some(mode),
    }
    let issues = cfg.validate();
    if !issues.is_empty() {
        print_issues(&issues);
        return ExitCode::from(EXIT_VALIDATION);
    }
    let out_dir = common
        .out_dir
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let opts = RunOptions {
        out_dir,
        workers: common.workers,
    };
    match experiment::run(&cfg, &opts) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_RUNTIME })
        }
    }
}
