//! `cqs`: run one named experiment, write its artifacts, print a summary line.

mod config;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{ConfigError, ExperimentConfig, Params};
use experiments::RunError;

#[derive(Parser, Debug)]
#[command(name = "cqs", about = "Run a named simulation experiment and write CSV artifacts")]
struct Args {
    /// Experiment name; `--experiment list` prints the choices.
    #[arg(long)]
    experiment: Option<String>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts (default: cqs-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parameter override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

enum Failure {
    Usage(String),
    Metric,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn experiment_list() -> String {
    format!("available experiments: {}", experiments::names().join(", "))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("CQS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Failure::Usage(format!("CQS_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Usage(e.to_string()))
}

fn run(args: Args) -> Result<(), Failure> {
    configure_threads()?;
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for (i, s) in args.set.iter().enumerate() {
        cfg.set(i + 1, s)?;
    }
    if let Some(name) = args.experiment {
        cfg.experiment = Some(name);
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    let out = args.out.or_else(|| cfg.out.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("cqs-out"));

    let name = cfg.experiment.clone().ok_or_else(|| Failure::Usage(format!("no experiment given; {}", experiment_list())))?;
    if name == "list" {
        println!("{}", experiments::names().join("\n"));
        return Ok(());
    }
    let exp = experiments::find(&name).ok_or_else(|| Failure::Usage(format!("unknown experiment `{name}`; {}", experiment_list())))?;
    let params = Params::new(&cfg, exp.name, exp.keys)?;
    let outcome = (exp.run)(&params)?;

    std::fs::create_dir_all(&out).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
    for (file, contents) in &outcome.artifacts {
        let path = out.join(file);
        std::fs::write(&path, contents).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    let verdict = if outcome.pass { "PASS" } else { "FAIL" };
    println!("{}: {verdict} {}={}", exp.name, outcome.metric, experiments::F(outcome.value));
    if outcome.pass {
        Ok(())
    } else {
        Err(Failure::Metric)
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Metric) => ExitCode::from(2),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
