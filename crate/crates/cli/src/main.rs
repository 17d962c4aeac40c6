use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use offpac_core::harness::{self, CertifyOptions, Execution, RunConfig};
use offpac_core::Error;

#[derive(Parser)]
#[command(name = "offpac", version, about = "Tabular off-policy actor-critic experiments on the chain domain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed and write metrics CSV plus a summary JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `seeds`, e.g. `0..29` (inclusive) or `1,4,9`.
        #[arg(long)]
        seeds: Option<String>,
        /// Directory receiving the output files.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run seeds one after another instead of in parallel.
        #[arg(long)]
        serial: bool,
    },
    /// Repeat `run` over several regularizer decay exponents.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        eps_lambda: Vec<f64>,
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Second-half window averages of the squared gradient norm.
    Report {
        #[arg(long)]
        metrics: PathBuf,
    },
    /// Contraction certificate and mixing estimate at theta_0 and checkpoints.
    Certify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 4)]
        checkpoints: u64,
        #[arg(long, default_value_t = 200)]
        probes: usize,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::InvalidParameter(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn load_config(path: &Path, seeds: Option<&str>, out: Option<&Path>) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(path).map_err(|e| match e {
        Error::Io(io) => Failure::Config(format!("{}: {io}", path.display())),
        other => Failure::Config(format!("{}: {other}", path.display())),
    })?;
    if let Some(s) = seeds {
        cfg.seeds = harness::parse_seeds(s).map_err(|m| Failure::Config(format!("--seeds: {m}")))?;
    }
    if let Some(dir) = out {
        let name = cfg.output_path.file_name().map(PathBuf::from).unwrap_or_else(|| "metrics.csv".into());
        cfg.output_path = dir.join(name);
    }
    Ok(cfg)
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, seeds, out, serial } => {
            let cfg = load_config(&config, seeds.as_deref(), out.as_deref())?;
            let execution = if serial { Execution::Serial } else { Execution::Parallel };
            let result = harness::run_experiment_with(&cfg, execution)?;
            println!("{}", to_json(&result.summary)?);
            if !result.summary.aborted.is_empty() {
                return Err(Failure::Runtime(format!("{} run(s) aborted", result.summary.aborted.len())));
            }
        }
        Command::Sweep { config, eps_lambda, seeds, out } => {
            let cfg = load_config(&config, seeds.as_deref(), out.as_deref())?;
            let result = harness::sweep(&cfg, &eps_lambda, Execution::Parallel)?;
            print!("{}", result.to_table());
            if let Some(spread) = result.spread {
                println!("spread,{spread}");
            }
            let aborted: usize = result.rows.iter().map(|r| r.aborted).sum();
            if aborted > 0 {
                return Err(Failure::Runtime(format!("{aborted} run(s) aborted")));
            }
        }
        Command::Report { metrics } => {
            let rows = harness::read_metrics(&metrics)?;
            println!("{}", to_json(&harness::stationarity_report(&rows)?)?);
        }
        Command::Certify { config, checkpoints, probes } => {
            let cfg = load_config(&config, None, None)?;
            let opts = CertifyOptions { checkpoints, probes, ..CertifyOptions::default() };
            println!("{}", to_json(&harness::certify(&cfg, &opts)?)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
