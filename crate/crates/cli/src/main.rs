use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use iwes_core::acceptance;
use iwes_core::harness::{run_experiment, ExperimentConfig};
use iwes_core::synth::{make_synthetic, SyntheticSpec};
use iwes_core::theory::{run_theory, InstanceSource, TheoryConfig};
use iwes_core::Error;

/// Importance-weighted subset selection experiments.
#[derive(Debug, Parser)]
#[command(name = "iwes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a multi-trial selection experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a synthetic dataset (and for thresholds-1d, its hypothesis class).
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the version-space checks on a finite instance.
    Theory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the acceptance suite.
    Verify {
        /// Keep experiment outputs here instead of a temporary directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated criterion numbers; all by default.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
    },
}

/// Exit codes: 0 success, 1 input error, 2 divergence or aggregate failure, 3 check failure.
#[derive(Debug)]
enum Failure {
    Checks(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Other(e.into())
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Divergence(_) | Error::AggregateFailure(_) | Error::PoolExhausted { .. } | Error::Internal(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, out, workers, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if workers.is_some() {
                cfg.workers = workers;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = run_experiment(&cfg, &out)?;
            for s in &report.selectors {
                if let Some(row) = s.final_row() {
                    let se = row.stderr.map(|v| format!(" +/- {v:.4}")).unwrap_or_default();
                    println!(
                        "{:<20} {} trials, final accuracy {:.4}{se} at {} examples",
                        s.name,
                        s.surviving_trials.len(),
                        row.mean,
                        row.selected
                    );
                }
            }
            println!("outputs written to {}", out.display());
            Ok(())
        }
        Command::Synth { config, out, seed } => {
            let spec: SyntheticSpec = read_json(&config)?;
            let files = make_synthetic(&spec, seed, &out)?;
            println!("{}", serde_json::to_string_pretty(&files).context("serializing file list")?);
            Ok(())
        }
        Command::Theory { config, out, seed } => {
            let mut cfg: TheoryConfig = read_json(&config)?;
            let base = config.parent().unwrap_or(Path::new("."));
            match &mut cfg.instance {
                InstanceSource::Table { path } | InstanceSource::Distribution { path } if path.is_relative() => {
                    *path = base.join(&*path);
                }
                _ => {}
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = run_theory(&cfg)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let path = out.join("theory_report.json");
            std::fs::write(&path, serde_json::to_string_pretty(&report).context("serializing report")?)
                .with_context(|| format!("writing {}", path.display()))?;
            let t1 = &report.retention;
            let t2 = &report.sampling_rate;
            println!(
                "h*={} L*={:.4} theta_S={:.4}",
                report.h_star, report.l_star, report.theta_s.value
            );
            println!(
                "retention: {}/{} eliminated (limit rate {:.3}); excess-risk violations {} ({} vacuous)",
                t1.eliminations, t1.trials, t1.rate_threshold, t1.bound_violations, t1.vacuous_trials
            );
            println!("sampling rate: {} of {} steps above the bound", t2.step_violations, t2.checked_steps);
            if let Some(t3) = &report.coefficient_inequality {
                println!("coefficient inequality: {}", t3.note);
            }
            println!("report written to {}", path.display());
            if report.passes() {
                Ok(())
            } else {
                Err(Failure::Checks("theory checks failed".into()))
            }
        }
        Command::Verify { out, criteria } => {
            let ids = if criteria.is_empty() { acceptance::ALL.to_vec() } else { criteria };
            let keep = out.is_some();
            let dir = out.unwrap_or_else(|| std::env::temp_dir().join(format!("iwes-verify-{}", std::process::id())));
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let mut outcomes = Vec::new();
            for id in ids {
                let o = acceptance::run_criterion(id, &dir);
                println!("{o}");
                outcomes.push(o);
            }
            std::fs::write(
                dir.join("acceptance.json"),
                serde_json::to_string_pretty(&outcomes).context("serializing outcomes")?,
            )
            .context("writing acceptance.json")?;
            if !keep {
                let _ = std::fs::remove_dir_all(&dir);
            }
            let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.to_string()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Checks(format!("criteria {} failed", failed.join(", "))))
            }
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Parse { path: path.display().to_string(), line: e.line() as u64, message: e.to_string() }.into()
    })
}
