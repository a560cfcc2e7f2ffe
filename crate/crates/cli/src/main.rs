use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use imopt::OTInstance;
use imopt_cli::compare::compare_sinkhorn;
use imopt_cli::runner::{cli_run, seed_from_env};
use imopt_cli::selftest::{criterion_count, run_criterion};
use imopt_cli::validate::{validate_named, VALIDATE_MODELS};

#[derive(Parser)]
#[command(name = "imopt", version, about = "First-order methods with inexact models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a solver described by a key=value config file.
    Run {
        /// Config file.
        config: PathBuf,
    },
    /// Compare plain and proximal Sinkhorn sweep counts on an OT instance.
    CompareSinkhorn {
        /// Instance file.
        instance: PathBuf,
        /// Target accuracy.
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        /// Comma-separated γ values for proximal Sinkhorn.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        gamma: Vec<f64>,
        /// Output CSV (stdout when absent).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Selftest {
        /// Run a single criterion.
        #[arg(long)]
        only: Option<usize>,
    },
    /// Sample a model zoo entry against its defining inequalities.
    ValidateModel {
        /// Model name.
        model: String,
        /// Samples per check.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Sampling seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn run(config: PathBuf) -> ExitCode {
    let seed = match seed_from_env() {
        Ok(s) => s,
        Err(e) => return fail(3, e),
    };
    match cli_run(&config, seed) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if out.written_to.is_none() {
                let _ = stdout.write_all(out.csv.as_bytes());
            }
            let _ = writeln!(stdout, "{}", out.summary);
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.exit_code() as u8, e),
    }
}

fn compare(instance: PathBuf, eps: f64, gamma: Vec<f64>, output: Option<PathBuf>) -> ExitCode {
    if gamma.is_empty() {
        return fail(3, "`--gamma` needs at least one value");
    }
    if !(eps > 0.0) || gamma.iter().any(|g| !(*g > 0.0)) {
        return fail(3, "`--eps` and `--gamma` values must be positive");
    }
    let inst = match OTInstance::read(&instance) {
        Ok(i) => i,
        Err(e) => return fail(3, e),
    };
    let table = match compare_sinkhorn(&inst, eps, &gamma) {
        Ok(t) => t,
        Err(e) => return fail(2, e),
    };
    let written = match &output {
        Some(path) => std::fs::File::create(path).and_then(|mut f| table.write_csv(&mut f)),
        None => table.write_csv(&mut std::io::stdout().lock()),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(2, e),
    }
}

fn selftest(only: Option<usize>) -> ExitCode {
    let ids: Vec<usize> = match only {
        Some(id) if (1..=criterion_count()).contains(&id) => vec![id],
        Some(id) => return fail(3, format!("no criterion {id} (1..={})", criterion_count())),
        None => (1..=criterion_count()).collect(),
    };
    let mut passed = true;
    for id in ids {
        let report = run_criterion(id);
        println!("{report}");
        passed &= report.passed;
    }
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn validate(model: &str, samples: usize, seed: u64) -> ExitCode {
    match validate_named(model, samples, seed) {
        Ok(report) => {
            println!("{report}");
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) if !VALIDATE_MODELS.contains(&model) => fail(3, e),
        Err(e) => fail(2, e),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config } => run(config),
        Command::CompareSinkhorn {
            instance,
            eps,
            gamma,
            output,
        } => compare(instance, eps, gamma, output),
        Command::Selftest { only } => selftest(only),
        Command::ValidateModel { model, samples, seed } => validate(&model, samples, seed),
    }
}
