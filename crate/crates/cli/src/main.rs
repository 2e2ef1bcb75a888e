use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use expint_cli::{emit_csv, run_study, verify, ReferenceCache, StudyConfig, StudyError};
use expint_core::Method;

#[derive(Parser)]
#[command(
    name = "bench",
    about = "Convergence and precision studies for exponential integrators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a study and write <prefix>.csv and <prefix>_orders.csv.
    Run {
        study: PathBuf,
        /// Output prefix (defaults to the study's `output` key).
        #[arg(long)]
        out: Option<String>,
        /// Override a study value, e.g. --set problem.n_elem=100.
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
        /// Print per-cell progress to stderr.
        #[arg(short, long)]
        verbose: bool,
    },
    /// List the available integrators.
    ListMethods,
    /// Run a study and evaluate its [verify] assertions.
    Verify {
        study: PathBuf,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
        #[arg(short, long)]
        verbose: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage_error { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("bench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<u8, StudyError> {
    match command {
        Command::ListMethods => {
            println!("{:<8} {:<12} order", "method", "family");
            for m in Method::ALL {
                println!(
                    "{:<8} {:<12} {}",
                    m.name(),
                    format!("{:?}", m.family()).to_lowercase(),
                    m.order()
                );
            }
            Ok(0)
        }
        Command::Run {
            study,
            out,
            set,
            verbose,
        } => {
            let cfg = StudyConfig::from_file(&study, &set)?;
            let report = run_study(&cfg, &ReferenceCache::from_env(), verbose)?;
            let prefix = out.unwrap_or_else(|| cfg.output.clone());
            let (rows, orders) = emit_csv(&report, &prefix).map_err(|e| {
                StudyError::Io(format!("cannot write output with prefix {prefix}: {e}"))
            })?;
            println!("wrote {} and {}", rows.display(), orders.display());
            Ok(0)
        }
        Command::Verify {
            study,
            set,
            verbose,
        } => {
            let cfg = StudyConfig::from_file(&study, &set)?;
            if cfg.verify.is_empty() {
                eprintln!("bench: {} has no [verify] assertions", study.display());
            }
            let report = run_study(&cfg, &ReferenceCache::from_env(), verbose)?;
            let checks = verify(&cfg, &report);
            for c in &checks {
                println!(
                    "{} {} ({})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.assertion,
                    c.detail
                );
            }
            Ok(if checks.iter().all(|c| c.passed) {
                0
            } else {
                3
            })
        }
    }
}
