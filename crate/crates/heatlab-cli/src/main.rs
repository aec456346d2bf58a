//! Deterministic experiment driver.
//!
//! `validate` checks a config file and prints diagnostics; `run` validates
//! everything first, then executes each entry, writes its artifacts, and
//! prints one summary line per check; `report` re-prints a finished
//! directory's summary from its `checks.json`.
//!
//! Exit codes: 0 when no check FAILed, 1 when one did or a numerical
//! routine gave up at runtime, 2 for an invalid configuration. Identical
//! config and seeds produce byte-identical artifacts; batch entries run in
//! parallel but each writes only into its own output directory, and
//! summary lines always print in config order.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heatlab::Error;

mod config;
mod run;

use config::Experiment;
use run::{Check, Status};

/// Environment variable naming the root that relative output directories
/// are joined onto. The only environment the driver ever consults.
const OUTPUT_ROOT_VAR: &str = "HEATLAB_OUTPUT_ROOT";

#[derive(Parser)]
#[command(
    name = "heatlab",
    version,
    about = "Numerical laboratory driver: spectra, thick sets, spectral inequalities, heat control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and semantically check a config file without running it.
    Validate {
        /// JSON config: one experiment object or {"experiments": [...]}.
        config: PathBuf,
    },
    /// Validate, then run every experiment and write artifacts.
    Run {
        /// JSON config: one experiment object or {"experiments": [...]}.
        config: PathBuf,
    },
    /// Re-print the check summary of a finished experiment directory.
    Report {
        /// Directory a previous `run` wrote (contains checks.json).
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { config } => cmd_validate(&config),
        Command::Run { config } => cmd_run(&config),
        Command::Report { dir } => cmd_report(&dir),
    };
    ExitCode::from(code)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Domain(_) => 2,
        _ => 1,
    }
}

fn output_root() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from)
}

/// Load the config and validate every entry before anything runs,
/// printing warnings and errors as they surface. Errors out with the
/// process exit code.
fn load_and_validate(path: &Path) -> Result<Vec<Experiment>, u8> {
    let experiments = match config::load(path) {
        Ok(experiments) => experiments,
        Err(e) => {
            eprintln!("error: {e}");
            return Err(exit_code(&e));
        }
    };
    if let Err(e) = config::check_distinct_outputs(&experiments, output_root().as_deref()) {
        eprintln!("error: {e}");
        return Err(exit_code(&e));
    }
    let mut invalid = false;
    for exp in &experiments {
        match exp.validate() {
            Ok(warnings) => {
                for w in warnings {
                    eprintln!("warning: {}: {w}", exp.label());
                }
            }
            Err(e) => {
                eprintln!("error: {}: {e}", exp.label());
                invalid = true;
            }
        }
    }
    if invalid {
        Err(2)
    } else {
        Ok(experiments)
    }
}

fn cmd_validate(path: &Path) -> u8 {
    match load_and_validate(path) {
        Ok(experiments) => {
            let root = output_root();
            for exp in &experiments {
                println!(
                    "ok: {} ({}) -> {}",
                    exp.label(),
                    exp.kind,
                    exp.resolved_output(root.as_deref()).display()
                );
            }
            0
        }
        Err(code) => code,
    }
}

fn cmd_run(path: &Path) -> u8 {
    let experiments = match load_and_validate(path) {
        Ok(experiments) => experiments,
        Err(code) => return code,
    };
    let root = output_root();

    // Entries are independent and write into disjoint directories, so a
    // batch runs them in parallel; output stays in config order.
    let outcomes: Vec<heatlab::Result<Vec<Check>>> = if experiments.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = experiments
                .iter()
                .map(|exp| {
                    let dir = exp.resolved_output(root.as_deref());
                    scope.spawn(move || run::run_experiment(exp, &dir))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("experiment worker panicked"))
                .collect()
        })
    } else {
        experiments
            .iter()
            .map(|exp| run::run_experiment(exp, &exp.resolved_output(root.as_deref())))
            .collect()
    };

    let batch = experiments.len() > 1;
    let mut code: u8 = 0;
    for (exp, outcome) in experiments.iter().zip(&outcomes) {
        let prefix = if batch { format!("{}/", exp.label()) } else { String::new() };
        match outcome {
            Ok(checks) => {
                for c in checks {
                    println!("{}", run::render(&prefix, c));
                    if c.status == Status::Fail {
                        code = code.max(1);
                    }
                }
            }
            Err(e) => {
                eprintln!("error: {}: {e}", exp.label());
                code = code.max(exit_code(e));
            }
        }
    }
    code
}

fn cmd_report(dir: &Path) -> u8 {
    match run::read_checks(dir) {
        Ok(checks) => {
            let mut code = 0;
            for c in &checks {
                println!("{}", run::render("", c));
                if c.status == Status::Fail {
                    code = 1;
                }
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
