//! `fnls`: two-orbital NLS ground states, p-sweeps, escape probes and the validation suite.

mod commands;
mod error;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;
use crate::settings::{resolve, Settings};

#[derive(Debug, Parser)]
#[command(name = "fnls", version, about = "Two-orbital NLS ground states and their two-soliton structure")]
struct Cli {
    /// JSON file with solver settings; explicit flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for one exponent and write state, orbitals and fit
    Solve {
        #[command(flatten)]
        settings: Settings,
        /// Print the state record as JSON
        #[arg(long)]
        json: bool,
        /// Print the sweep-format CSV row
        #[arg(long, conflicts_with = "json")]
        csv: bool,
    },
    /// Solve over a range of exponents and regress the bump distance law
    Sweep {
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        p_min: f64,
        #[arg(long)]
        p_max: f64,
        #[arg(long)]
        steps: usize,
        /// Solve the points on worker threads
        #[arg(long)]
        parallel: bool,
        /// Warm-start each point from the previous one
        #[arg(long)]
        continuation: bool,
        /// Also write SVG charts
        #[arg(long)]
        svg: bool,
    },
    /// Check whether the bump distance follows the domain size
    Probe {
        #[command(flatten)]
        settings: Settings,
        /// Comma-separated half widths, ascending
        #[arg(long = "L-list", value_delimiter = ',')]
        l_list: Vec<f64>,
    },
    /// Run the built-in checks
    Validate {
        /// Skip the two-orbital solve
        #[arg(long)]
        quick: bool,
        #[arg(long, hide = true)]
        inject_sign_error: bool,
    },
    /// Re-fit the decomposition of a stored state file
    Fit {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Solve { settings, json, csv } => {
            commands::solve(&resolve(cfg, &settings)?, json, csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            settings,
            p_min,
            p_max,
            steps,
            parallel,
            continuation,
            svg,
        } => {
            let args = commands::SweepArgs {
                p_min,
                p_max,
                steps,
                parallel,
                continuation,
                svg,
            };
            let enough = commands::sweep(&resolve(cfg, &settings)?, &args)?;
            Ok(if enough { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Probe { settings, l_list } => {
            commands::probe(&resolve(cfg, &settings)?, &l_list)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate {
            quick,
            inject_sign_error,
        } => Ok(if commands::validate(quick, inject_sign_error) {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        }),
        Command::Fit { state, out_dir } => {
            let flags = Settings {
                out_dir,
                ..Default::default()
            };
            commands::refit(&state, &resolve(cfg, &flags)?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
