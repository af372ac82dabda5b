//! `qwfs`: seeded ensemble runs, sweeps and diagnostics from JSON configs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ConfigArgs;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "qwfs", version, about = "Wavefront shaping of photon pairs through random media")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "QWFS_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one ensemble and write its rows plus a JSON summary.
    Run(ConfigArgs),
    /// Tabulate mean η/N for every configuration and model.
    Summary(ConfigArgs),
    /// Sweep the degree of control.
    SweepDoc(ConfigArgs),
    /// Sweep the number of modes.
    SweepN(ConfigArgs),
    /// Dump a realization's transmission matrix.
    GenMatrix(commands::GenMatrixArgs),
    /// Mirror-plane phases, cluster score and transmission excess of one detection-shaping run.
    Diagnose(ConfigArgs),
}

fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    let Some(t) = threads else { return Ok(()) };
    if t == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(t)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure {t} threads: {e}")))
}

fn dispatch(cli: Cli) -> CliResult<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Run(a) => commands::run(a),
        Command::Summary(a) => commands::summary(a),
        Command::SweepDoc(a) => commands::sweep_doc_cmd(a),
        Command::SweepN(a) => commands::sweep_n_cmd(a),
        Command::GenMatrix(a) => commands::gen_matrix(a),
        Command::Diagnose(a) => commands::diagnose(a),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors and 0 on --help/--version
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
