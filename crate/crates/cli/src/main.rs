// SPDX-License-Identifier: MIT OR Apache-2.0

//! `boundedcp`: change-point analysis of bounded count series from the
//! command line.

#![forbid(unsafe_code)]

mod commands;
mod report;
mod series_io;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use commands::Command;
use report::EXIT_USAGE;

#[derive(Debug, Parser)]
#[command(name = "boundedcp", version, about = "Change-point analysis for bounded count time series (BAR(1))")]
struct Cli {
    /// Worker threads for Monte Carlo work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            Cli::command().error(clap::error::ErrorKind::InvalidValue, "--threads must be ≥ 1").exit();
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
