//! `mlpcodes` — run decoding and compression experiments from the shell.
//!
//! Exit codes: 0 on success, 2 for invalid configuration, 3 when numerical
//! breakdowns reach the configured abort fraction, 1 for I/O failures.

mod output;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mlpcodes::experiment::{execute, Command};
use mlpcodes::Error;

use settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "mlpcodes", version = output::VERSION, about = "Multilayer-perceptron codes: decoding and compression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Mean overlap with the planted message against the code rate.
    EccSweep(Settings),
    /// Pairwise overlaps between restarts on fixed decoding instances.
    EccHist(Settings),
    /// Mean distortion against the code rate.
    LcSweep(Settings),
    /// Pairwise codeword overlaps between restarts on fixed sources.
    LcHist(Settings),
    /// Channel capacity and rate-distortion reference curves.
    Bounds(Settings),
}

impl Cmd {
    fn split(self) -> (Command, Settings) {
        match self {
            Self::EccSweep(s) => (Command::EccSweep, s),
            Self::EccHist(s) => (Command::EccHist, s),
            Self::LcSweep(s) => (Command::LcSweep, s),
            Self::LcHist(s) => (Command::LcHist, s),
            Self::Bounds(s) => (Command::Bounds, s),
        }
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_BREAKDOWN: u8 = 3;

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("mlpcodes: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let (command, flags) = Cli::parse().command.split();
    let settings = match &flags.config {
        Some(path) => match std::fs::read_to_string(path)
            .map_err(|e| format!("{}: {e}", path.display()))
            .and_then(|text| Settings::from_text(&text))
        {
            Ok(file) => flags.or(file),
            Err(e) => return fail(EXIT_CONFIG, e),
        },
        None => flags,
    };
    let cfg = match settings.resolve(command) {
        Ok(cfg) => cfg,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let report = match execute(&cfg) {
        Ok(r) => r,
        Err(e @ (Error::Config(_) | Error::Unattainable { .. } | Error::InvalidChannel { .. })) => {
            return fail(EXIT_CONFIG, e)
        }
        Err(e) => return fail(1, e),
    };
    match output::emit(&report, settings.out.as_deref()) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
        }
        Err(e) => return fail(1, e),
    }
    for reason in &report.aborts {
        eprintln!("aborted: {reason}");
    }
    if report.broke_down() {
        return fail(
            EXIT_BREAKDOWN,
            format!("{:.0}% of runs broke down", 100.0 * report.aborted_fraction),
        );
    }
    ExitCode::SUCCESS
}
