//! `domainwall`: solve, sweep, corner-layer, spectral and verification runs.
//!
//! Exit status: 0 on success, 1 on configuration or input errors, 2 on
//! numerical failures (including failed verification checks).

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::CommonFlags;

#[derive(Debug, Parser)]
#[command(name = "domainwall", version, about = "Domain-wall connections between orthogonal roll systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the connection and write profile.csv, report.json and manifest.json.
    Solve(commands::SolveArgs),
    /// Solve over a list of epsilon values and fit the scaling exponents.
    Sweep(commands::SweepArgs),
    /// Solve the corner-layer problem by Picard iteration and write inner.csv.
    Inner(commands::InnerArgs),
    /// Kernel and spectral diagnostics of the linearisation about a profile.
    Spectrum(commands::ProfileArgs),
    /// Check tail rates, envelopes and monotonicity of a profile.
    Verify(commands::ProfileArgs),
}

/// Failure of a subcommand, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or input (exit 1).
    Config(String),
    /// Numerical failure (exit 2).
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<domainwall::Error> for CliError {
    fn from(e: domainwall::Error) -> Self {
        if e.is_input_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

/// Creates the output directory when its parent exists.
pub fn prepare_out(dir: &PathBuf) -> Result<(), CliError> {
    if dir.is_dir() {
        return Ok(());
    }
    std::fs::create_dir(dir)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", dir.display())))
}

fn common(cmd: &Command) -> &CommonFlags {
    match cmd {
        Command::Solve(a) => &a.common,
        Command::Sweep(a) => &a.common,
        Command::Inner(a) => &a.common,
        Command::Spectrum(a) | Command::Verify(a) => &a.common,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let invocation: Vec<String> = std::env::args().collect();
    let quiet = common(&cli.command).quiet;
    let result = match &cli.command {
        Command::Solve(a) => commands::solve(a, &invocation),
        Command::Sweep(a) => commands::sweep(a, &invocation),
        Command::Inner(a) => commands::inner(a, &invocation),
        Command::Spectrum(a) => commands::spectrum(a, &invocation),
        Command::Verify(a) => commands::verify(a, &invocation),
    };
    match result {
        Ok(summary) => {
            if !quiet {
                println!("{summary}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("domainwall: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
