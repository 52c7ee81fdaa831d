//! Run configuration: one JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Settings shared by all subcommands. Every field is optional in the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub epsilon: Option<f64>,
    pub g: Option<f64>,
    pub nu_minus: Option<f64>,
    pub nu_plus: Option<f64>,
    /// Newton tolerance.
    pub tol: Option<f64>,
    /// Sample spacing (solve, sweep), grid points (inner) or operator spacing (spectrum).
    pub grid: Option<f64>,
    pub max_iter: Option<usize>,
    /// Epsilon values of a sweep.
    pub epsilons: Option<Vec<f64>>,
    /// Corner interval and stable-side boundary data for the inner problem.
    pub a_minus: Option<f64>,
    pub a_plus: Option<f64>,
    pub x10: Option<f64>,
    pub x20: Option<f64>,
    /// Profile file consumed by spectrum and verify.
    pub profile: Option<PathBuf>,
}

/// Flags shared by every subcommand; they override the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonFlags {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created when its parent exists).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub g: Option<f64>,
    #[arg(long = "nu-minus")]
    pub nu_minus: Option<f64>,
    #[arg(long = "nu-plus")]
    pub nu_plus: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub grid: Option<f64>,
    /// Suppress the summary on standard output.
    #[arg(long)]
    pub quiet: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid configuration {}: {e}", path.display())))
    }

    /// Loads the file named by `--config` (if any) and applies the flag overrides.
    pub fn resolve(flags: &CommonFlags) -> Result<Self, CliError> {
        let mut cfg = match &flags.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        macro_rules! over {
            ($($f:ident),*) => {$(if flags.$f.is_some() { cfg.$f = flags.$f; })*};
        }
        over!(epsilon, g, nu_minus, nu_plus, tol, grid);
        Ok(cfg)
    }

    pub fn require_epsilon(&self) -> Result<f64, CliError> {
        self.epsilon
            .ok_or_else(|| CliError::Config("epsilon is required (--epsilon or config)".into()))
    }

    pub fn require_g(&self) -> Result<f64, CliError> {
        self.g.ok_or_else(|| CliError::Config("g is required (--g or config)".into()))
    }
}
