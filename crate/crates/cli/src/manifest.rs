//! Run manifests recording what was computed and from which configuration.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

/// Record of one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub config: RunConfig,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

pub fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl RunManifest {
    pub fn new(command: &[String], config: &RunConfig, started: f64) -> Self {
        Self {
            tool: "domainwall",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_vec(),
            config: config.clone(),
            started,
            finished: started,
            outputs: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    /// Adds `manifest.json` to the outputs and writes it into `dir`.
    pub fn write(mut self, dir: &Path, summary: serde_json::Value) -> Result<(), CliError> {
        self.finished = now();
        self.summary = summary;
        self.outputs.push("manifest.json".into());
        write_json(&dir.join("manifest.json"), &self)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("cannot serialise {}: {e}", path.display())))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}
