//! Command line front end for the consensus-observer toolkit.
//!
//! Four commands, each writing its outputs plus a `manifest.json` receipt
//! into a chosen directory:
//!
//! - `simulate` runs a JSON scenario and emits the trajectory CSV, a
//!   key=value metrics summary, and a gnuplot script over the CSV;
//! - `lemmas` samples the spectral product bounds and emits scatter CSVs
//!   with a violation summary;
//! - `check-geometry` evaluates the observable-form conditions for a
//!   bundled leader model;
//! - `gain` designs an observer gain for a model on a graph and reports
//!   the network spectrum and convergence certificate.
//!
//! Failures map to stable exit codes: 2 for configuration problems, 3 for
//! design or numerical failures, 4 for I/O trouble, and 5 for a run that
//! started cleanly but diverged mid-integration (the manifest still
//! records when and why).

mod commands;
mod config;

pub use commands::{
    cmd_check_geometry, cmd_gain, cmd_lemmas, cmd_simulate, geometry_params_from_file,
    GeometryParams, LemmaParams,
};
pub use config::{
    FollowerConfig, GainCmdConfig, GainConfig, GeometryConfig, GraphConfig, ModeConfig,
    ObserverInitConfig, ScenarioConfig, VectorInitConfig,
};

use std::fmt;

use serde::{Deserialize, Serialize};

/// Exit code for a run that parsed and started cleanly but diverged.
pub const EXIT_DIVERGED: i32 = 5;

/// What went wrong, bucketed by exit code.
#[derive(Debug)]
pub enum CliError {
    /// The request itself is wrong: unparseable JSON, unknown names, a bad
    /// or unreachable graph. Exit code 2.
    Config(String),
    /// The request is well formed but the math refused: gain design or
    /// certificate failure, failed geometry conditions. Exit code 3.
    Design(String),
    /// Filesystem trouble. Exit code 4.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Design(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Design(msg) => write!(f, "design error: {msg}"),
            CliError::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Receipt for one command run: what was asked, what came out, and whether
/// the run survived. The manifest is written last and lists itself, so on
/// success every listed file exists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Path of the config file, for the commands driven by one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_path: Option<String>,
    /// The fully resolved request. For `simulate` this re-parses as a
    /// [`ScenarioConfig`] that builds the identical scenario.
    pub config_echo: serde_json::Value,
    pub out_dir: String,
    /// File names relative to `out_dir`.
    pub files: Vec<String>,
    pub duration_seconds: f64,
    pub diverged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence_reason: Option<String>,
}
