//! Experiment runner for the `weakns` laboratory.
//!
//! A run is described by one JSON [`manifest::RunManifest`]. [`run`] executes
//! the named experiment and writes its artifacts; [`compare`] aligns the
//! summaries of several runs of the same kind.

pub mod experiments;
pub mod manifest;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use experiments::Outcome;
pub use manifest::{Experiment, RunManifest};
pub use output::{compare, Summary};

/// Exit codes of the `weakns` binary.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILURE: i32 = 1;
pub const EXIT_RUN_FAILURE: i32 = 2;
pub const EXIT_INVALID_INPUT: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid input `{invariant}`: {message}")]
    Invalid { invariant: String, message: String },
    #[error("run failed: {0}")]
    Run(String),
}

impl RunError {
    pub fn invalid(invariant: impl Into<String>, message: impl Into<String>) -> Self {
        RunError::Invalid {
            invariant: invariant.into(),
            message: message.into(),
        }
    }

    pub fn invariant(&self) -> Option<&str> {
        match self {
            RunError::Invalid { invariant, .. } => Some(invariant),
            RunError::Run(_) => None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid { .. } => EXIT_INVALID_INPUT,
            RunError::Run(_) => EXIT_RUN_FAILURE,
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            error: &'a str,
            invariant: Option<&'a str>,
            message: String,
        }
        let (kind, message) = match self {
            RunError::Invalid { message, .. } => ("invalid_input", message.clone()),
            RunError::Run(m) => ("run_failure", m.clone()),
        };
        serde_json::to_string(&Body {
            error: kind,
            invariant: self.invariant(),
            message,
        })
        .expect("error body serializes")
    }
}

impl From<weakns::Error> for RunError {
    fn from(e: weakns::Error) -> Self {
        match &e {
            weakns::Error::InvalidParameter { name, .. } => RunError::invalid(*name, e.to_string()),
            weakns::Error::InvalidGrid(_) => RunError::invalid("grid", e.to_string()),
            weakns::Error::Support(_) => RunError::invalid("support", e.to_string()),
            _ => RunError::Run(e.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Run(e.to_string())
    }
}

/// Reads and validates a manifest file.
pub fn load_manifest(path: &Path) -> Result<RunManifest, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::invalid("manifest_path", format!("{}: {e}", path.display())))?;
    let m = RunManifest::from_json(&text)?;
    m.validate()?;
    Ok(m)
}

/// Result of [`run`]: the summary written to disk and the exit code it implies.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub summary: Summary,
    pub output_dir: PathBuf,
    pub exit_code: i32,
}

/// Executes the manifest's experiment and writes its artifacts.
///
/// `output_dir` overrides the manifest's directory. Artifacts are written
/// even when checks fail or the iteration does not contract.
pub fn run(manifest: &RunManifest, output_dir: Option<&Path>) -> Result<RunResult, RunError> {
    let grid = manifest.validate()?;
    let dir = output_dir.map(Path::to_path_buf).unwrap_or_else(|| manifest.output_dir.clone());
    output::prepare_dir(&dir)?;
    let start = Instant::now();
    let outcome = experiments::execute(manifest, grid)?;
    let wall = start.elapsed().as_secs_f64();
    let summary = Summary::new(manifest, &outcome);
    output::write_all(&dir, &summary, &outcome, wall)?;
    let exit_code = summary.exit_code();
    Ok(RunResult {
        summary,
        output_dir: dir,
        exit_code,
    })
}
