use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use weakns::initdata::InitialDataSpec;
use weakns::lorentz::Thresholds;
use weakns::timegrid::TimeGridSpec;
use weakns::Grid;

use crate::RunError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Semigroup,
    Split,
    Kato,
    Energy,
    Scaling,
    Stability,
    KozonoYamazaki,
    All,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Semigroup => "semigroup",
            Experiment::Split => "split",
            Experiment::Kato => "kato",
            Experiment::Energy => "energy",
            Experiment::Scaling => "scaling",
            Experiment::Stability => "stability",
            Experiment::KozonoYamazaki => "kozono_yamazaki",
            Experiment::All => "all",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub grid: GridSpec,
    pub timegrid: TimeGridSpec,
    pub initial_data: InitialDataSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl RunManifest {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::invalid("manifest_syntax", e.to_string()))
    }

    /// Checks every documented range, naming the first violated invariant.
    pub fn validate(&self) -> Result<Grid, RunError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(RunError::invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        let n = self.grid.n;
        if n < 8 || n % 2 != 0 {
            return Err(RunError::invalid("grid.n", format!("must be even and at least 8, got {n}")));
        }
        if n > 512 {
            return Err(RunError::invalid("grid.n", format!("at most 512 supported, got {n}")));
        }
        let grid = Grid::new(n, self.grid.length).map_err(|e| RunError::invalid("grid.L", e.to_string()))?;
        let tg = &self.timegrid;
        if !(tg.horizon > 0.0 && tg.horizon.is_finite()) {
            return Err(RunError::invalid("timegrid.T", "must be positive and finite"));
        }
        if tg.samples < 2 {
            return Err(RunError::invalid("timegrid.samples", "need at least two samples"));
        }
        if !(tg.ratio > 0.0 && tg.ratio <= 1.0) {
            return Err(RunError::invalid("timegrid.ratio", "must lie in (0, 1]"));
        }
        self.thresholds
            .validate()
            .map_err(|e| RunError::invalid("thresholds", e.to_string()))?;
        if self.experiment == Experiment::Stability && !self.initial_data.is_sequence() {
            return Err(RunError::invalid(
                "initial_data.kind",
                "stability needs mollified_sequence or oscillatory_sequence",
            ));
        }
        Ok(grid)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn sha256(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("manifest serializes");
        hex::encode(Sha256::digest(canonical))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> &'static str {
        r#"{
            "schema_version": 1,
            "experiment": "kato",
            "grid": {"n": 16, "L": 4.0},
            "timegrid": {"T": 0.25, "samples": 8},
            "initial_data": {"kind": "zero"},
            "output_dir": "out"
        }"#
    }

    #[test]
    fn defaults_fill_in() {
        let m = RunManifest::from_json(sample()).unwrap();
        assert_eq!(m.timegrid.ratio, 1.0);
        assert_eq!(m.thresholds, Thresholds::default());
        assert_eq!(m.seed, 0);
        m.validate().unwrap();
    }

    #[test]
    fn odd_grid_names_the_invariant() {
        let m = RunManifest::from_json(&sample().replace("\"n\": 16", "\"n\": 15")).unwrap();
        let err = m.validate().unwrap_err();
        assert_eq!(err.invariant(), Some("grid.n"));
    }

    #[test]
    fn hash_is_stable() {
        let a = RunManifest::from_json(sample()).unwrap();
        let b = RunManifest::from_json(sample()).unwrap();
        assert_eq!(a.sha256(), b.sha256());
        let mut c = a.clone();
        c.seed = 1;
        assert_ne!(a.sha256(), c.sha256());
    }
}
