//! Summary records, artifact layout and the cross-run comparison table.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use weakns::report::write_reports_csv;
use weakns::snapshot::{write_atomic, write_snapshot};

use crate::experiments::{Outcome, Plot};
use crate::manifest::RunManifest;
use crate::{RunError, EXIT_CHECK_FAILURE, EXIT_PASS, EXIT_RUN_FAILURE};

/// Contents of `summary.json`. Wall time goes to `timing.json` so that the
/// summary of a repeated run is byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub manifest_sha256: String,
    pub status: String,
    pub pass_count: usize,
    pub fail_count: usize,
    pub flags: Vec<String>,
    pub fitted_constants: BTreeMap<String, f64>,
}

impl Summary {
    pub fn new(manifest: &RunManifest, outcome: &Outcome) -> Self {
        let reports = outcome.families.iter().flat_map(|(_, r)| r);
        let (mut pass_count, mut fail_count) = (0, 0);
        let mut fitted_constants = BTreeMap::new();
        for r in reports {
            if r.pass {
                pass_count += 1;
            } else {
                fail_count += 1;
            }
            if let Some(c) = r.fitted_constant.filter(|c| c.is_finite()) {
                insert_unique(&mut fitted_constants, r.inequality_id.clone(), c);
            }
        }
        for (k, &v) in &outcome.constants {
            if v.is_finite() {
                insert_unique(&mut fitted_constants, k.clone(), v);
            }
        }
        let status = if outcome.run_failed {
            "run_failure"
        } else if fail_count > 0 {
            "check_failure"
        } else {
            "pass"
        };
        Summary {
            experiment: manifest.experiment.name().to_string(),
            manifest_sha256: manifest.sha256(),
            status: status.to_string(),
            pass_count,
            fail_count,
            flags: outcome.flags.clone(),
            fitted_constants,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.status.as_str() {
            "run_failure" => EXIT_RUN_FAILURE,
            "check_failure" => EXIT_CHECK_FAILURE,
            _ => EXIT_PASS,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Repeated ids get `#2`, `#3`, … in report order, so keys line up across runs.
fn insert_unique(map: &mut BTreeMap<String, f64>, key: String, value: f64) {
    if let std::collections::btree_map::Entry::Vacant(e) = map.entry(key.clone()) {
        e.insert(value);
        return;
    }
    let mut i = 2;
    while map.contains_key(&format!("{key}#{i}")) {
        i += 1;
    }
    map.insert(format!("{key}#{i}"), value);
}

pub(crate) fn prepare_dir(dir: &Path) -> Result<(), RunError> {
    for sub in ["", "reports", "plots", "snapshots"] {
        let d = dir.join(sub);
        fs::create_dir_all(&d)
            .map_err(|e| RunError::invalid("output_dir", format!("{}: {e}", d.display())))?;
    }
    let probe = dir.join(".write_probe");
    fs::write(&probe, b"")
        .and_then(|_| fs::remove_file(&probe))
        .map_err(|e| RunError::invalid("output_dir", format!("{} is not writable: {e}", dir.display())))?;
    Ok(())
}

pub(crate) fn write_all(dir: &Path, summary: &Summary, outcome: &Outcome, wall: f64) -> Result<(), RunError> {
    for (family, reports) in &outcome.families {
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, reports)?;
        write_atomic(&dir.join("reports").join(format!("{family}.csv")), &buf)?;
    }
    for plot in &outcome.plots {
        write_atomic(&dir.join("plots").join(format!("{}.csv", plot.name)), &plot_csv(plot)?)?;
    }
    for (name, field, t) in &outcome.snapshots {
        write_snapshot(&dir.join("snapshots").join(name), field, *t)?;
    }
    let timing = serde_json::json!({ "wall_time_s": wall });
    write_atomic(&dir.join("timing.json"), format!("{timing}\n").as_bytes())?;
    write_atomic(&dir.join("summary.json"), summary.to_json().as_bytes())?;
    Ok(())
}

fn plot_csv(plot: &Plot) -> Result<Vec<u8>, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![plot.x_name.as_str()];
    header.extend(plot.columns.iter().map(|(n, _)| n.as_str()));
    w.write_record(&header).map_err(csv_err)?;
    for (j, x) in plot.x.iter().enumerate() {
        let mut row = vec![x.to_string()];
        row.extend(plot.columns.iter().map(|(_, c)| c.get(j).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| RunError::Run(e.to_string()))
}

fn csv_err(e: csv::Error) -> RunError {
    RunError::Run(e.to_string())
}

/// Reads a `summary.json`, or the one inside a run directory.
pub fn read_summary(path: &Path) -> Result<Summary, RunError> {
    let file: PathBuf = if path.is_dir() { path.join("summary.json") } else { path.to_path_buf() };
    let text = fs::read_to_string(&file)
        .map_err(|e| RunError::invalid("summary_path", format!("{}: {e}", file.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| RunError::invalid("summary_syntax", format!("{}: {e}", file.display())))
}

/// One row per summary, one column per fitted constant seen in any of them.
pub fn compare(paths: &[PathBuf]) -> Result<String, RunError> {
    if paths.len() < 2 {
        return Err(RunError::invalid("paths", "compare needs at least two summaries"));
    }
    let summaries: Vec<Summary> = paths.iter().map(|p| read_summary(p)).collect::<Result<_, _>>()?;
    let kind = &summaries[0].experiment;
    if let Some(other) = summaries.iter().find(|s| &s.experiment != kind) {
        return Err(RunError::invalid(
            "experiment",
            format!("mismatched experiment kinds: {kind} and {}", other.experiment),
        ));
    }
    let keys: BTreeSet<&String> = summaries.iter().flat_map(|s| s.fitted_constants.keys()).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["run", "experiment", "manifest_sha256", "status", "pass_count", "fail_count"]
        .map(String::from)
        .to_vec();
    header.extend(keys.iter().map(|k| k.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for (p, s) in paths.iter().zip(&summaries) {
        let mut row = vec![
            p.display().to_string(),
            s.experiment.clone(),
            s.manifest_sha256.clone(),
            s.status.clone(),
            s.pass_count.to_string(),
            s.fail_count.to_string(),
        ];
        row.extend(
            keys.iter()
                .map(|k| s.fitted_constants.get(*k).map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| RunError::Run(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
