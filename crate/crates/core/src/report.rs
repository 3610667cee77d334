//! Verdict records shared by every verifier, plus CSV emitters.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifierReport {
    pub inequality_id: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Smallest constant making the inequality hold, where one is fitted.
    pub fitted_constant: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl VerifierReport {
    /// `lhs ≤ rhs + tolerance`, failing on non-finite sides.
    pub fn inequality(id: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let pass = lhs.is_finite() && rhs.is_finite() && lhs <= rhs + tolerance;
        VerifierReport {
            inequality_id: id.into(),
            lhs,
            rhs,
            fitted_constant: None,
            tolerance,
            pass,
            params: BTreeMap::new(),
            note: None,
        }
    }

    /// `|lhs − rhs| ≤ tolerance`.
    pub fn equality(id: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let mut r = Self::inequality(id, lhs, rhs, tolerance);
        r.pass = r.pass && (lhs - rhs).abs() <= tolerance;
        r
    }

    pub fn residual(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.fitted_constant = Some(c);
        self
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_owned(), value);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn require(mut self, ok: bool) -> Self {
        self.pass &= ok;
        self
    }
}

/// `lhs / rhs`, with `0/0 = 0`.
pub fn fitted_ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

/// Writes reports as CSV: parameter columns (union, sorted) then the verdict columns.
pub fn write_reports_csv<W: Write>(out: W, reports: &[VerifierReport]) -> Result<()> {
    let mut keys: Vec<&String> = reports.iter().flat_map(|r| r.params.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = vec!["inequality_id".into()];
    header.extend(keys.iter().map(|k| k.to_string()));
    header.extend(
        ["lhs", "rhs", "residual", "fitted_constant", "tolerance", "pass", "note"]
            .map(String::from),
    );
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![r.inequality_id.clone()];
        row.extend(
            keys.iter()
                .map(|k| r.params.get(*k).map(|v| v.to_string()).unwrap_or_default()),
        );
        row.push(r.lhs.to_string());
        row.push(r.rhs.to_string());
        row.push(r.residual().to_string());
        row.push(r.fitted_constant.map(|c| c.to_string()).unwrap_or_default());
        row.push(r.tolerance.to_string());
        row.push(r.pass.to_string());
        row.push(r.note.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a `t, name₁, name₂, …` table.
pub fn write_trace_csv<W: Write>(out: W, names: &[&str], times: &[f64], columns: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t"];
    header.extend_from_slice(names);
    w.write_record(&header)?;
    for (j, t) in times.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(columns.iter().map(|c| c[j].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_sides_fail() {
        assert!(!VerifierReport::inequality("x", f64::NAN, 1.0, 0.0).pass);
        assert!(VerifierReport::inequality("x", 1.0, 1.0, 0.0).pass);
        assert!(!VerifierReport::equality("x", 0.0, 1.0, 0.5).pass);
    }

    #[test]
    fn csv_has_union_of_params() {
        let reports = vec![
            VerifierReport::inequality("a", 1.0, 2.0, 0.0).with_param("N", 1.0),
            VerifierReport::inequality("b", 1.0, 2.0, 0.0).with_param("t", 0.5),
        ];
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, &reports).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(first, "inequality_id,N,t,lhs,rhs,residual,fitted_constant,tolerance,pass,note");
        assert!(text.lines().nth(1).unwrap().starts_with("a,1,,1,2,1"));
    }

    #[test]
    fn json_uses_documented_keys() {
        let r = VerifierReport::inequality("id", 0.0, 1.0, 0.1).with_constant(0.5);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for k in ["inequality_id", "lhs", "rhs", "fitted_constant", "tolerance", "pass"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}
