//! Sample times on `[0, T]`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Strictly increasing sample times starting at `t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

/// Manifest form: `samples` positive times up to `horizon`; `ratio = 1` is
/// uniform, `ratio < 1` geometric with `t_j = T·ratio^{samples−j}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGridSpec {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub samples: usize,
    #[serde(default = "one")]
    pub ratio: f64,
}

fn one() -> f64 {
    1.0
}

impl TimeGridSpec {
    pub fn build(&self) -> Result<TimeGrid> {
        if self.ratio == 1.0 {
            TimeGrid::uniform(self.horizon, self.samples)
        } else {
            TimeGrid::geometric(self.horizon, self.samples, self.ratio)
        }
    }
}

impl TimeGrid {
    pub fn uniform(horizon: f64, samples: usize) -> Result<Self> {
        check(horizon, samples)?;
        let h = horizon / samples as f64;
        let mut times: Vec<f64> = (0..=samples).map(|j| j as f64 * h).collect();
        times[samples] = horizon;
        Ok(TimeGrid { times })
    }

    pub fn geometric(horizon: f64, samples: usize, ratio: f64) -> Result<Self> {
        check(horizon, samples)?;
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(invalid("ratio", format!("must lie in (0, 1), got {ratio}")));
        }
        let mut times = vec![0.0];
        times.extend((1..=samples).map(|j| horizon * ratio.powi((samples - j) as i32)));
        Ok(TimeGrid { times })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.first() != Some(&0.0) {
            return Err(invalid("times", "must start at t = 0"));
        }
        if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(invalid("times", "must be finite and strictly increasing"));
        }
        Ok(TimeGrid { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        self.times.windows(2).map(|w| w[1] - w[0])
    }

    /// Every other sample, keeping `t = 0` and the end point when the
    /// number of steps is even.
    pub fn coarsen(&self) -> Option<TimeGrid> {
        let steps = self.len() - 1;
        if steps % 2 != 0 || steps < 2 {
            return None;
        }
        Some(TimeGrid {
            times: self.times.iter().step_by(2).copied().collect(),
        })
    }

    /// Index of the sample equal to `t`, within a relative tolerance.
    pub fn position(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * self.horizon().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// Uniform refinement by inserting midpoints.
    pub fn refine(&self) -> TimeGrid {
        let mut times = Vec::with_capacity(2 * self.len() - 1);
        for w in self.times.windows(2) {
            times.push(w[0]);
            times.push(0.5 * (w[0] + w[1]));
        }
        times.push(self.horizon());
        TimeGrid { times }
    }
}

fn check(horizon: f64, samples: usize) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid("T", format!("must be positive, got {horizon}")));
    }
    if samples == 0 {
        return Err(invalid("samples", "need at least one positive time"));
    }
    Ok(())
}

/// Cumulative trapezoid of `values` over `times`.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    assert_eq!(times.len(), values.len());
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    out.push(0.0);
    for j in 1..times.len() {
        acc += 0.5 * (times[j] - times[j - 1]) * (values[j] + values[j - 1]);
        out.push(acc);
    }
    out
}

pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    *cumulative_trapezoid(times, values).last().unwrap_or(&0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_grid_ends_at_horizon() {
        let g = TimeGrid::geometric(2.0, 5, 0.5).unwrap();
        assert_eq!(g.times(), &[0.0, 0.125, 0.25, 0.5, 1.0, 2.0]);
    }

    #[test]
    fn coarsen_and_refine_are_inverse() {
        let g = TimeGrid::uniform(1.0, 8).unwrap();
        assert_eq!(g.refine().coarsen().unwrap(), g);
        assert!(TimeGrid::uniform(1.0, 3).unwrap().coarsen().is_none());
    }

    #[test]
    fn trapezoid_is_exact_on_lines() {
        let g = TimeGrid::geometric(3.0, 7, 0.6).unwrap();
        let v: Vec<f64> = g.times().iter().map(|t| 2.0 * t + 1.0).collect();
        assert!((trapezoid(g.times(), &v) - 12.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(TimeGrid::uniform(0.0, 4).is_err());
        assert!(TimeGrid::geometric(1.0, 4, 1.5).is_err());
        assert!(TimeGrid::from_times(vec![0.0, 0.5, 0.5]).is_err());
    }
}
