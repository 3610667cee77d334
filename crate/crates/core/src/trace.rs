//! Time-indexed sequences of fields on a common grid.

use crate::error::{Error, Result};
use crate::field::{Grid, GridField, Magnitudes};
use crate::timegrid::TimeGrid;

#[derive(Clone, Debug)]
pub struct Trace {
    times: TimeGrid,
    fields: Vec<GridField>,
}

impl Trace {
    pub fn new(times: TimeGrid, fields: Vec<GridField>) -> Result<Self> {
        if fields.len() != times.len() {
            return Err(Error::Misaligned(format!(
                "{} fields for {} sample times",
                fields.len(),
                times.len()
            )));
        }
        let grid = *fields[0].grid();
        for f in &fields {
            grid.check_same(f.grid())?;
            f.check_finite("trace sample")?;
        }
        Ok(Trace { times, fields })
    }

    /// Every sample equal to `f`.
    pub fn constant(times: TimeGrid, f: &GridField) -> Self {
        let fields = vec![f.clone(); times.len()];
        Trace { times, fields }
    }

    pub fn zeros(times: TimeGrid, grid: Grid) -> Self {
        Self::constant(times, &GridField::zeros(grid))
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn fields(&self) -> &[GridField] {
        &self.fields
    }

    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn check_aligned(&self, other: &Trace) -> Result<()> {
        if self.times != other.times {
            return Err(Error::Misaligned("traces use different time grids".into()));
        }
        self.grid().check_same(other.grid())
    }

    /// Samplewise sum.
    pub fn add(&self, other: &Trace) -> Result<Trace> {
        self.check_aligned(other)?;
        let fields = self.fields.iter().zip(&other.fields).map(|(a, b)| a + b).collect();
        Ok(Trace {
            times: self.times.clone(),
            fields,
        })
    }

    /// Keeps every other sample.
    pub fn coarsen(&self) -> Option<Trace> {
        let times = self.times.coarsen()?;
        let fields = self.fields.iter().step_by(2).cloned().collect();
        Some(Trace { times, fields })
    }

    /// `max_{t_j > 0} t_j^{1/5} ‖f(t_j)‖_5`.
    pub fn kato_norm(&self) -> f64 {
        kato_norm_samples(self.times.times(), &self.lp_series(5.0))
    }

    pub fn lp_series(&self, p: f64) -> Vec<f64> {
        self.fields.iter().map(|f| f.lp_norm(p)).collect()
    }
}

/// Kato norm from precomputed `L₅` norms.
pub fn kato_norm_samples(times: &[f64], l5: &[f64]) -> f64 {
    times
        .iter()
        .zip(l5)
        .filter(|(t, _)| **t > 0.0)
        .fold(0.0_f64, |m, (t, v)| m.max(t.powf(0.2) * v))
}
