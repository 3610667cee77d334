//! Smooth compactly supported test functions with closed-form derivatives.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::Grid;

/// `b(s) = exp(1 − 1/(1 − s²))` on `|s| < 1`, normalized to `b(0) = 1`.
#[inline]
fn bump(s: f64) -> f64 {
    let w = 1.0 - s * s;
    if w <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / w).exp()
    }
}

/// `b'(s)/s`, finite at `s = 0`.
#[inline]
fn bump_d1_over_s(s: f64) -> f64 {
    let w = 1.0 - s * s;
    if w <= 0.0 {
        0.0
    } else {
        -2.0 * bump(s) / (w * w)
    }
}

#[inline]
fn bump_d2(s: f64) -> f64 {
    let w = 1.0 - s * s;
    if w <= 0.0 {
        return 0.0;
    }
    let g1 = -2.0 * s / (w * w);
    let g2 = -2.0 / (w * w) - 8.0 * s * s / (w * w * w);
    bump(s) * (g1 * g1 + g2)
}

/// `φ(x, t) = A b(|x − c|/ρ) b((t − t_c)/τ)`, supported in `B(c, ρ) × (t_c − τ, t_c + τ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeBump {
    pub center: [f64; 3],
    pub radius: f64,
    pub t_center: f64,
    pub t_half_width: f64,
    pub amplitude: f64,
    /// Direction used when the bump tests a vector field.
    pub direction: [f64; 3],
}

impl SpaceTimeBump {
    pub fn new(center: [f64; 3], radius: f64, t_window: (f64, f64), amplitude: f64) -> Result<Self> {
        let (ta, tb) = t_window;
        if !(radius > 0.0 && tb > ta && amplitude >= 0.0) {
            return Err(invalid("test function", "need radius > 0, t_b > t_a, amplitude ≥ 0"));
        }
        Ok(SpaceTimeBump {
            center,
            radius,
            t_center: 0.5 * (ta + tb),
            t_half_width: 0.5 * (tb - ta),
            amplitude,
            direction: [1.0, 0.0, 0.0],
        })
    }

    pub fn with_direction(mut self, d: [f64; 3]) -> Self {
        self.direction = d;
        self
    }

    pub fn time_support(&self) -> (f64, f64) {
        (self.t_center - self.t_half_width, self.t_center + self.t_half_width)
    }

    /// Rejects support touching the box faces or the time interval ends.
    pub fn check_support(&self, grid: &Grid, t_end: f64) -> Result<()> {
        let half = 0.5 * grid.length();
        if self.center.iter().any(|c| c.abs() + self.radius >= half) {
            return Err(Error::Support(format!(
                "spatial support {:?}±{} reaches the box face at ±{half}",
                self.center, self.radius
            )));
        }
        let (ta, tb) = self.time_support();
        if !(ta > 0.0 && tb < t_end) {
            return Err(Error::Support(format!(
                "time support [{ta}, {tb}] must lie strictly inside (0, {t_end})"
            )));
        }
        Ok(())
    }

    fn time_factor(&self, t: f64) -> (f64, f64) {
        let s = (t - self.t_center) / self.t_half_width;
        (bump(s), bump_d1_over_s(s) * s / self.t_half_width)
    }

    fn rel(&self, x: [f64; 3]) -> ([f64; 3], f64) {
        let d = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        let s = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() / self.radius;
        (d, s)
    }

    pub fn space_value(&self, x: [f64; 3]) -> f64 {
        self.amplitude * bump(self.rel(x).1)
    }

    pub fn value(&self, x: [f64; 3], t: f64) -> f64 {
        self.space_value(x) * self.time_factor(t).0
    }

    pub fn dt(&self, x: [f64; 3], t: f64) -> f64 {
        self.space_value(x) * self.time_factor(t).1
    }

    pub fn gradient(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let (d, s) = self.rel(x);
        let c = self.amplitude * bump_d1_over_s(s) / (self.radius * self.radius) * self.time_factor(t).0;
        [c * d[0], c * d[1], c * d[2]]
    }

    pub fn laplacian(&self, x: [f64; 3], t: f64) -> f64 {
        let s = self.rel(x).1;
        self.amplitude * (bump_d2(s) + 2.0 * bump_d1_over_s(s)) / (self.radius * self.radius)
            * self.time_factor(t).0
    }

    /// Spatial slice `φ(·, t)` sampled on the grid.
    pub fn sample(&self, grid: &Grid, t: f64) -> Vec<f64> {
        let tf = self.time_factor(t).0;
        crate::par::map_range(grid.cells(), |i| self.space_value(grid.point(i)) * tf)
    }
}

/// Draws `count` admissible bumps for the box of `grid` and the interval `(0, t_end)`.
pub fn random_admissible(grid: &Grid, t_end: f64, count: usize, seed: u64) -> Vec<SpaceTimeBump> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 * grid.length();
    (0..count)
        .map(|_| {
            let radius = rng.gen_range(0.15..0.35) * half;
            let reach = half - radius - 2.0 * grid.dx();
            let center = [0, 1, 2].map(|_| rng.gen_range(-reach..reach) * 0.9);
            let ta = rng.gen_range(0.05..0.4) * t_end;
            let tb = rng.gen_range(0.6..0.95) * t_end;
            let mut dir = [0, 1, 2].map(|_| rng.gen_range(-1.0..1.0));
            let norm = dir.iter().map(|v: &f64| v * v).sum::<f64>().sqrt().max(1e-3);
            dir.iter_mut().for_each(|v| *v /= norm);
            SpaceTimeBump::new(center, radius, (ta, tb), rng.gen_range(0.5..2.0))
                .expect("valid by construction")
                .with_direction(dir)
        })
        .collect()
}

/// Radial cutoff: 1 on `B(R)`, 0 outside `B(2R)`, smooth in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialCutoff {
    pub radius: f64,
}

impl RadialCutoff {
    /// Smooth step `h(u)` from 1 at `u ≤ 0` to 0 at `u ≥ 1`.
    fn step(u: f64) -> f64 {
        if u <= 0.0 {
            1.0
        } else if u >= 1.0 {
            0.0
        } else {
            let a = (-1.0 / u).exp();
            let b = (-1.0 / (1.0 - u)).exp();
            b / (a + b)
        }
    }

    fn step_d1(u: f64) -> f64 {
        if u <= 0.0 || u >= 1.0 {
            return 0.0;
        }
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        let da = a / (u * u);
        let db = -b / ((1.0 - u) * (1.0 - u));
        (db * (a + b) - b * (da + db)) / ((a + b) * (a + b))
    }

    pub fn value(&self, x: [f64; 3]) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        Self::step(r / self.radius - 1.0)
    }

    pub fn gradient(&self, x: [f64; 3]) -> [f64; 3] {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r == 0.0 {
            return [0.0; 3];
        }
        let c = Self::step_d1(r / self.radius - 1.0) / (self.radius * r);
        [c * x[0], c * x[1], c * x[2]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe() -> SpaceTimeBump {
        SpaceTimeBump::new([0.1, -0.2, 0.05], 0.7, (0.2, 0.8), 1.3).unwrap()
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = probe();
        let x = [0.3, -0.05, 0.2];
        let t = 0.43;
        let h = 1e-5;
        let fd_t = (f.value(x, t + h) - f.value(x, t - h)) / (2.0 * h);
        assert!((fd_t - f.dt(x, t)).abs() < 1e-6);
        let g = f.gradient(x, t);
        let mut lap = 0.0;
        for a in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            let fd = (f.value(xp, t) - f.value(xm, t)) / (2.0 * h);
            assert!((fd - g[a]).abs() < 1e-6, "axis {a}");
            let h2 = 1e-4;
            xp[a] = x[a] + h2;
            xm[a] = x[a] - h2;
            lap += (f.value(xp, t) - 2.0 * f.value(x, t) + f.value(xm, t)) / (h2 * h2);
        }
        assert!((lap - f.laplacian(x, t)).abs() < 1e-4, "{lap} vs {}", f.laplacian(x, t));
    }

    #[test]
    fn laplacian_is_finite_at_center() {
        let f = probe();
        let l = f.laplacian(f.center, 0.5);
        assert!(l.is_finite());
        assert!((l - f.amplitude * -6.0 / 0.49).abs() < 1e-12);
    }

    #[test]
    fn vanishes_outside_support() {
        let f = probe();
        assert_eq!(f.value([2.0, 0.0, 0.0], 0.5), 0.0);
        assert_eq!(f.value(f.center, 0.9), 0.0);
    }

    #[test]
    fn random_bumps_are_admissible() {
        let g = Grid::new(32, 6.0).unwrap();
        for b in random_admissible(&g, 1.0, 20, 7) {
            b.check_support(&g, 1.0).unwrap();
            assert!(b.value(b.center, b.t_center) > 0.0);
        }
    }

    #[test]
    fn cutoff_profile() {
        let c = RadialCutoff { radius: 1.0 };
        assert_eq!(c.value([0.5, 0.0, 0.0]), 1.0);
        assert_eq!(c.value([2.5, 0.0, 0.0]), 0.0);
        let x = [1.3, 0.2, -0.1];
        let h = 1e-6;
        let fd = (c.value([x[0] + h, x[1], x[2]]) - c.value([x[0] - h, x[1], x[2]])) / (2.0 * h);
        assert!((fd - c.gradient(x)[0]).abs() < 1e-6);
    }
}
