//! The heat semigroup `S(t)` as the spectral multiplier `e^{−|k|²t}`, its
//! weighted decay estimates, the Kato norm and initial-time diagnostics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::Fft3;
use crate::field::{Grid, GridField, Magnitudes, ScalarField, SpectralField};
use crate::lorentz::lorentz_quasinorm;
use crate::par;
use crate::report::VerifierReport;
use crate::testfn::SpaceTimeBump;
use crate::timegrid::{cumulative_trapezoid, TimeGrid};
use crate::trace::Trace;

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t", format!("must be nonnegative, got {t}")));
    }
    Ok(())
}

/// Applies `e^{−|k|²t}` to every mode.
pub fn heat_spectral(s: &SpectralField, t: f64) -> SpectralField {
    let mut out = s.clone();
    if t > 0.0 {
        let wn = s.grid().wavenumbers();
        out.apply_multiplier(|idx| (-wn.k2(idx) * t).exp());
    }
    out
}

pub fn heat_evolve(u0: &GridField, t: f64) -> Result<GridField> {
    check_time(t)?;
    u0.check_finite("heat_evolve input")?;
    if t == 0.0 {
        return Ok(u0.clone());
    }
    Ok(heat_spectral(&u0.to_spectral(), t).to_grid())
}

/// `V(t_j) = S(t_j) u₀` at every sample time.
pub fn heat_trace(u0: &GridField, times: &TimeGrid) -> Result<Trace> {
    u0.check_finite("heat_trace input")?;
    let hat = u0.to_spectral();
    let fields = times
        .times()
        .iter()
        .map(|&t| heat_spectral(&hat, t).to_grid())
        .collect();
    Trace::new(times.clone(), fields)
}

/// Weighted samples of `‖∂ₜᵐ∇ᵏ S(t)u₀‖_{L_r}` together with the weak-norm
/// boundedness ratios along the flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemigroupEstimateReport {
    pub r: f64,
    pub m: u32,
    pub k: u32,
    /// `(t, t^{m + k/2 + (3/2)(1/3 − 1/r)} ‖∂ₜᵐ∇ᵏS(t)u₀‖_{L_r})`.
    pub samples: Vec<(f64, f64)>,
    /// Largest sample over `‖u₀‖_{L^{3,∞}}`.
    pub sup_ratio: f64,
    /// `(t, ‖S(t)u₀‖_{L^{3,∞}} / ‖u₀‖_{L^{3,∞}})`.
    pub weak_ratios: Vec<(f64, f64)>,
    /// Largest weak-norm ratio, the fitted constant of the boundedness estimate.
    pub weak_constant: f64,
}

impl SemigroupEstimateReport {
    /// `max/min − 1` of the weighted samples within `[t_lo, t_hi]`.
    pub fn variation(&self, t_lo: f64, t_hi: f64) -> f64 {
        let vals: Vec<f64> = self
            .samples
            .iter()
            .filter(|(t, _)| *t >= t_lo && *t <= t_hi)
            .map(|s| s.1)
            .collect();
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        if max <= 0.0 {
            0.0
        } else {
            max / min - 1.0
        }
    }
}

pub fn semigroup_decay_report(
    u0: &GridField,
    r: f64,
    m: u32,
    k: u32,
    times: &[f64],
) -> Result<SemigroupEstimateReport> {
    if !(r > 3.0) {
        return Err(invalid("r", format!("must exceed 3, got {r}")));
    }
    if times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(invalid("times", "must be positive"));
    }
    u0.check_finite("semigroup_decay_report input")?;
    let grid = *u0.grid();
    let hat = u0.to_spectral();
    let weight = m as f64 + 0.5 * k as f64 + 1.5 * (1.0 / 3.0 - 1.0 / r);
    let base = lorentz_quasinorm(u0, 3.0, f64::INFINITY)?;
    let mut samples = Vec::with_capacity(times.len());
    let mut weak_ratios = Vec::with_capacity(times.len());
    for &t in times {
        let norm = derivative_norm(&grid, &hat, t, m, k, r);
        samples.push((t, t.powf(weight) * norm));
        let weak = if base > 0.0 {
            lorentz_quasinorm(&heat_spectral(&hat, t).to_grid(), 3.0, f64::INFINITY)? / base
        } else {
            0.0
        };
        weak_ratios.push((t, weak));
    }
    let top = samples.iter().fold(0.0_f64, |a, s| a.max(s.1));
    let sup_ratio = if base > 0.0 { top / base } else { 0.0 };
    let weak_constant = weak_ratios.iter().fold(0.0_f64, |a, s| a.max(s.1));
    Ok(SemigroupEstimateReport {
        r,
        m,
        k,
        samples,
        sup_ratio,
        weak_ratios,
        weak_constant,
    })
}

/// `‖∂ₜᵐ∇ᵏ S(t)u₀‖_{L_r}` with the tensor magnitude taken over all indices.
fn derivative_norm(grid: &Grid, hat: &SpectralField, t: f64, m: u32, k: u32, r: f64) -> f64 {
    let wn = grid.wavenumbers();
    let plan = Fft3::plan(grid.n());
    let mut sq = vec![0.0; grid.cells()];
    let multi = 3usize.pow(k);
    for comp in 0..3 {
        for code in 0..multi {
            let dirs: Vec<usize> = (0..k).map(|d| (code / 3usize.pow(d)) % 3).collect();
            let mut buf: Vec<Complex64> = par::map_range(grid.cells(), |idx| {
                let k2 = wn.k2(idx);
                let kv = wn.kvec(idx);
                let mut z = hat.coeffs()[comp][idx] * (-k2 * t).exp() * (-k2).powi(m as i32);
                for &d in &dirs {
                    z *= Complex64::new(0.0, kv[d]);
                }
                z
            });
            plan.inverse(&mut buf);
            for (s, z) in sq.iter_mut().zip(&buf) {
                *s += z.re * z.re;
            }
        }
    }
    let mag = ScalarField::new(*grid, sq.into_iter().map(f64::sqrt).collect())
        .expect("finite derivative samples");
    mag.lp_norm(r)
}

/// `max_{0<t_j≤T} t_j^{1/5}‖V(t_j)‖_{L₅}`.
pub fn kato_norm(trace: &Trace) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::Empty("kato_norm needs a non-empty trace".into()));
    }
    Ok(trace.kato_norm())
}

/// One row of the initial-time convergence diagnostic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub t: f64,
    /// `‖S(t)u₀ − u₀‖_{L_{q,unif}}` over the sampled ball centres (a lower bound on the full sup).
    pub lq_unif: f64,
    /// `‖S(t)u₀ − u₀‖_{L^{3,∞}}`.
    pub weak_gap: f64,
}

/// `L_{q,unif}` and weak-`L³` distance between `S(t)u₀` and `u₀` per time.
///
/// Ball centres are the grid points with indices divisible by `stride`;
/// balls have unit radius and wrap periodically, so the box must be longer than 2.
pub fn initial_convergence_check(
    u0: &GridField,
    q: f64,
    times: &[f64],
    stride: usize,
) -> Result<Vec<ConvergenceRow>> {
    if !(1.0..3.0).contains(&q) {
        return Err(invalid("q", format!("must lie in [1, 3), got {q}")));
    }
    if stride == 0 {
        return Err(invalid("stride", "must be positive"));
    }
    let grid = *u0.grid();
    if grid.length() <= 2.0 {
        return Err(Error::InvalidGrid("unit balls need a box longer than 2".into()));
    }
    let hat = u0.to_spectral();
    let ball_hat = unit_ball_spectrum(&grid);
    times
        .iter()
        .map(|&t| {
            check_time(t)?;
            let diff = &heat_spectral(&hat, t).to_grid() - u0;
            Ok(ConvergenceRow {
                t,
                lq_unif: lq_unif(&diff, q, stride, &ball_hat),
                weak_gap: lorentz_quasinorm(&diff, 3.0, f64::INFINITY)?,
            })
        })
        .collect()
}

fn unit_ball_spectrum(grid: &Grid) -> Vec<Complex64> {
    let dx = grid.dx();
    let mut buf: Vec<Complex64> = par::map_range(grid.cells(), |idx| {
        let (i, j, k) = grid.unravel(idx);
        let d = [grid.mode(i), grid.mode(j), grid.mode(k)].map(|m| m as f64 * dx);
        let inside = d.iter().map(|v| v * v).sum::<f64>() < 1.0;
        Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0)
    });
    Fft3::plan(grid.n()).forward(&mut buf);
    buf
}

/// Periodic unit-ball `L_q` norms at every centre via one convolution.
fn lq_unif(f: &GridField, q: f64, stride: usize, ball_hat: &[Complex64]) -> f64 {
    let grid = *f.grid();
    let plan = Fft3::plan(grid.n());
    let mut buf: Vec<Complex64> = par::map_range(grid.cells(), |i| Complex64::new(f.magnitude(i).powf(q), 0.0));
    plan.forward(&mut buf);
    for (z, b) in buf.iter_mut().zip(ball_hat) {
        *z *= b;
    }
    plan.inverse(&mut buf);
    let dv = grid.cell_volume();
    let best = par::max_range(grid.cells(), |idx| {
        let (i, j, k) = grid.unravel(idx);
        if i % stride == 0 && j % stride == 0 && k % stride == 0 {
            buf[idx].re.max(0.0)
        } else {
            0.0
        }
    });
    (best * dv).powf(1.0 / q)
}

/// `∬ S(t)u₀⁽ᵏ⁾ · φ dx dt` for each member, trapezoid on `times`.
pub fn weakstar_pairing_trace(
    sequence: &[GridField],
    phi: &SpaceTimeBump,
    times: &TimeGrid,
) -> Result<Vec<f64>> {
    let Some(first) = sequence.first() else {
        return Ok(Vec::new());
    };
    let grid = *first.grid();
    phi.check_support(&grid, times.horizon())?;
    let (ta, tb) = phi.time_support();
    let slices: Vec<(usize, Vec<f64>)> = times
        .times()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > ta && t < tb)
        .map(|(j, &t)| (j, phi.sample(&grid, t)))
        .collect();
    par::map_slice(sequence, |u0| {
        grid.check_same(u0.grid())?;
        let hat = u0.to_spectral();
        let mut values = vec![0.0; times.len()];
        for (j, slice) in &slices {
            let v = heat_spectral(&hat, times.times()[*j]).to_grid();
            values[*j] = pair_with_direction(&v, slice, phi.direction);
        }
        Ok(*cumulative_trapezoid(times.times(), &values).last().unwrap())
    })
    .into_iter()
    .collect()
}

/// `Σ (f · e) φ dx³`.
pub fn pair_with_direction(f: &GridField, phi: &[f64], dir: [f64; 3]) -> f64 {
    let dv = f.grid().cell_volume();
    dv * par::sum_range(f.grid().cells(), |i| {
        let v = f.at(i);
        (v[0] * dir[0] + v[1] * dir[1] + v[2] * dir[2]) * phi[i]
    })
}

/// `Σ |∇f|² dx³` from the spectral coefficients.
pub fn gradient_energy(hat: &SpectralField) -> f64 {
    let grid = hat.grid();
    let wn = grid.wavenumbers();
    let scale = grid.cell_volume() / grid.cells() as f64;
    let c = hat.coeffs();
    scale
        * par::sum_range(grid.cells(), |idx| {
            let kv = wn.kvec(idx);
            let kk = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
            kk * (c[0][idx].norm_sqr() + c[1][idx].norm_sqr() + c[2][idx].norm_sqr())
        })
}

/// `Σ |f|² dx³` from the spectral coefficients.
pub fn l2_energy(hat: &SpectralField) -> f64 {
    let grid = hat.grid();
    hat.energy() * grid.cell_volume() / grid.cells() as f64
}

/// Heat energy identity `‖V(t)‖² + 2∫₀ᵗ‖∇V‖² = ‖u₀‖²` at the end of `times`.
///
/// The tolerance is the trapezoid difference between the full grid and
/// every other sample. `u₀` should be free of Nyquist modes (any projected
/// field is), otherwise the discrete gradient misses their decay.
pub fn heat_energy_identity(u0: &GridField, times: &TimeGrid) -> Result<VerifierReport> {
    u0.check_finite("heat_energy_identity input")?;
    let hat = u0.to_spectral();
    let grads: Vec<f64> = times
        .times()
        .iter()
        .map(|&t| 2.0 * gradient_energy(&heat_spectral(&hat, t)))
        .collect();
    let fine = *cumulative_trapezoid(times.times(), &grads).last().unwrap();
    let tolerance = match times.coarsen() {
        Some(c) => {
            let coarse_vals: Vec<f64> = grads.iter().step_by(2).copied().collect();
            (fine - *cumulative_trapezoid(c.times(), &coarse_vals).last().unwrap()).abs()
        }
        None => fine.abs(),
    };
    let end = l2_energy(&heat_spectral(&hat, times.horizon()));
    let start = l2_energy(&hat);
    Ok(
        VerifierReport::equality("heat.energy_identity", end + fine, start, tolerance + 1e-12 * start)
            .with_param("T", times.horizon()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::leray_project;
    use std::f64::consts::PI;

    #[test]
    fn negative_time_rejected() {
        let g = Grid::new(8, 1.0).unwrap();
        assert!(heat_evolve(&GridField::zeros(g), -1.0).is_err());
    }

    #[test]
    fn single_mode_decays_exactly() {
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let f = GridField::from_fn(g, |[x, y, _]| [0.0, 0.0, (2.0 * x + y).cos()]).unwrap();
        let out = heat_evolve(&f, 0.3).unwrap();
        let expect = f.scale((-5.0_f64 * 0.3).exp());
        assert!((&out - &expect).max_abs() < 1e-14);
    }

    #[test]
    fn semigroup_law() {
        let g = Grid::new(16, 4.0).unwrap();
        let f = GridField::from_fn(g, |[x, y, z]| [(-(x * x + y * y)).exp(), z.sin(), 0.0]).unwrap();
        let a = heat_evolve(&heat_evolve(&f, 0.1).unwrap(), 0.2).unwrap();
        let b = heat_evolve(&f, 0.3).unwrap();
        assert!((&a - &b).max_abs() < 1e-12);
        assert!(b.lp_norm(2.0) <= f.lp_norm(2.0));
    }

    #[test]
    fn decay_exponent_rejected_at_three() {
        let g = Grid::new(8, 1.0).unwrap();
        assert!(semigroup_decay_report(&GridField::zeros(g), 3.0, 0, 0, &[0.1]).is_err());
        let z = semigroup_decay_report(&GridField::zeros(g), 5.0, 1, 1, &[0.1]).unwrap();
        assert!(z.samples.iter().all(|s| s.1 == 0.0));
    }

    #[test]
    fn time_derivative_matches_laplacian_of_mode() {
        // ∂ₜ S(t) of cos(x) is −e^{−t} cos(x); weight t^{1 + 3/2(1/3 − 1/r)}.
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let f = GridField::from_fn(g, |[x, _, _]| [0.0, x.cos(), 0.0]).unwrap();
        let t = 0.5;
        let rep = semigroup_decay_report(&f, 4.0, 1, 0, &[t]).unwrap();
        let direct = heat_evolve(&f, t).unwrap().lp_norm(4.0);
        let w = t.powf(1.0 + 1.5 * (1.0 / 3.0 - 0.25));
        assert!((rep.samples[0].1 - w * direct).abs() < 1e-12);
    }

    #[test]
    fn heat_energy_identity_on_projected_field() {
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let f = GridField::from_fn(g, |[x, y, z]| [y.sin() * z.cos(), (2.0 * x).cos(), (x + y).sin()]).unwrap();
        let f = leray_project(&f).unwrap();
        let times = TimeGrid::geometric(0.5, 40, 0.85).unwrap();
        let rep = heat_energy_identity(&f, &times).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn lq_unif_of_constant() {
        let g = Grid::new(16, 4.0).unwrap();
        let f = GridField::from_fn(g, |_| [1.0, 0.0, 0.0]).unwrap();
        let ball = unit_ball_spectrum(&g);
        let count = (ball[0].re).round();
        let v = lq_unif(&f, 2.0, 1, &ball);
        assert!((v - (count * g.cell_volume()).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn q_out_of_range_rejected() {
        let g = Grid::new(8, 4.0).unwrap();
        assert!(initial_convergence_check(&GridField::zeros(g), 3.0, &[0.1], 1).is_err());
        let rows = initial_convergence_check(&GridField::zeros(g), 2.0, &[0.1], 2).unwrap();
        assert_eq!(rows[0].lq_unif, 0.0);
    }
}
