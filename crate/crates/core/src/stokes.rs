//! Linear Stokes solves: Duhamel integration of `∂ₜu − Δu = −ℙ div F`,
//! spectral pressure recovery and the three-way pressure decomposition.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::field::{Grid, GridField, Magnitudes, ScalarField, SpectralField, Wavenumbers};
use crate::par;
use crate::timegrid::{trapezoid, TimeGrid};
use crate::trace::Trace;

/// A 3×3 tensor field, entry `(i, j)` stored at `3 * i + j`.
#[derive(Clone, Debug)]
pub struct ForcingTensor {
    grid: Grid,
    entries: [Vec<f64>; 9],
}

impl ForcingTensor {
    pub fn new(grid: Grid, entries: [Vec<f64>; 9]) -> Result<Self> {
        for e in &entries {
            if e.len() != grid.cells() {
                return Err(Error::GridMismatch("forcing entry has wrong length".into()));
            }
            if e.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "forcing tensor".into(),
                });
            }
        }
        Ok(ForcingTensor { grid, entries })
    }

    pub fn zeros(grid: Grid) -> Self {
        ForcingTensor {
            grid,
            entries: std::array::from_fn(|_| vec![0.0; grid.cells()]),
        }
    }

    /// `a ⊗ b`, entry `(i, j) = a_i b_j`.
    pub fn outer(a: &GridField, b: &GridField) -> Self {
        let grid = *a.grid();
        let entries = std::array::from_fn(|e| {
            let (i, j) = (e / 3, e % 3);
            a.component(i)
                .iter()
                .zip(b.component(j))
                .map(|(x, y)| x * y)
                .collect()
        });
        ForcingTensor { grid, entries }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.entries[3 * i + j]
    }

    pub fn add(&self, other: &ForcingTensor) -> ForcingTensor {
        let entries = std::array::from_fn(|e| {
            self.entries[e]
                .iter()
                .zip(&other.entries[e])
                .map(|(a, b)| a + b)
                .collect()
        });
        ForcingTensor {
            grid: self.grid,
            entries,
        }
    }

    fn spectral(&self) -> Vec<Vec<Complex64>> {
        let plan = Fft3::plan(self.grid.n());
        self.entries
            .iter()
            .map(|e| {
                let mut buf: Vec<Complex64> = e.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                plan.forward(&mut buf);
                buf
            })
            .collect()
    }
}

/// `(div F)_i = ∂_j F_ij` in spectral form.
fn divergence_hat(grid: &Grid, wn: &Wavenumbers, f_hat: &[Vec<Complex64>]) -> SpectralField {
    let coeffs = [0usize, 1, 2].map(|i| {
        par::map_range(grid.cells(), |idx| {
            let k = wn.kvec(idx);
            let s = k[0] * f_hat[3 * i][idx] + k[1] * f_hat[3 * i + 1][idx] + k[2] * f_hat[3 * i + 2][idx];
            Complex64::new(0.0, 1.0) * s
        })
    });
    SpectralField::from_coeffs(*grid, coeffs)
}

/// `−ℙ div F` in spectral form.
pub fn forcing_spectral(f: &ForcingTensor) -> SpectralField {
    let wn = f.grid.wavenumbers();
    let mut d = divergence_hat(&f.grid, &wn, &f.spectral());
    d.project();
    d.apply_multiplier(|_| -1.0);
    d
}

/// Dealiased Navier–Stokes nonlinearity `−P_D ℙ div(Tv ⊗ Tv)`, where `T`
/// truncates to the 2/3 band.
pub fn nonlinear_spectral(v_hat: &SpectralField) -> SpectralField {
    let mut tv = v_hat.clone();
    tv.dealias();
    nonlinear_band_limited(&tv.to_grid())
}

/// `−P_D ℙ div(w ⊗ w)` for a field `w` already truncated to the 2/3 band.
pub fn nonlinear_band_limited(w: &GridField) -> SpectralField {
    const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    let grid = *w.grid();
    let plan = Fft3::plan(grid.n());
    let hats: Vec<Vec<Complex64>> = PAIRS
        .iter()
        .map(|&(i, j)| {
            let mut buf: Vec<Complex64> = w
                .component(i)
                .iter()
                .zip(w.component(j))
                .map(|(a, b)| Complex64::new(a * b, 0.0))
                .collect();
            plan.forward(&mut buf);
            buf
        })
        .collect();
    let slot = |i: usize, j: usize| match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (1, 1) => 3,
        (1, 2) => 4,
        _ => 5,
    };
    let wn = grid.wavenumbers();
    let modes: Vec<[Complex64; 3]> = par::map_range(grid.cells(), |idx| {
        if !wn.kept(idx) || idx == 0 {
            return [Complex64::default(); 3];
        }
        let k = wn.kvec(idx);
        let div = [0, 1, 2].map(|i| {
            Complex64::new(0.0, 1.0)
                * (k[0] * hats[slot(i, 0)][idx] + k[1] * hats[slot(i, 1)][idx] + k[2] * hats[slot(i, 2)][idx])
        });
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        let kd = (k[0] * div[0] + k[1] * div[1] + k[2] * div[2]) / k2;
        [0, 1, 2].map(|i| -(div[i] - k[i] * kd))
    });
    let coeffs = [0, 1, 2].map(|c| modes.iter().map(|m| m[c]).collect());
    SpectralField::from_coeffs(grid, coeffs)
}

/// `φ₁(z) = (e^z − 1)/z` and `φ₂(z) = (e^z − 1 − z)/z²`.
#[inline]
pub fn phi12(z: f64) -> (f64, f64) {
    if z.abs() < 0.5 {
        // Σ zⁿ/(n+1)! and Σ zⁿ/(n+2)!.
        let mut term1 = 1.0;
        let mut term2 = 0.5;
        let (mut p1, mut p2) = (0.0, 0.0);
        for n in 0..18 {
            p1 += term1;
            p2 += term2;
            term1 *= z / (n as f64 + 2.0);
            term2 *= z / (n as f64 + 3.0);
        }
        (p1, p2)
    } else {
        let em1 = z.exp_m1();
        (em1 / z, (em1 - z) / (z * z))
    }
}

/// Exponential-trapezoid integrator for `û' = −|k|²û + N̂(t)`, `û(0) = 0`.
///
/// One step of size `h` is
/// `û₊ = e^{z}û + h(φ₁ − φ₂)N̂ + hφ₂N̂₊` with `z = −|k|²h`,
/// exact for forcing linear in time on each step.
pub struct DuhamelStepper {
    wn: Wavenumbers,
    state: SpectralField,
    forcing: SpectralField,
    time: f64,
}

impl DuhamelStepper {
    pub fn new(forcing_at_zero: SpectralField) -> Self {
        let grid = *forcing_at_zero.grid();
        DuhamelStepper {
            wn: grid.wavenumbers(),
            state: SpectralField::zeros(grid),
            forcing: forcing_at_zero,
            time: 0.0,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn state(&self) -> &SpectralField {
        &self.state
    }

    /// Advances to `time + h` given the forcing there.
    pub fn step(&mut self, h: f64, forcing_next: SpectralField) {
        let wn = &self.wn;
        let chunk = par::REDUCE_CHUNK;
        for c in 0..3 {
            let n0 = &self.forcing.coeffs()[c];
            let n1 = &forcing_next.coeffs()[c];
            par::for_each_chunk_mut(&mut self.state.coeffs_mut()[c], chunk, |ci, block| {
                let base = ci * chunk;
                for (o, u) in block.iter_mut().enumerate() {
                    let idx = base + o;
                    let z = -wn.k2(idx) * h;
                    let (p1, p2) = phi12(z);
                    *u = *u * z.exp() + h * (p1 - p2) * n0[idx] + h * p2 * n1[idx];
                }
            });
        }
        self.forcing = forcing_next;
        self.time += h;
    }
}

/// `u(t) = −∫₀ᵗ e^{(t−s)Δ} ℙ div F(s) ds` on `times`.
pub fn duhamel_solve(forcing: &[ForcingTensor], times: &TimeGrid) -> Result<Trace> {
    if forcing.len() != times.len() {
        return Err(Error::Misaligned(format!(
            "{} forcing samples for {} times",
            forcing.len(),
            times.len()
        )));
    }
    let grid = *forcing[0].grid();
    for f in forcing {
        grid.check_same(f.grid())?;
    }
    let mut stepper = DuhamelStepper::new(forcing_spectral(&forcing[0]));
    let mut fields = vec![GridField::zeros(grid)];
    for (j, h) in times.steps().enumerate() {
        stepper.step(h, forcing_spectral(&forcing[j + 1]));
        fields.push(stepper.state().to_grid());
    }
    Trace::new(times.clone(), fields)
}

/// Errors of [`duhamel_solve`] against `u*(x, t) = sin(ωt) sin(k x₁) e₂`, forced
/// by `F = b(t) cos(k x₁) e₂ ⊗ e₁` with `b = (ω cos ωt + k² sin ωt)/k`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ManufacturedStudy {
    pub steps: Vec<usize>,
    /// Sup-norm error at the horizon for each step count.
    pub errors: Vec<f64>,
    /// `log₂` of successive error ratios.
    pub orders: Vec<f64>,
    /// `log₂((u_h − u_{h/2}) / (u_{h/2} − u_{h/4}))` from the first three levels.
    pub richardson_order: f64,
    /// Largest `‖div u‖_∞` over every output sample.
    pub max_divergence: f64,
}

pub fn manufactured_study(grid: &Grid, mode: i64, omega: f64, horizon: f64, steps: &[usize]) -> Result<ManufacturedStudy> {
    if steps.len() < 3 || mode <= 0 || 2 * mode >= grid.n() as i64 {
        return Err(crate::error::invalid("manufactured", "need three step counts and 0 < mode < n/2"));
    }
    let k = 2.0 * std::f64::consts::PI * mode as f64 / grid.length();
    let shape = ScalarField::from_fn(*grid, |x| (k * x[0]).cos())?;
    let exact = GridField::from_fn(*grid, |x| [0.0, (omega * horizon).sin() * (k * x[0]).sin(), 0.0])?;
    let mut finals = Vec::new();
    let mut max_divergence = 0.0_f64;
    for &m in steps {
        let times = TimeGrid::uniform(horizon, m)?;
        let forcing: Vec<ForcingTensor> = times
            .times()
            .iter()
            .map(|&t| {
                let b = (omega * (omega * t).cos() + k * k * (omega * t).sin()) / k;
                let mut entries: [Vec<f64>; 9] = Default::default();
                for (e, slot) in entries.iter_mut().enumerate() {
                    *slot = if e == 3 {
                        shape.data().iter().map(|v| b * v).collect()
                    } else {
                        vec![0.0; grid.cells()]
                    };
                }
                ForcingTensor::new(*grid, entries)
            })
            .collect::<Result<_>>()?;
        let trace = duhamel_solve(&forcing, &times)?;
        for f in trace.fields() {
            max_divergence = max_divergence.max(crate::field::divergence_sup(f)?);
        }
        finals.push(trace.fields().last().unwrap().clone());
    }
    let errors: Vec<f64> = finals.iter().map(|f| (f - &exact).max_abs()).collect();
    let orders = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let d1 = (&finals[0] - &finals[1]).max_abs();
    let d2 = (&finals[1] - &finals[2]).max_abs();
    Ok(ManufacturedStudy {
        steps: steps.to_vec(),
        errors,
        orders,
        richardson_order: (d1 / d2).log2(),
        max_divergence,
    })
}

/// Pressure from a tensor: `q̂ = −k_i k_j F̂_ij / |k|²`, mean mode zero.
pub fn pressure_from_tensor(f: &ForcingTensor) -> ScalarField {
    let grid = f.grid;
    let wn = grid.wavenumbers();
    let f_hat = f.spectral();
    let q_hat = par::map_range(grid.cells(), |idx| {
        let k = wn.kvec(idx);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 == 0.0 {
            return Complex64::default();
        }
        let mut s = Complex64::default();
        for i in 0..3 {
            for j in 0..3 {
                s += k[i] * k[j] * f_hat[3 * i + j][idx];
            }
        }
        -s / k2
    });
    ScalarField::from_spectral(grid, q_hat)
}

/// `q = (−Δ)⁻¹ div div (v ⊗ v)`.
pub fn pressure_from_velocity(v: &GridField) -> Result<ScalarField> {
    v.check_finite("pressure_from_velocity input")?;
    Ok(pressure_from_tensor(&ForcingTensor::outer(v, v)))
}

/// Pressure matching [`nonlinear_spectral`]: built from `Tv ⊗ Tv` and truncated.
pub fn pressure_dealiased(v: &GridField) -> ScalarField {
    let mut hat = v.to_spectral();
    hat.dealias();
    let tv = hat.to_grid();
    let q = pressure_from_tensor(&ForcingTensor::outer(&tv, &tv));
    let grid = *v.grid();
    let wn = grid.wavenumbers();
    let mut q_hat = q.to_spectral();
    for (idx, z) in q_hat.iter_mut().enumerate() {
        if !wn.kept(idx) {
            *z = Complex64::default();
        }
    }
    ScalarField::from_spectral(grid, q_hat)
}

/// Exponent tags `(s_i, l_i)` of the three pressure pieces.
pub const PRESSURE_EXPONENTS: [(f64, f64); 3] = [(9.0 / 8.0, 1.5), (11.0 / 7.0, 11.0 / 7.0), (1.25, 1.5)];

/// Pressure pieces forced by `u⊗u`, `V⊗V` and `V⊗u + u⊗V`.
#[derive(Clone, Debug)]
pub struct PressureDecomposition {
    pub times: TimeGrid,
    pub p1: Vec<ScalarField>,
    pub p2: Vec<ScalarField>,
    pub p3: Vec<ScalarField>,
    /// `‖∇p_i‖_{L_{s_i,l_i}(Q_T)}`, space exponent `s_i`, time exponent `l_i`.
    pub gradient_norms: [f64; 3],
    /// `max_j ‖q − p₁ − p₂ − p₃‖_∞` with `q` recovered from `v ⊗ v`.
    pub sum_defect: f64,
}

pub fn pressure_decompose(u: &Trace, v_heat: &Trace) -> Result<PressureDecomposition> {
    u.check_aligned(v_heat)?;
    let mut p = [Vec::new(), Vec::new(), Vec::new()];
    let mut grad_series = [Vec::new(), Vec::new(), Vec::new()];
    let mut sum_defect = 0.0_f64;
    for (uf, vf) in u.fields().iter().zip(v_heat.fields()) {
        let cross = ForcingTensor::outer(vf, uf).add(&ForcingTensor::outer(uf, vf));
        let pieces = [
            pressure_from_tensor(&ForcingTensor::outer(uf, uf)),
            pressure_from_tensor(&ForcingTensor::outer(vf, vf)),
            pressure_from_tensor(&cross),
        ];
        let v = uf + vf;
        let q = pressure_from_tensor(&ForcingTensor::outer(&v, &v));
        let defect = par::max_range(q.data().len(), |i| {
            (q.data()[i] - pieces[0].data()[i] - pieces[1].data()[i] - pieces[2].data()[i]).abs()
        });
        sum_defect = sum_defect.max(defect);
        for (i, piece) in pieces.into_iter().enumerate() {
            let (s, _) = PRESSURE_EXPONENTS[i];
            grad_series[i].push(crate::field::scalar_gradient(&piece).lp_norm(s));
            p[i].push(piece);
        }
    }
    let times = u.times().clone();
    let gradient_norms = std::array::from_fn(|i| {
        let l = PRESSURE_EXPONENTS[i].1;
        let vals: Vec<f64> = grad_series[i].iter().map(|v| v.powf(l)).collect();
        trapezoid(times.times(), &vals).powf(1.0 / l)
    });
    let [p1, p2, p3] = p;
    Ok(PressureDecomposition {
        times,
        p1,
        p2,
        p3,
        gradient_norms,
        sum_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{divergence_sup, leray_project};
    use std::f64::consts::PI;

    #[test]
    fn phi_functions_are_continuous_across_the_switch() {
        for z in [-0.49999, -0.50001, 0.49999, 0.50001] {
            let (a, b) = phi12(z);
            let em1 = f64::exp_m1(z);
            assert!((a - em1 / z).abs() < 1e-14);
            assert!((b - (em1 - z) / (z * z)).abs() < 1e-12);
        }
        assert_eq!(phi12(0.0), (1.0, 0.5));
    }

    #[test]
    fn zero_and_constant_forcing_give_zero() {
        let g = Grid::new(8, 1.0).unwrap();
        let times = TimeGrid::uniform(1.0, 4).unwrap();
        let zero = vec![ForcingTensor::zeros(g); 5];
        let u = duhamel_solve(&zero, &times).unwrap();
        assert!(u.fields().iter().all(|f| f.max_abs() == 0.0));
        let mut c = ForcingTensor::zeros(g);
        c.entries[1] = vec![2.5; g.cells()];
        let u = duhamel_solve(&vec![c; 5], &times).unwrap();
        assert!(u.fields().iter().all(|f| f.max_abs() < 1e-14));
    }

    #[test]
    fn constant_forcing_single_mode_is_exact() {
        // F₁₂ = cos(y): −div F = (sin y, 0, 0); u₁ = (1 − e^{−t}) sin y.
        let g = Grid::new(8, 2.0 * PI).unwrap();
        let mut f = ForcingTensor::zeros(g);
        f.entries[1] = (0..g.cells()).map(|i| g.point(i)[1].cos()).collect();
        let times = TimeGrid::uniform(1.0, 3).unwrap();
        let u = duhamel_solve(&vec![f; 4], &times).unwrap();
        let last = &u.fields()[3];
        for i in 0..g.cells() {
            let y = g.point(i)[1];
            assert!((last.component(0)[i] - (1.0 - (-1.0_f64).exp()) * y.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn pressure_of_band_limited_field_matches_projector() {
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let v = leray_project(
            &GridField::from_fn(g, |[x, y, z]| [y.sin() + z.cos(), (x + z).cos(), x.sin() * y.cos()]).unwrap(),
        )
        .unwrap();
        let q = pressure_from_velocity(&v).unwrap();
        let grad_q = crate::field::scalar_gradient(&q);
        let f = ForcingTensor::outer(&v, &v);
        let wn = g.wavenumbers();
        let div = divergence_hat(&g, &wn, &f.spectral());
        let mut solenoidal = div.clone();
        solenoidal.project();
        let potential = &div.to_grid() - &solenoidal.to_grid();
        let err = (&grad_q + &potential).max_abs();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn two_dimensional_mode_pressure() {
        // v = (sin x cos y, −cos x sin y, 0): q = (cos 2x + cos 2y)/4.
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let v = GridField::from_fn(g, |[x, y, _]| [x.sin() * y.cos(), -x.cos() * y.sin(), 0.0]).unwrap();
        let q = pressure_from_velocity(&v).unwrap();
        for i in 0..g.cells() {
            let [x, y, _] = g.point(i);
            let exact = ((2.0 * x).cos() + (2.0 * y).cos()) / 4.0;
            assert!((q.data()[i] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn nonlinear_output_is_divergence_free() {
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let v = leray_project(
            &GridField::from_fn(g, |[x, y, z]| [(2.0 * y).sin(), z.cos() * x.sin(), y.cos()]).unwrap(),
        )
        .unwrap();
        let n = nonlinear_spectral(&v.to_spectral()).to_grid();
        assert!(divergence_sup(&n).unwrap() < 1e-12);
    }

    #[test]
    fn manufactured_mode_converges_at_second_order() {
        let g = Grid::new(8, 2.0 * std::f64::consts::PI).unwrap();
        let st = manufactured_study(&g, 1, 3.0, 1.0, &[16, 32, 64]).unwrap();
        assert!(st.orders.iter().all(|&p| (1.8..=2.2).contains(&p)), "{st:?}");
        assert!((1.8..=2.2).contains(&st.richardson_order));
        assert!(st.max_divergence < 1e-12);
    }

    #[test]
    fn misaligned_forcing_rejected() {
        let g = Grid::new(8, 1.0).unwrap();
        let times = TimeGrid::uniform(1.0, 4).unwrap();
        assert!(duhamel_solve(&vec![ForcingTensor::zeros(g); 3], &times).is_err());
    }
}
