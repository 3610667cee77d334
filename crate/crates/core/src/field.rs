//! Periodic-box discretization of vector fields on ℝ³.
//!
//! The box is `[-L/2, L/2)³` sampled at `n` points per axis, so the origin is
//! the grid point with index `(n/2, n/2, n/2)`. Spectral coefficients follow the
//! convention of [`crate::fft`]: forward unnormalized, inverse scaled by `1/n³`.

use std::f64::consts::PI;
use std::ops::{Add, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::Fft3;
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n must be even and at least 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive and finite, got {length}"
            )));
        }
        Ok(Grid { n, length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(3)
    }

    /// Number of cells, `n³`.
    pub fn cells(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.dx()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx % n, (idx / n) % n, idx / (n * n))
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.unravel(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Signed mode number in `[-n/2, n/2)`.
    pub fn mode(&self, m: usize) -> i64 {
        let half = self.n / 2;
        if m < half {
            m as i64
        } else {
            m as i64 - self.n as i64
        }
    }

    pub fn is_nyquist(&self, m: usize) -> bool {
        m == self.n / 2
    }

    /// Largest retained mode under the 2/3 dealiasing rule.
    pub fn dealias_cutoff(&self) -> i64 {
        ((self.n - 1) / 3) as i64
    }

    pub fn wavenumbers(&self) -> Wavenumbers {
        Wavenumbers::new(self)
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "n={} L={} vs n={} L={}",
                self.n, self.length, other.n, other.length
            )));
        }
        Ok(())
    }
}

/// Per-axis wavenumber tables for spectral operators.
#[derive(Clone, Debug)]
pub struct Wavenumbers {
    n: usize,
    /// Folded wavenumbers `2π m / L`, Nyquist at `-π/dx`.
    pub k: Vec<f64>,
    /// Derivative wavenumbers: as `k` with the Nyquist entry zeroed.
    pub kd: Vec<f64>,
    pub nyquist: Vec<bool>,
    pub keep: Vec<bool>,
}

impl Wavenumbers {
    fn new(grid: &Grid) -> Self {
        let n = grid.n;
        let base = 2.0 * PI / grid.length;
        let cutoff = grid.dealias_cutoff();
        let k: Vec<f64> = (0..n).map(|m| base * grid.mode(m) as f64).collect();
        let nyquist: Vec<bool> = (0..n).map(|m| grid.is_nyquist(m)).collect();
        let kd = k
            .iter()
            .zip(&nyquist)
            .map(|(&v, &ny)| if ny { 0.0 } else { v })
            .collect();
        let keep = (0..n).map(|m| grid.mode(m).abs() <= cutoff).collect();
        Wavenumbers {
            n,
            k,
            kd,
            nyquist,
            keep,
        }
    }

    #[inline]
    pub fn axes(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx % n, (idx / n) % n, idx / (n * n))
    }

    /// `|k|²` of the flat mode index.
    #[inline]
    pub fn k2(&self, idx: usize) -> f64 {
        let (a, b, c) = self.axes(idx);
        self.k[a] * self.k[a] + self.k[b] * self.k[b] + self.k[c] * self.k[c]
    }

    /// Derivative wavevector of the flat mode index.
    #[inline]
    pub fn kvec(&self, idx: usize) -> [f64; 3] {
        let (a, b, c) = self.axes(idx);
        [self.kd[a], self.kd[b], self.kd[c]]
    }

    #[inline]
    pub fn has_nyquist(&self, idx: usize) -> bool {
        let (a, b, c) = self.axes(idx);
        self.nyquist[a] || self.nyquist[b] || self.nyquist[c]
    }

    #[inline]
    pub fn kept(&self, idx: usize) -> bool {
        let (a, b, c) = self.axes(idx);
        self.keep[a] && self.keep[b] && self.keep[c]
    }
}

/// Anything with a per-cell magnitude: scalar or vector fields.
pub trait Magnitudes {
    fn grid(&self) -> &Grid;
    fn magnitude(&self, idx: usize) -> f64;

    fn magnitudes(&self) -> Vec<f64>
    where
        Self: Sync,
    {
        par::map_range(self.grid().cells(), |i| self.magnitude(i))
    }

    fn max_abs(&self) -> f64
    where
        Self: Sync,
    {
        par::max_range(self.grid().cells(), |i| self.magnitude(i))
    }

    /// Grid `L_p` norm `(Σ |f|^p dx³)^{1/p}`; `p = ∞` gives the sup norm.
    fn lp_norm(&self, p: f64) -> f64
    where
        Self: Sync,
    {
        if p.is_infinite() {
            return self.max_abs();
        }
        let dv = self.grid().cell_volume();
        let sum = par::sum_range(self.grid().cells(), |i| self.magnitude(i).powf(p));
        (sum * dv).powf(1.0 / p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.cells() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.cells(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "scalar field".into(),
            });
        }
        Ok(ScalarField { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            data: vec![0.0; grid.cells()],
        }
    }

    pub fn from_fn<F>(grid: Grid, f: F) -> Result<Self>
    where
        F: Fn([f64; 3]) -> f64 + Sync + Send,
    {
        let data = par::map_range(grid.cells(), |i| f(grid.point(i)));
        ScalarField::new(grid, data)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mean(&self) -> f64 {
        par::sum_range(self.data.len(), |i| self.data[i]) / self.data.len() as f64
    }

    pub fn to_spectral(&self) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Fft3::plan(self.grid.n).forward(&mut buf);
        buf
    }

    pub(crate) fn from_spectral(grid: Grid, mut coeffs: Vec<Complex64>) -> Self {
        Fft3::plan(grid.n).inverse(&mut coeffs);
        ScalarField {
            grid,
            data: coeffs.into_iter().map(|c| c.re).collect(),
        }
    }

}

impl Magnitudes for ScalarField {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    fn magnitude(&self, idx: usize) -> f64 {
        self.data[idx].abs()
    }
}

/// Real three-component field sampled on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    grid: Grid,
    comps: [Vec<f64>; 3],
}

impl GridField {
    pub fn new(grid: Grid, comps: [Vec<f64>; 3]) -> Result<Self> {
        for c in &comps {
            if c.len() != grid.cells() {
                return Err(Error::GridMismatch(format!(
                    "expected {} samples per component, got {}",
                    grid.cells(),
                    c.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "vector field".into(),
                });
            }
        }
        Ok(GridField { grid, comps })
    }

    pub fn zeros(grid: Grid) -> Self {
        let z = vec![0.0; grid.cells()];
        GridField {
            grid,
            comps: [z.clone(), z.clone(), z],
        }
    }

    pub fn from_fn<F>(grid: Grid, f: F) -> Result<Self>
    where
        F: Fn([f64; 3]) -> [f64; 3] + Sync + Send,
    {
        let values = par::map_range(grid.cells(), |i| f(grid.point(i)));
        let mut comps = [
            Vec::with_capacity(values.len()),
            Vec::with_capacity(values.len()),
            Vec::with_capacity(values.len()),
        ];
        for v in values {
            for c in 0..3 {
                comps[c].push(v[c]);
            }
        }
        GridField::new(grid, comps)
    }


    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    pub fn components(&self) -> &[Vec<f64>; 3] {
        &self.comps
    }

    pub fn into_components(self) -> [Vec<f64>; 3] {
        self.comps
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [f64; 3] {
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn check_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { what: what.into() })
        }
    }

    pub fn scale(&self, s: f64) -> GridField {
        self.map_components(|v| v * s)
    }

    fn map_components<F: Fn(f64) -> f64 + Sync + Send>(&self, f: F) -> GridField {
        let comps = [0, 1, 2].map(|c| self.comps[c].iter().map(|&v| f(v)).collect());
        GridField {
            grid: self.grid,
            comps,
        }
    }

    fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &GridField, f: F) -> GridField {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let comps = [0, 1, 2].map(|c| {
            self.comps[c]
                .iter()
                .zip(&other.comps[c])
                .map(|(&a, &b)| f(a, b))
                .collect()
        });
        GridField {
            grid: self.grid,
            comps,
        }
    }

    /// Componentwise mean.
    pub fn mean(&self) -> [f64; 3] {
        let n = self.grid.cells() as f64;
        [0, 1, 2].map(|c| par::sum_range(self.grid.cells(), |i| self.comps[c][i]) / n)
    }

    /// Discrete L₂ pairing `Σ f·g dx³`.
    pub fn inner(&self, other: &GridField) -> f64 {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let dv = self.grid.cell_volume();
        dv * par::sum_range(self.grid.cells(), |i| {
            (0..3).map(|c| self.comps[c][i] * other.comps[c][i]).sum::<f64>()
        })
    }

    pub fn to_spectral(&self) -> SpectralField {
        let plan = Fft3::plan(self.grid.n);
        let coeffs = [0, 1, 2].map(|c| {
            let mut buf: Vec<Complex64> =
                self.comps[c].iter().map(|&v| Complex64::new(v, 0.0)).collect();
            plan.forward(&mut buf);
            buf
        });
        SpectralField {
            grid: self.grid,
            coeffs,
        }
    }
}

impl Magnitudes for GridField {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    fn magnitude(&self, idx: usize) -> f64 {
        let [a, b, c] = self.at(idx);
        (a * a + b * b + c * c).sqrt()
    }
}

impl Add for &GridField {
    type Output = GridField;
    fn add(self, rhs: &GridField) -> GridField {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &GridField {
    type Output = GridField;
    fn sub(self, rhs: &GridField) -> GridField {
        self.zip_with(rhs, |a, b| a - b)
    }
}

/// Fourier coefficients of a real vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: [Vec<Complex64>; 3],
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        let z = vec![Complex64::default(); grid.cells()];
        SpectralField {
            grid,
            coeffs: [z.clone(), z.clone(), z],
        }
    }

    pub(crate) fn from_coeffs(grid: Grid, coeffs: [Vec<Complex64>; 3]) -> Self {
        SpectralField { grid, coeffs }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Vec<Complex64>; 3] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Vec<Complex64>; 3] {
        &mut self.coeffs
    }

    /// Inverse transform; the imaginary residue of a Hermitian spectrum is dropped.
    pub fn to_grid(&self) -> GridField {
        let plan = Fft3::plan(self.grid.n);
        let comps = [0, 1, 2].map(|c| {
            let mut buf = self.coeffs[c].clone();
            plan.inverse(&mut buf);
            buf.into_iter().map(|z| z.re).collect()
        });
        GridField {
            grid: self.grid,
            comps,
        }
    }

    /// Multiplies every mode by `m(idx)`.
    pub fn apply_multiplier<F>(&mut self, m: F)
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let chunk = par::REDUCE_CHUNK;
        for c in 0..3 {
            par::for_each_chunk_mut(&mut self.coeffs[c], chunk, |ci, block| {
                let base = ci * chunk;
                for (o, z) in block.iter_mut().enumerate() {
                    *z *= m(base + o);
                }
            });
        }
    }

    /// Leray projection in place: `f̂ − k (k·f̂)/|k|²`.
    ///
    /// The mean mode passes through. Modes carrying a Nyquist index are
    /// removed, since their discrete derivative vanishes and the projector
    /// cannot act on them consistently.
    pub fn project(&mut self) {
        let wn = self.grid.wavenumbers();
        let n3 = self.grid.cells();
        let [a, b, c] = &mut self.coeffs;
        let chunk = par::REDUCE_CHUNK;
        // Components are projected jointly, so work over index chunks.
        let results: Vec<Vec<[Complex64; 3]>> = par::map_range(n3.div_ceil(chunk), |ci| {
            let lo = ci * chunk;
            let hi = (lo + chunk).min(n3);
            (lo..hi)
                .map(|idx| project_mode(&wn, idx, [a[idx], b[idx], c[idx]]))
                .collect()
        });
        for (ci, block) in results.into_iter().enumerate() {
            let lo = ci * chunk;
            for (o, v) in block.into_iter().enumerate() {
                a[lo + o] = v[0];
                b[lo + o] = v[1];
                c[lo + o] = v[2];
            }
        }
    }

    /// Zeroes the modes removed by the 2/3 rule.
    pub fn dealias(&mut self) {
        let wn = self.grid.wavenumbers();
        self.apply_multiplier(|idx| if wn.kept(idx) { 1.0 } else { 0.0 });
    }

    /// Spectral divergence `i k·f̂`.
    pub fn divergence(&self) -> Vec<Complex64> {
        let wn = self.grid.wavenumbers();
        par::map_range(self.grid.cells(), |idx| {
            let k = wn.kvec(idx);
            let s = k[0] * self.coeffs[0][idx] + k[1] * self.coeffs[1][idx] + k[2] * self.coeffs[2][idx];
            Complex64::new(0.0, 1.0) * s
        })
    }

    /// `Σ |f̂|²` over all modes and components.
    pub fn energy(&self) -> f64 {
        (0..3)
            .map(|c| par::sum_range(self.grid.cells(), |i| self.coeffs[c][i].norm_sqr()))
            .sum()
    }
}

#[inline]
fn project_mode(wn: &Wavenumbers, idx: usize, f: [Complex64; 3]) -> [Complex64; 3] {
    if idx == 0 {
        return f;
    }
    if wn.has_nyquist(idx) {
        return [Complex64::default(); 3];
    }
    let k = wn.kvec(idx);
    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    let kf = (k[0] * f[0] + k[1] * f[1] + k[2] * f[2]) / k2;
    [f[0] - k[0] * kf, f[1] - k[1] * kf, f[2] - k[2] * kf]
}

/// Leray projection onto divergence-free fields.
pub fn leray_project(f: &GridField) -> Result<GridField> {
    f.check_finite("leray_project input")?;
    let mut s = f.to_spectral();
    s.project();
    Ok(s.to_grid())
}

/// Spectrally computed divergence as a scalar field.
pub fn divergence(f: &GridField) -> Result<ScalarField> {
    f.check_finite("divergence input")?;
    let div = f.to_spectral().divergence();
    Ok(ScalarField::from_spectral(f.grid, div))
}

/// Maximum pointwise magnitude of the spectral divergence.
pub fn divergence_sup(f: &GridField) -> Result<f64> {
    Ok(divergence(f)?.max_abs())
}

/// Gradient tensor `∂_j f_i`, stored at `[3 * i + j]`.
pub fn gradient(f: &GridField) -> [Vec<f64>; 9] {
    gradient_spectral(&f.to_spectral())
}

pub(crate) fn gradient_spectral(s: &SpectralField) -> [Vec<f64>; 9] {
    let grid = s.grid;
    let wn = grid.wavenumbers();
    let plan = Fft3::plan(grid.n);
    let out: Vec<Vec<f64>> = (0..9)
        .map(|e| {
            let (i, j) = (e / 3, e % 3);
            let mut buf: Vec<Complex64> = par::map_range(grid.cells(), |idx| {
                Complex64::new(0.0, wn.kvec(idx)[j]) * s.coeffs[i][idx]
            });
            plan.inverse(&mut buf);
            buf.into_iter().map(|z| z.re).collect()
        })
        .collect();
    out.try_into().expect("nine gradient components")
}

/// Spectral gradient of a scalar field.
pub fn scalar_gradient(f: &ScalarField) -> GridField {
    let grid = f.grid;
    let wn = grid.wavenumbers();
    let hat = f.to_spectral();
    let coeffs = [0, 1, 2].map(|j| {
        par::map_range(grid.cells(), |idx| {
            Complex64::new(0.0, wn.kvec(idx)[j]) * hat[idx]
        })
    });
    SpectralField { grid, coeffs }.to_grid()
}

/// Spectral curl.
pub fn curl(f: &GridField) -> GridField {
    let s = f.to_spectral();
    let grid = f.grid;
    let wn = grid.wavenumbers();
    let i = Complex64::new(0.0, 1.0);
    let coeffs = [0usize, 1, 2].map(|c| {
        let (p, q) = ((c + 1) % 3, (c + 2) % 3);
        par::map_range(grid.cells(), |idx| {
            let k = wn.kvec(idx);
            i * (k[p] * s.coeffs[q][idx] - k[q] * s.coeffs[p][idx])
        })
    });
    SpectralField { grid, coeffs }.to_grid()
}

/// Output of [`ns_rescale_masked`].
#[derive(Clone, Debug)]
pub struct Rescaled {
    pub field: GridField,
    /// `true` where the scaled sample point `λx` lies inside the box.
    pub inside: Vec<bool>,
}

/// Navier–Stokes rescaling `x ↦ λ f(λx)`, evaluated by trigonometric
/// interpolation.
///
/// For `λ > 1` part of the output would need samples outside the box. Those
/// cells are filled with zero, which is only accepted when `f` has decayed
/// at the box faces (max over the two outer cell layers at most `1e-6` of
/// `max|f|`). Use [`ns_rescale_masked`] to rescale non-decaying fields and
/// inspect the valid region instead.
pub fn ns_rescale(f: &GridField, lambda: f64) -> Result<GridField> {
    check_lambda(lambda)?;
    if lambda > 1.0 {
        let peak = f.max_abs();
        let n = f.grid.n;
        let edge = par::max_range(f.grid.cells(), |idx| {
            let (i, j, k) = f.grid.unravel(idx);
            let outer = |m: usize| m < 2 || m + 2 >= n;
            if outer(i) || outer(j) || outer(k) {
                f.magnitude(idx)
            } else {
                0.0
            }
        });
        if edge > 1e-6 * peak {
            return Err(invalid(
                "lambda",
                format!(
                    "λ·L/2 = {} exceeds the box half-width {} and the field does not decay at the faces",
                    lambda * 0.5 * f.grid.length,
                    0.5 * f.grid.length
                ),
            ));
        }
    }
    Ok(ns_rescale_masked(f, lambda)?.field)
}

/// As [`ns_rescale`] but never rejects; cells whose preimage leaves the box
/// are zero and flagged in [`Rescaled::inside`].
pub fn ns_rescale_masked(f: &GridField, lambda: f64) -> Result<Rescaled> {
    check_lambda(lambda)?;
    f.check_finite("ns_rescale input")?;
    let grid = f.grid;
    let n = grid.n;
    let half = 0.5 * grid.length;
    let targets: Vec<f64> = (0..n).map(|p| lambda * grid.coord(p)).collect();
    let axis_inside: Vec<bool> = targets.iter().map(|&y| y >= -half && y < half).collect();

    // Interpolation matrix rows: e^{i k_m (y + L/2)} / n, Nyquist as a cosine.
    let wn = grid.wavenumbers();
    let mut basis = vec![Complex64::default(); n * n];
    for (p, &y) in targets.iter().enumerate() {
        let shifted = y + half;
        for m in 0..n {
            let phase = wn.k[m] * shifted;
            basis[p * n + m] = if wn.nyquist[m] {
                Complex64::new(phase.cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, phase)
            } / n as f64;
        }
    }

    let spec = f.to_spectral();
    let comps = [0, 1, 2].map(|c| {
        let mut data = spec.coeffs[c].clone();
        for axis in 0..3 {
            data = apply_axis(&data, &basis, n, axis);
        }
        par::map_range(grid.cells(), |idx| {
            let (i, j, k) = grid.unravel(idx);
            if axis_inside[i] && axis_inside[j] && axis_inside[k] {
                lambda * data[idx].re
            } else {
                0.0
            }
        })
    });
    let inside = (0..grid.cells())
        .map(|idx| {
            let (i, j, k) = grid.unravel(idx);
            axis_inside[i] && axis_inside[j] && axis_inside[k]
        })
        .collect();
    Ok(Rescaled {
        field: GridField::new(grid, comps)?,
        inside,
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    Ok(())
}

/// Applies the dense `n×n` matrix along one axis of an x-fastest cube.
fn apply_axis(data: &[Complex64], matrix: &[Complex64], n: usize, axis: usize) -> Vec<Complex64> {
    let stride = [1, n, n * n][axis];
    par::map_range(n * n * n, |idx| {
        let coord = (idx / stride) % n;
        let base = idx - coord * stride;
        let row = &matrix[coord * n..(coord + 1) * n];
        row.iter()
            .enumerate()
            .map(|(m, &w)| w * data[base + m * stride])
            .sum()
    })
}
