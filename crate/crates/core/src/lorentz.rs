//! Distribution functions, Lorentz quasinorms and the Calderón cutoff split.
//!
//! Everything is answered from a [`LorentzProfile`]: the distinct nonzero
//! magnitudes of a field sorted once in descending order, paired with the
//! measure of the set where `|f|` reaches each level.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{leray_project, Grid, GridField, Magnitudes};
use crate::par;
use crate::report::VerifierReport;

/// Smallness constants and verifier settings. The constants are
/// configuration: the theory asserts they exist but gives no values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Local smallness constant for the regularity hypotheses.
    pub eps0: f64,
    /// Kato-norm smallness constant.
    pub eps: f64,
    /// Tail smallness constant.
    pub eps3: f64,
    /// Constant `c` of the bilinear estimate, so contraction needs `ε < 1/(4c)`.
    pub c_kato: f64,
    /// Constant `C` in the predicted existence time and tail bounds. The
    /// default rounds up `(5/2)^{1/5}` from the bounded-part `L₅` bound.
    pub c_time: f64,
    /// Kato stopping tolerance in the `⟨·⟩` norm.
    pub kato_tol: f64,
    pub kato_kmax: usize,
    /// Relative slack on the gap-contraction ratio.
    pub gap_slack: f64,
    /// Relative slack on inequality checks with fitted constants.
    pub fit_slack: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            eps0: 0.5,
            eps: 0.5,
            eps3: 0.5,
            c_kato: 1.0,
            c_time: 1.25,
            kato_tol: 1e-8,
            kato_kmax: 50,
            gap_slack: 0.05,
            fit_slack: 0.10,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("eps0", self.eps0),
            ("eps", self.eps),
            ("eps3", self.eps3),
            ("c_kato", self.c_kato),
            ("c_time", self.c_time),
            ("kato_tol", self.kato_tol),
            ("gap_slack", self.gap_slack),
            ("fit_slack", self.fit_slack),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.kato_kmax == 0 {
            return Err(invalid("kato_kmax", "must be positive"));
        }
        Ok(())
    }
}

/// Piecewise-constant distribution function of a sampled field.
#[derive(Clone, Debug, PartialEq)]
pub struct LorentzProfile {
    levels: Vec<f64>,
    counts: Vec<u64>,
    cell_volume: f64,
}

impl LorentzProfile {
    pub fn of<F: Magnitudes + Sync>(f: &F) -> Self {
        Self::from_magnitudes(f.magnitudes(), f.grid().cell_volume())
    }

    /// Profile over the cells where `mask` is set.
    pub fn restricted<F: Magnitudes + Sync>(f: &F, mask: &[bool]) -> Self {
        let mags = (0..f.grid().cells())
            .filter(|&i| mask[i])
            .map(|i| f.magnitude(i))
            .collect();
        Self::from_magnitudes(mags, f.grid().cell_volume())
    }

    pub fn from_magnitudes(mut mags: Vec<f64>, cell_volume: f64) -> Self {
        mags.retain(|&m| m > 0.0);
        par::sort_desc(&mut mags);
        let mut levels = Vec::new();
        let mut counts = Vec::new();
        for (i, &m) in mags.iter().enumerate() {
            if levels.last() == Some(&m) {
                *counts.last_mut().unwrap() = i as u64 + 1;
            } else {
                levels.push(m);
                counts.push(i as u64 + 1);
            }
        }
        LorentzProfile {
            levels,
            counts,
            cell_volume,
        }
    }

    /// Distinct nonzero magnitudes, descending.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Measure of `{|f| ≥ levels[i]}`, the left limit of `d` at that level.
    pub fn measure_at(&self, i: usize) -> f64 {
        self.counts[i] as f64 * self.cell_volume
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.levels.first().copied().unwrap_or(0.0)
    }

    /// `d(α) = |{|f| > α}|`.
    pub fn distribution(&self, alpha: f64) -> f64 {
        // Number of levels strictly above alpha.
        let above = self.levels.partition_point(|&a| a > alpha);
        if above == 0 {
            0.0
        } else {
            self.measure_at(above - 1)
        }
    }

    /// `‖f‖_{L^{s,l}}`; `l = ∞` gives the weak quasinorm.
    pub fn quasinorm(&self, s: f64, l: f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        if l.is_infinite() {
            return self.weak_sup(f64::INFINITY, s);
        }
        let mut acc = 0.0;
        for i in 0..self.levels.len() {
            let next = self.levels.get(i + 1).copied().unwrap_or(0.0);
            let span = self.levels[i].powf(l) - next.powf(l);
            acc += self.measure_at(i).powf(l / s) * span;
        }
        (s / l * acc).powf(1.0 / l)
    }

    /// `sup_{0<α≤α_max} α d(α)^{1/s}`.
    pub fn weak_sup(&self, alpha_max: f64, s: f64) -> f64 {
        let mut best = 0.0_f64;
        for (i, &a) in self.levels.iter().enumerate() {
            if a <= alpha_max {
                best = best.max(a * self.measure_at(i).powf(1.0 / s));
            }
        }
        if alpha_max.is_finite() {
            best = best.max(alpha_max * self.distribution(alpha_max).powf(1.0 / s));
        }
        best
    }

    /// `sup_{α≥α_min} α d(α)^{1/s}`, including the left limit at `α_min`.
    pub fn weak_sup_above(&self, alpha_min: f64, s: f64) -> f64 {
        let mut best = alpha_min * self.distribution(alpha_min).powf(1.0 / s);
        for (i, &a) in self.levels.iter().enumerate() {
            if a > alpha_min {
                best = best.max(a * self.measure_at(i).powf(1.0 / s));
            }
        }
        best
    }

    /// `(α, α d(α)^{1/s})` at every level, descending in α.
    pub fn weak_profile(&self, s: f64) -> Vec<(f64, f64)> {
        self.levels
            .iter()
            .enumerate()
            .map(|(i, &a)| (a, a * self.measure_at(i).powf(1.0 / s)))
            .collect()
    }
}

pub fn distribution_function<F: Magnitudes + Sync>(f: &F, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(invalid("alpha", format!("must be positive, got {alpha}")));
    }
    let dv = f.grid().cell_volume();
    let count = par::sum_range(f.grid().cells(), |i| {
        if f.magnitude(i) > alpha {
            1.0
        } else {
            0.0
        }
    });
    Ok(count * dv)
}

pub fn lorentz_quasinorm<F: Magnitudes + Sync>(f: &F, s: f64, l: f64) -> Result<f64> {
    check_exponents(s, l)?;
    Ok(LorentzProfile::of(f).quasinorm(s, l))
}

/// Weak quasinorm restricted to levels `α ≤ alpha_max`.
pub fn weak_quasinorm_band<F: Magnitudes + Sync>(f: &F, s: f64, alpha_max: f64) -> Result<f64> {
    check_exponents(s, f64::INFINITY)?;
    if !(alpha_max > 0.0) {
        return Err(invalid("alpha_max", "must be positive"));
    }
    Ok(LorentzProfile::of(f).weak_sup(alpha_max, s))
}

fn check_exponents(s: f64, l: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid("s", format!("must lie in (0, ∞), got {s}")));
    }
    if !(l > 0.0) {
        return Err(invalid("l", format!("must lie in (0, ∞], got {l}")));
    }
    Ok(())
}

/// Calderón decomposition at cutoff `N`.
#[derive(Clone, Debug)]
pub struct SplitPair {
    pub cutoff: f64,
    /// Bounded part, `f χ_{|f|≤N}` (projected in the divergence-free variant).
    pub minus: GridField,
    /// Tail part.
    pub plus: GridField,
    pub divfree: bool,
}

impl SplitPair {
    pub fn whole(&self) -> GridField {
        &self.minus + &self.plus
    }
}

pub fn calderon_split(f: &GridField, cutoff: f64, divfree: bool) -> Result<SplitPair> {
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(invalid("N", format!("must be positive, got {cutoff}")));
    }
    f.check_finite("calderon_split input")?;
    let grid = *f.grid();
    let low: Vec<bool> = par::map_range(grid.cells(), |i| f.magnitude(i) <= cutoff);
    let comps = f.components();
    let minus = [0, 1, 2].map(|c| {
        comps[c]
            .iter()
            .zip(&low)
            .map(|(&v, &keep)| if keep { v } else { 0.0 })
            .collect::<Vec<f64>>()
    });
    let plus = [0, 1, 2].map(|c| {
        comps[c]
            .iter()
            .zip(&minus[c])
            .map(|(&v, &m)| v - m)
            .collect::<Vec<f64>>()
    });
    let minus = GridField::new(grid, minus)?;
    let plus = GridField::new(grid, plus)?;
    if !divfree {
        return Ok(SplitPair {
            cutoff,
            minus,
            plus,
            divfree,
        });
    }
    let whole = leray_project(f)?;
    let plus = leray_project(&plus)?;
    let minus = &whole - &plus;
    Ok(SplitPair {
        cutoff,
        minus,
        plus,
        divfree,
    })
}

/// Checks the Calderón bounds on `pair` for `1 < t < r < s < ∞`.
///
/// Pointwise pairs give the two sharp bounds with coefficients
/// `s/(s−r)` and `r/(r−t)`; divergence-free pairs give the same forms with
/// a fitted constant `C`, and the weak-norm stability constant `c(r)`.
pub fn verify_split_bounds(pair: &SplitPair, r: f64, s: f64, t: f64) -> Result<Vec<VerifierReport>> {
    if !(1.0 < t && t < r && r < s && s.is_finite()) {
        return Err(invalid(
            "exponents",
            format!("need 1 < t < r < s < ∞, got t={t} r={r} s={s}"),
        ));
    }
    let n = pair.cutoff;
    let whole = pair.whole();
    let profile = LorentzProfile::of(&whole);
    let g_r = profile.quasinorm(r, f64::INFINITY).powf(r);
    let minus_s = pair.minus.lp_norm(s).powf(s);
    let plus_t = pair.plus.lp_norm(t).powf(t);
    let cs = s / (s - r);
    let ct = r / (r - t);
    let tag = |rep: VerifierReport| {
        rep.with_param("N", n)
            .with_param("r", r)
            .with_param("s", s)
            .with_param("t", t)
    };
    let mut out = Vec::new();
    if !pair.divfree {
        let d_n = profile.distribution(n);
        let lhs = minus_s + n.powf(s) * d_n;
        let base = n.powf(s - r) * g_r;
        let rhs = cs * base;
        out.push(tag(
            VerifierReport::inequality("split.bounded_part", lhs, rhs, 1e-12 * rhs)
                .with_constant(crate::report::fitted_ratio(lhs, base)),
        ));
        let base = n.powf(t - r) * g_r;
        let rhs = ct * base;
        out.push(tag(
            VerifierReport::inequality("split.tail_part", plus_t, rhs, 1e-12 * rhs)
                .with_constant(crate::report::fitted_ratio(plus_t, base)),
        ));
    } else {
        let base = cs * n.powf(s - r) * g_r;
        let c_minus = crate::report::fitted_ratio(minus_s, base);
        out.push(tag(
            VerifierReport::inequality("split.divfree_bounded_part", minus_s, c_minus.max(1.0) * base, 1e-12 * base)
                .with_constant(c_minus)
                .with_note("constant C fitted; finite value is the check"),
        ));
        let base = ct * n.powf(t - r) * g_r;
        let c_plus = crate::report::fitted_ratio(plus_t, base);
        out.push(tag(
            VerifierReport::inequality("split.divfree_tail_part", plus_t, c_plus.max(1.0) * base, 1e-12 * base)
                .with_constant(c_plus)
                .with_note("constant C fitted; finite value is the check"),
        ));
        let g = g_r.powf(1.0 / r);
        let pieces = lorentz_quasinorm(&pair.minus, r, f64::INFINITY)?
            + lorentz_quasinorm(&pair.plus, r, f64::INFINITY)?;
        let c_r = crate::report::fitted_ratio(pieces, g);
        out.push(tag(
            VerifierReport::inequality("split.weak_stability", pieces, c_r.max(1.0) * g, 1e-12 * g)
                .with_constant(c_r)
                .with_note("constant c(r) fitted"),
        ));
    }
    Ok(out)
}

/// Level profile of `α d(α)^{1/3}` over the top decade of magnitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailProfile {
    /// `(α, α d(α)^{1/3})`, descending in α.
    pub profile: Vec<(f64, f64)>,
    /// Maximum of the profile; an upper estimate of the limsup, which is zero
    /// for any bounded grid field.
    pub value: f64,
}

pub fn tail_smallness<F: Magnitudes + Sync>(f: &F) -> TailProfile {
    let p = LorentzProfile::of(f);
    let top = p.max();
    let profile: Vec<(f64, f64)> = p
        .weak_profile(3.0)
        .into_iter()
        .take_while(|&(a, _)| a >= 0.1 * top)
        .collect();
    let value = profile.iter().fold(0.0_f64, |m, &(_, v)| m.max(v));
    TailProfile { profile, value }
}

/// Weak quasinorm of the part of `f` above level `N`:
/// `‖f χ_{|f|>N}‖_{L^{3,∞}} = max(N d(N)^{1/3}, sup_{α>N} α d(α)^{1/3})`.
pub fn tail_quasinorm(profile: &LorentzProfile, cutoff: f64) -> f64 {
    profile.weak_sup_above(cutoff, 3.0)
}

/// Weak `L^{3,∞}` quasinorm of `f` over balls `B(x₀, R)`.
pub fn local_concentration<F: Magnitudes + Sync>(
    f: &F,
    center: [f64; 3],
    radii: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let grid = *f.grid();
    radii
        .iter()
        .map(|&radius| {
            let mask = ball_mask(&grid, center, radius)?;
            Ok((radius, LorentzProfile::restricted(f, &mask).quasinorm(3.0, f64::INFINITY)))
        })
        .collect()
}

/// Cells with `|x − x₀| < R`; the ball must lie inside the box.
pub fn ball_mask(grid: &Grid, center: [f64; 3], radius: f64) -> Result<Vec<bool>> {
    let half = 0.5 * grid.length();
    if !(radius > 0.0) || center.iter().any(|c| c.abs() + radius > half) {
        return Err(Error::Support(format!(
            "ball of radius {radius} at {center:?} leaves the box of half-width {half}"
        )));
    }
    Ok(par::map_range(grid.cells(), |i| {
        let x = grid.point(i);
        let d2: f64 = (0..3).map(|a| (x[a] - center[a]).powi(2)).sum();
        d2 < radius * radius
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;
    use std::f64::consts::PI;

    fn ball(n: usize, radius: f64) -> ScalarField {
        let g = Grid::new(n, 2.0).unwrap();
        ScalarField::from_fn(g, |x| {
            if x.iter().map(|v| v * v).sum::<f64>() < radius * radius {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn indicator_has_single_level() {
        let f = ball(32, 0.5);
        let p = LorentzProfile::of(&f);
        assert_eq!(p.levels(), &[1.0]);
        let vol = p.measure_at(0);
        assert!((lorentz_quasinorm(&f, 3.0, f64::INFINITY).unwrap() - vol.cbrt()).abs() < 1e-14);
        let exact = 4.0 / 3.0 * PI * 0.125;
        // Within one shell of boundary cells.
        let dx = f.grid().dx();
        assert!((vol - exact).abs() < 4.0 * PI * 0.25 * dx * 1.8);
    }

    #[test]
    fn constant_field() {
        let g = Grid::new(8, 2.0).unwrap();
        let f = ScalarField::from_fn(g, |_| 3.0).unwrap();
        assert_eq!(distribution_function(&f, 2.0).unwrap(), 8.0);
        assert_eq!(distribution_function(&f, 3.0).unwrap(), 0.0);
        assert!(distribution_function(&f, 0.0).is_err());
    }

    #[test]
    fn strong_case_matches_quadrature() {
        let g = Grid::new(16, 4.0).unwrap();
        let f = ScalarField::from_fn(g, |[x, y, z]| (-(x * x + 2.0 * y * y + z * z)).exp()).unwrap();
        for s in [1.5, 2.0, 5.0] {
            let q = lorentz_quasinorm(&f, s, s).unwrap();
            let direct = f.lp_norm(s);
            assert!((q - direct).abs() <= 1e-10 * direct, "s={s}: {q} vs {direct}");
        }
    }

    #[test]
    fn profile_agrees_with_direct_count() {
        let g = Grid::new(8, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |[x, y, z]| (x + 2.0 * y - z).round()).unwrap();
        let p = LorentzProfile::of(&f);
        for alpha in [0.1, 0.5, 1.0, 1.5, 2.0, 10.0] {
            assert_eq!(p.distribution(alpha), distribution_function(&f, alpha).unwrap());
        }
    }

    #[test]
    fn empty_field_has_zero_norm() {
        let g = Grid::new(8, 1.0).unwrap();
        let z = GridField::zeros(g);
        assert_eq!(lorentz_quasinorm(&z, 3.0, f64::INFINITY).unwrap(), 0.0);
        assert_eq!(tail_smallness(&z).value, 0.0);
    }

    #[test]
    fn pointwise_split_is_exact() {
        let g = Grid::new(8, 1.0).unwrap();
        let f = GridField::from_fn(g, |[x, y, z]| [x / (y + 0.01), z, 0.3]).unwrap();
        let pair = calderon_split(&f, 1.0, false).unwrap();
        assert_eq!(pair.whole(), f);
        assert!(pair.minus.max_abs() <= 1.0);
        let all = calderon_split(&f, 1e9, false).unwrap();
        assert_eq!(all.plus.max_abs(), 0.0);
    }

    #[test]
    fn split_rejects_bad_exponents() {
        let g = Grid::new(8, 1.0).unwrap();
        let pair = calderon_split(&GridField::zeros(g), 1.0, false).unwrap();
        assert!(verify_split_bounds(&pair, 3.0, 2.0, 2.5).is_err());
    }

    #[test]
    fn ball_must_fit() {
        let g = Grid::new(8, 2.0).unwrap();
        assert!(ball_mask(&g, [0.5, 0.0, 0.0], 0.6).is_err());
        assert!(ball_mask(&g, [0.0; 3], 0.9).is_ok());
    }

    #[test]
    fn smooth_concentration_vanishes() {
        let g = Grid::new(32, 2.0).unwrap();
        let f = ScalarField::from_fn(g, |[x, _, _]| 1.0 + x * x).unwrap();
        let vals = local_concentration(&f, [0.0; 3], &[0.8, 0.4, 0.2]).unwrap();
        assert!(vals[2].1 < vals[1].1 && vals[1].1 < vals[0].1);
    }
}
