//! Divergence-free initial data and approximating sequences.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{curl, Grid, GridField, Magnitudes, SpectralField};
use crate::lorentz::lorentz_quasinorm;
use crate::par;

/// Recipe for an initial field; serialized inside run manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDataSpec {
    Zero,
    /// Curl of a random sum of smooth bumps supported in `B(center, radius)`,
    /// scaled so that `max|u₀| = amplitude`.
    CurlBump {
        amplitude: f64,
        radius: f64,
        #[serde(default)]
        center: [f64; 3],
        #[serde(default = "default_bumps")]
        bumps: usize,
        #[serde(default)]
        seed: u64,
    },
    /// `σ(−x₂, x₁, 0)/|x|²` with cells within `excision_cells·dx` of the origin zeroed.
    VortexHomogeneous {
        amplitude: f64,
        #[serde(default = "default_excision")]
        excision_cells: f64,
    },
    /// `σ w cos(k·x)` with `w ⊥ k`, `k = 2π mode / L`.
    SingleMode {
        amplitude: f64,
        mode: [i64; 3],
        polarization: [f64; 3],
    },
    /// Gaussian mollifications of `base` at widths `width/k`.
    MollifiedSequence {
        base: Box<InitialDataSpec>,
        width: f64,
    },
    /// `base + (0, a cos(m_k x₁), 0)` with `m_k = k·step` in units of `2π/L`.
    OscillatorySequence {
        base: Box<InitialDataSpec>,
        amplitude: f64,
        step: usize,
    },
}

fn default_bumps() -> usize {
    3
}

fn default_excision() -> f64 {
    2.0
}

impl InitialDataSpec {
    pub fn is_sequence(&self) -> bool {
        matches!(
            self,
            InitialDataSpec::MollifiedSequence { .. } | InitialDataSpec::OscillatorySequence { .. }
        )
    }

    /// Same recipe with its amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> InitialDataSpec {
        let mut s = self.clone();
        match &mut s {
            InitialDataSpec::Zero => {}
            InitialDataSpec::CurlBump { amplitude, .. }
            | InitialDataSpec::VortexHomogeneous { amplitude, .. }
            | InitialDataSpec::SingleMode { amplitude, .. } => *amplitude *= factor,
            InitialDataSpec::MollifiedSequence { base, .. } => **base = base.scaled(factor),
            InitialDataSpec::OscillatorySequence { base, amplitude, .. } => {
                **base = base.scaled(factor);
                *amplitude *= factor;
            }
        }
        s
    }
}

/// Builds the field described by `spec`; sequence kinds yield their base.
pub fn make_initial_data(spec: &InitialDataSpec, grid: &Grid) -> Result<GridField> {
    match spec {
        InitialDataSpec::Zero => Ok(GridField::zeros(*grid)),
        InitialDataSpec::CurlBump {
            amplitude,
            radius,
            center,
            bumps,
            seed,
        } => curl_bump(grid, *amplitude, *radius, *center, *bumps, *seed),
        InitialDataSpec::VortexHomogeneous {
            amplitude,
            excision_cells,
        } => vortex_homogeneous(grid, *amplitude, *excision_cells),
        InitialDataSpec::SingleMode {
            amplitude,
            mode,
            polarization,
        } => single_mode(grid, *amplitude, *mode, *polarization),
        InitialDataSpec::MollifiedSequence { base, .. }
        | InitialDataSpec::OscillatorySequence { base, .. } => make_initial_data(base, grid),
    }
}

fn check_amplitude(a: f64) -> Result<()> {
    if !a.is_finite() {
        return Err(invalid("amplitude", "must be finite"));
    }
    Ok(())
}

pub fn curl_bump(
    grid: &Grid,
    amplitude: f64,
    radius: f64,
    center: [f64; 3],
    bumps: usize,
    seed: u64,
) -> Result<GridField> {
    check_amplitude(amplitude)?;
    let half = 0.5 * grid.length();
    if !(radius > 0.0) || center.iter().any(|c| c.abs() + radius >= half) {
        return Err(Error::Support(format!(
            "potential support B({center:?}, {radius}) must lie inside the box of half-width {half}"
        )));
    }
    if bumps == 0 {
        return Err(invalid("bumps", "need at least one bump"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts: Vec<([f64; 3], f64, [f64; 3])> = (0..bumps)
        .map(|_| {
            let offset = [0, 1, 2].map(|_| rng.gen_range(-0.25..0.25) * radius);
            let c = [0, 1, 2].map(|a| center[a] + offset[a]);
            let r = radius * rng.gen_range(0.4..0.55);
            let w = [0, 1, 2].map(|_| standard_normal(&mut rng));
            (c, r, w)
        })
        .collect();
    let potential = GridField::from_fn(*grid, |x| {
        let mut a = [0.0; 3];
        for (c, r, w) in &parts {
            let s2 = (0..3).map(|i| (x[i] - c[i]).powi(2)).sum::<f64>() / (r * r);
            if s2 < 1.0 {
                let b = (1.0 - 1.0 / (1.0 - s2)).exp();
                for i in 0..3 {
                    a[i] += w[i] * b;
                }
            }
        }
        a
    })?;
    let u = curl(&potential);
    let peak = u.max_abs();
    if peak == 0.0 {
        return Ok(u);
    }
    Ok(u.scale(amplitude / peak))
}

pub fn vortex_homogeneous(grid: &Grid, amplitude: f64, excision_cells: f64) -> Result<GridField> {
    check_amplitude(amplitude)?;
    if !(excision_cells >= 0.0) {
        return Err(invalid("excision_cells", "must be nonnegative"));
    }
    let r_exc = excision_cells * grid.dx();
    let raw = GridField::from_fn(*grid, |[x, y, z]| {
        let r2 = x * x + y * y + z * z;
        if r2 == 0.0 || r2 <= r_exc * r_exc {
            [0.0; 3]
        } else {
            [-amplitude * y / r2, amplitude * x / r2, 0.0]
        }
    })?;
    Ok(project_zero_mean(&raw))
}

/// Leray projection with the mean mode removed.
pub fn project_zero_mean(f: &GridField) -> GridField {
    let mut s = f.to_spectral();
    s.project();
    for c in s.coeffs_mut().iter_mut() {
        c[0] = Default::default();
    }
    s.to_grid()
}

pub fn single_mode(grid: &Grid, amplitude: f64, mode: [i64; 3], polarization: [f64; 3]) -> Result<GridField> {
    check_amplitude(amplitude)?;
    let half = (grid.n() / 2) as i64;
    if mode.iter().any(|m| m.abs() >= half) || mode == [0; 3] {
        return Err(invalid("mode", format!("need 0 < |m| and |m_i| < {half}, got {mode:?}")));
    }
    let base = 2.0 * std::f64::consts::PI / grid.length();
    let k = mode.map(|m| m as f64 * base);
    let k2: f64 = k.iter().map(|v| v * v).sum();
    let pk: f64 = (0..3).map(|i| polarization[i] * k[i]).sum();
    let mut w = [0, 1, 2].map(|i| polarization[i] - pk * k[i] / k2);
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(invalid("polarization", "must not be parallel to the wavevector"));
    }
    w.iter_mut().for_each(|v| *v /= norm);
    GridField::from_fn(*grid, |x| {
        let phase = (0..3).map(|i| k[i] * x[i]).sum::<f64>();
        let c = amplitude * phase.cos();
        [c * w[0], c * w[1], c * w[2]]
    })
}

/// `1/|x|` in the first component, zero within `excision_cells·dx` of the
/// origin (the origin itself is always zero).
pub fn radial_inverse(grid: &Grid, excision_cells: f64) -> GridField {
    let r_exc = excision_cells * grid.dx();
    GridField::from_fn(*grid, |[x, y, z]| {
        let r = (x * x + y * y + z * z).sqrt();
        if r == 0.0 || r <= r_exc {
            [0.0; 3]
        } else {
            [1.0 / r, 0.0, 0.0]
        }
    })
    .expect("finite samples")
}

/// Multiplies every mode by `e^{−|ξ|²w²/2}`.
pub fn mollify(f: &GridField, width: f64) -> GridField {
    let mut s: SpectralField = f.to_spectral();
    let wn = f.grid().wavenumbers();
    s.apply_multiplier(|idx| (-0.5 * wn.k2(idx) * width * width).exp());
    s.to_grid()
}

/// Members of an approximating sequence and their uniform weak-`L³` bound.
#[derive(Clone, Debug)]
pub struct SequenceOutput {
    pub base: GridField,
    /// Member `k` (1-based) at index `k − 1`.
    pub members: Vec<GridField>,
    /// `sup_k ‖u₀⁽ᵏ⁾‖_{L^{3,∞}}`.
    pub uniform_bound: f64,
    pub notes: Vec<String>,
}

pub fn make_sequence(spec: &InitialDataSpec, grid: &Grid, count: usize) -> Result<SequenceOutput> {
    let base = make_initial_data(spec, grid)?;
    let mut notes = Vec::new();
    let members: Vec<GridField> = match spec {
        InitialDataSpec::MollifiedSequence { width, .. } => {
            if !(*width > 0.0) {
                return Err(invalid("width", "must be positive"));
            }
            let ks: Vec<usize> = (1..=count).collect();
            par::map_slice(&ks, |&k| mollify(&base, width / k as f64))
        }
        InitialDataSpec::OscillatorySequence { amplitude, step, .. } => {
            if *step == 0 {
                return Err(invalid("step", "must be positive"));
            }
            let limit = grid.n() / 2;
            let usable = (1..=count).take_while(|k| k * step < limit).count();
            if usable < count {
                notes.push(format!(
                    "sequence truncated to {usable} members: frequency {} reaches the Nyquist limit {limit}",
                    (usable + 1) * step
                ));
            }
            let ks: Vec<usize> = (1..=usable).collect();
            let wave = 2.0 * std::f64::consts::PI / grid.length();
            par::map_slice(&ks, |&k| {
                let m = (k * step) as f64 * wave;
                let osc = GridField::from_fn(*grid, |x| [0.0, amplitude * (m * x[0]).cos(), 0.0])
                    .expect("finite samples");
                &base + &osc
            })
        }
        _ => {
            return Err(invalid(
                "kind",
                "make_sequence needs mollified_sequence or oscillatory_sequence",
            ))
        }
    };
    let norms: Vec<f64> = par::map_slice(&members, |m| {
        lorentz_quasinorm(m, 3.0, f64::INFINITY).expect("valid exponents")
    });
    let uniform_bound = norms.into_iter().fold(0.0, f64::max);
    Ok(SequenceOutput {
        base,
        members,
        uniform_bound,
        notes,
    })
}

/// Box–Muller draw from the standard normal distribution.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::divergence_sup;

    #[test]
    fn spec_round_trips_through_json() {
        let spec = InitialDataSpec::MollifiedSequence {
            base: Box::new(InitialDataSpec::VortexHomogeneous {
                amplitude: 0.1,
                excision_cells: 2.0,
            }),
            width: 0.5,
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<InitialDataSpec>(&text).unwrap(), spec);
        let zero: InitialDataSpec = serde_json::from_str(r#"{"kind":"zero"}"#).unwrap();
        assert_eq!(zero, InitialDataSpec::Zero);
    }

    #[test]
    fn curl_bump_is_solenoidal_and_reproducible() {
        let g = Grid::new(32, 4.0).unwrap();
        let a = curl_bump(&g, 0.7, 1.2, [0.0; 3], 3, 11).unwrap();
        let b = curl_bump(&g, 0.7, 1.2, [0.0; 3], 3, 11).unwrap();
        assert_eq!(a, b);
        assert!((a.max_abs() - 0.7).abs() < 1e-14);
        assert!(divergence_sup(&a).unwrap() <= 1e-10);
        let m = a.mean();
        assert!(m.iter().all(|v| v.abs() < 1e-14));
        assert!(curl_bump(&g, 1.0, 1.9, [0.2, 0.0, 0.0], 3, 0).is_err());
    }

    #[test]
    fn single_mode_rejects_nyquist() {
        let g = Grid::new(8, 1.0).unwrap();
        assert!(single_mode(&g, 1.0, [4, 0, 0], [0.0, 1.0, 0.0]).is_err());
        assert!(single_mode(&g, 1.0, [1, 0, 0], [1.0, 0.0, 0.0]).is_err());
        let f = single_mode(&g, 1.0, [1, 2, 0], [0.0, 0.0, 1.0]).unwrap();
        assert!(divergence_sup(&f).unwrap() < 1e-12);
    }

    #[test]
    fn vortex_is_solenoidal_with_zero_mean() {
        let g = Grid::new(32, 4.0).unwrap();
        let v = vortex_homogeneous(&g, 1.0, 2.0).unwrap();
        assert!(divergence_sup(&v).unwrap() <= 1e-10 * v.max_abs().max(1.0));
        assert!(v.mean().iter().all(|m| m.abs() < 1e-13));
    }

    #[test]
    fn mollified_zero_is_zero() {
        let g = Grid::new(8, 1.0).unwrap();
        let spec = InitialDataSpec::MollifiedSequence {
            base: Box::new(InitialDataSpec::Zero),
            width: 0.3,
        };
        let out = make_sequence(&spec, &g, 4).unwrap();
        assert!(out.members.iter().all(|m| m.max_abs() == 0.0));
        assert_eq!(out.uniform_bound, 0.0);
    }

    #[test]
    fn oscillatory_sequence_truncates_at_nyquist() {
        let g = Grid::new(16, 1.0).unwrap();
        let spec = InitialDataSpec::OscillatorySequence {
            base: Box::new(InitialDataSpec::Zero),
            amplitude: 1.0,
            step: 2,
        };
        let out = make_sequence(&spec, &g, 10).unwrap();
        assert_eq!(out.members.len(), 3);
        assert_eq!(out.notes.len(), 1);
    }
}
