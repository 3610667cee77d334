//! Kato iteration for mild solutions, its contraction diagnostics, the
//! interpolation inequality and the short-time procedure driven by tail
//! smallness of the data.
//!
//! With `V = S(t)u₀` the iteration is `v⁽¹⁾ = V`, `v⁽ᵏ⁺¹⁾ = V + u⁽ᵏ⁺¹⁾` where
//! `u⁽ᵏ⁺¹⁾` solves the Stokes system forced by `−div(v⁽ᵏ⁾ ⊗ v⁽ᵏ⁾)` from zero
//! data. Each sweep streams over the time grid and overwrites the single
//! stored `u` trace in place, so memory stays at one trace plus `V`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::{divergence_sup, GridField, Magnitudes, ScalarField, SpectralField};
use crate::heat::{heat_spectral, pair_with_direction};
use crate::initdata::{make_initial_data, InitialDataSpec};
use crate::lorentz::{lorentz_quasinorm, tail_quasinorm, tail_smallness, LorentzProfile, TailProfile, Thresholds};
use crate::par;
use crate::report::{fitted_ratio, VerifierReport};
use crate::stokes::{nonlinear_band_limited, pressure_dealiased, DuhamelStepper};
use crate::testfn::SpaceTimeBump;
use crate::timegrid::{trapezoid, TimeGrid};
use crate::trace::{kato_norm_samples, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KatoOptions {
    pub tol: f64,
    pub kmax: usize,
    /// Iteration is abandoned once `⟨v⁽ᵏ⁾⟩` exceeds this multiple of `⟨V⟩`.
    pub ceiling: f64,
    /// Consecutive gap increases that count as divergence.
    pub growth_patience: usize,
}

impl Default for KatoOptions {
    fn default() -> Self {
        KatoOptions {
            tol: 1e-8,
            kmax: 50,
            ceiling: 10.0,
            growth_patience: 3,
        }
    }
}

impl KatoOptions {
    pub fn from_thresholds(t: &Thresholds) -> Self {
        KatoOptions {
            tol: t.kato_tol,
            kmax: t.kato_kmax,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KatoStatus {
    Converged,
    NoContraction,
    MaxIterations,
}

/// Norms of one iterate `v⁽ᵏ⁾ = V + u⁽ᵏ⁾`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub k: usize,
    /// `⟨v⁽ᵏ⁾⟩_{Q_T}`.
    pub kato_v: f64,
    /// `⟨u⁽ᵏ⁾⟩_{Q_T}`.
    pub kato_u: f64,
    /// `⟨v⁽ᵏ⁾ − v⁽ᵏ⁻¹⁾⟩_{Q_T}`; absent for `k = 1`.
    pub gap: Option<f64>,
    /// `‖v⁽ᵏ⁾ − V‖_{L_∞(0,T;L₃)}`.
    pub linf_l3: f64,
    /// `max_t ‖div u⁽ᵏ⁾‖_∞`.
    pub divergence: f64,
}

/// Result of [`kato_iterate`]. Only the last iterate's `u` is kept; the
/// per-iterate norms are in `iterates`.
#[derive(Clone, Debug)]
pub struct MildSolutionTrace {
    pub heat: Trace,
    pub u: Trace,
    pub kato_heat: f64,
    pub iterates: Vec<IterateRecord>,
    pub status: KatoStatus,
}

impl MildSolutionTrace {
    pub fn times(&self) -> &TimeGrid {
        self.heat.times()
    }

    /// `v = V + u` of the last iterate.
    pub fn velocity(&self) -> Trace {
        self.heat.add(&self.u).expect("aligned by construction")
    }

    pub fn last(&self) -> &IterateRecord {
        self.iterates.last().expect("at least one iterate")
    }

    /// Pressure of the last iterate, consistent with the dealiased nonlinearity.
    pub fn pressure(&self) -> Vec<ScalarField> {
        let v = self.velocity();
        v.fields().iter().map(pressure_dealiased).collect()
    }
}

fn check_data(u0: &GridField) -> Result<()> {
    u0.check_finite("initial data")?;
    let scale = u0.max_abs().max(1.0);
    let div = divergence_sup(u0)?;
    if div > 1e-8 * scale {
        return Err(invalid("u0", format!("not divergence-free: sup|div| = {div:e}")));
    }
    let mean = u0.mean();
    if mean.iter().any(|m| m.abs() > 1e-10 * scale) {
        return Err(invalid("u0", format!("mean {mean:?} is not zero")));
    }
    Ok(())
}

/// Runs the Kato iteration on `times` until the gap drops below `opts.tol`.
pub fn kato_iterate(u0: &GridField, times: &TimeGrid, opts: &KatoOptions) -> Result<MildSolutionTrace> {
    check_data(u0)?;
    if !(opts.tol > 0.0) || opts.kmax == 0 {
        return Err(invalid("options", "need tol > 0 and kmax ≥ 1"));
    }
    let grid = *u0.grid();
    let ts = times.times();
    let hat = u0.to_spectral();
    let mut band = hat.clone();
    band.dealias();

    let heat_fields: Vec<GridField> = ts.iter().map(|&t| heat_spectral(&hat, t).to_grid()).collect();
    let heat = Trace::new(times.clone(), heat_fields)?;
    let heat_l5 = heat.lp_series(5.0);
    let kato_heat = kato_norm_samples(ts, &heat_l5);

    let mut iterates = vec![IterateRecord {
        k: 1,
        kato_v: kato_heat,
        kato_u: 0.0,
        gap: None,
        linf_l3: 0.0,
        divergence: 0.0,
    }];
    let mut u: Vec<GridField> = vec![GridField::zeros(grid); ts.len()];
    if kato_heat == 0.0 {
        return Ok(MildSolutionTrace {
            u: Trace::new(times.clone(), u)?,
            heat,
            kato_heat,
            iterates,
            status: KatoStatus::Converged,
        });
    }

    let truncated_heat = |j: usize| heat_spectral(&band, ts[j]).to_grid();
    let mut status = KatoStatus::MaxIterations;
    let mut growth = 0usize;
    for k in 2..=opts.kmax {
        let mut stepper = DuhamelStepper::new(nonlinear_band_limited(&(&truncated_heat(0) + &u[0])));
        let mut l5 = vec![0.0; ts.len()];
        let mut v5 = heat_l5.clone();
        let mut gap5 = vec![0.0; ts.len()];
        let mut l3 = 0.0_f64;
        let mut div = 0.0_f64;
        for j in 1..ts.len() {
            let forcing = nonlinear_band_limited(&(&truncated_heat(j) + &u[j]));
            stepper.step(ts[j] - ts[j - 1], forcing);
            let next = stepper.state().to_grid();
            div = div.max(spectral_divergence_sup(stepper.state()));
            l5[j] = next.lp_norm(5.0);
            l3 = l3.max(next.lp_norm(3.0));
            v5[j] = (&heat.fields()[j] + &next).lp_norm(5.0);
            gap5[j] = (&next - &u[j]).lp_norm(5.0);
            u[j] = next;
        }
        let record = IterateRecord {
            k,
            kato_v: kato_norm_samples(ts, &v5),
            kato_u: kato_norm_samples(ts, &l5),
            gap: Some(kato_norm_samples(ts, &gap5)),
            linf_l3: l3,
            divergence: div,
        };
        let gap = record.gap.unwrap();
        let prev_gap = iterates.last().and_then(|r| r.gap);
        iterates.push(record);
        if !gap.is_finite() || !record.kato_v.is_finite() || record.kato_v > opts.ceiling * kato_heat {
            status = KatoStatus::NoContraction;
            break;
        }
        if gap <= opts.tol {
            status = KatoStatus::Converged;
            break;
        }
        if prev_gap.is_some_and(|p| gap > p) {
            growth += 1;
            if growth >= opts.growth_patience {
                status = KatoStatus::NoContraction;
                break;
            }
        } else {
            growth = 0;
        }
    }
    let u = if u.iter().all(|f| f.is_finite()) {
        Trace::new(times.clone(), u)?
    } else {
        Trace::zeros(times.clone(), grid)
    };
    Ok(MildSolutionTrace {
        heat,
        u,
        kato_heat,
        iterates,
        status,
    })
}

fn spectral_divergence_sup(s: &SpectralField) -> f64 {
    let grid = *s.grid();
    ScalarField::from_spectral(grid, s.divergence()).max_abs()
}

/// Checks the iterate bound `⟨v⁽ᵏ⁾⟩ < 2⟨V⟩`, the limit bounds
/// `⟨v⟩ < 2⟨V⟩` and `‖v − V‖_{L_∞L₃} < ⟨V⟩`, the quadratic gain and the
/// gap contraction against `4 c_fit ⟨V⟩`.
pub fn contraction_report(trace: &MildSolutionTrace, gap_slack: f64) -> Vec<VerifierReport> {
    let heat = trace.kato_heat;
    let its = &trace.iterates;
    let trivial = heat == 0.0;
    let flag = |r: VerifierReport| {
        if trivial {
            r.with_note("zero data: boundary case 0 < 0 passes by convention")
        } else {
            r
        }
    };
    let strict = |id: &str, lhs: f64, rhs: f64| {
        let mut r = VerifierReport::inequality(id, lhs, rhs, 0.0);
        r.pass = trivial || (lhs.is_finite() && lhs < rhs);
        flag(r)
    };

    let mut out = Vec::new();
    let worst = its.iter().map(|r| r.kato_v).fold(0.0_f64, f64::max);
    let mut iter_bound = strict("kato.iterate_bound", worst, 2.0 * heat);
    if let Some(first) = its.iter().find(|r| !(r.kato_v < 2.0 * heat)) {
        if !trivial {
            iter_bound = iter_bound
                .with_param("first_violation_k", first.k as f64)
                .with_note(format!("first violation at k = {}", first.k));
        }
    }
    out.push(iter_bound);

    let converged = trace.status == KatoStatus::Converged;
    let last = trace.last();
    out.push(strict("kato.limit_bound", last.kato_v, 2.0 * heat).require(converged || trivial));
    out.push(strict("kato.l3_distance", last.linf_l3, heat).require(converged || trivial));

    let c_fit = quadratic_gain_constant(its);
    out.push(flag(
        VerifierReport::inequality("kato.quadratic_gain", c_fit * heat * heat, c_fit * heat * heat, 0.0)
            .with_constant(c_fit)
            .require(c_fit.is_finite()),
    ));

    let bound = 4.0 * c_fit * heat;
    let ratios = gap_ratios(its, heat);
    let worst_ratio = ratios.iter().cloned().fold(0.0_f64, f64::max);
    out.push(flag(
        VerifierReport::inequality("kato.gap_contraction", worst_ratio, bound * (1.0 + gap_slack), 0.0)
            .with_constant(bound)
            .with_param("ratios", ratios.len() as f64),
    ));
    out
}

/// `max_k ⟨u⁽ᵏ⁺¹⁾⟩ / ⟨v⁽ᵏ⁾⟩²`.
pub fn quadratic_gain_constant(its: &[IterateRecord]) -> f64 {
    its.windows(2)
        .map(|w| fitted_ratio(w[1].kato_u, w[0].kato_v * w[0].kato_v))
        .fold(0.0, f64::max)
}

/// Successive gap ratios, skipping gaps at round-off level.
pub fn gap_ratios(its: &[IterateRecord], kato_heat: f64) -> Vec<f64> {
    let floor = 1e-12 * kato_heat;
    let gaps: Vec<f64> = its.iter().filter_map(|r| r.gap).collect();
    gaps.windows(2)
        .filter(|w| w[0] > floor && w[1] > floor)
        .map(|w| w[1] / w[0])
        .collect()
}

/// Per-sample constants of `t^{1/8}‖g‖₄ ≤ C ‖g‖_{L^{3,∞}}^{3/8} (t^{1/5}‖g‖₅)^{5/8}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationCheck {
    /// `(t, lhs, rhs without C)`.
    pub samples: Vec<(f64, f64, f64)>,
    pub report: VerifierReport,
}

impl InterpolationCheck {
    /// `max C / min C − 1` over samples with `t ∈ [t_lo, t_hi]`.
    pub fn drift(&self, t_lo: f64, t_hi: f64) -> f64 {
        let cs: Vec<f64> = self
            .samples
            .iter()
            .filter(|s| s.0 >= t_lo && s.0 <= t_hi && s.2 > 0.0)
            .map(|s| s.1 / s.2)
            .collect();
        if cs.is_empty() {
            return 0.0;
        }
        let max = cs.iter().cloned().fold(f64::MIN, f64::max);
        let min = cs.iter().cloned().fold(f64::MAX, f64::min);
        max / min - 1.0
    }
}

pub fn interpolation_check(trace: &Trace) -> Result<InterpolationCheck> {
    let ts = trace.times().times();
    let samples: Vec<(f64, f64, f64)> = ts
        .iter()
        .zip(trace.fields())
        .filter(|(t, _)| **t > 0.0)
        .map(|(&t, g)| {
            let lhs = t.powf(0.125) * g.lp_norm(4.0);
            let weak = lorentz_quasinorm(g, 3.0, f64::INFINITY)?;
            let rhs = weak.powf(0.375) * (t.powf(0.2) * g.lp_norm(5.0)).powf(0.625);
            Ok((t, lhs, rhs))
        })
        .collect::<Result<_>>()?;
    let c = samples
        .iter()
        .map(|s| fitted_ratio(s.1, s.2))
        .fold(0.0_f64, f64::max);
    let (lhs, rhs) = samples
        .iter()
        .fold((0.0_f64, 0.0_f64), |acc, s| (acc.0.max(s.1), acc.1.max(s.2)));
    let report = VerifierReport::inequality("kato.interpolation", lhs, c.max(1.0) * rhs.max(lhs), 0.0)
        .with_constant(c)
        .require(c.is_finite())
        .with_note("pass iff a single finite constant covers every sample");
    Ok(InterpolationCheck { samples, report })
}

/// Spectral Navier–Stokes defect of the final iterate,
/// `‖∂ₜu − Δu − N(v)‖₂` with `∂ₜu` by centred differences, at interior
/// samples with `t ≥ t_min`.
pub fn ns_residual(trace: &MildSolutionTrace, t_min: f64) -> Result<Vec<(f64, f64)>> {
    let ts = trace.times().times();
    if ts.len() < 3 {
        return Err(invalid("trace", "need at least three samples"));
    }
    let grid = *trace.u.grid();
    let wn = grid.wavenumbers();
    let u = trace.u.fields();
    let v = trace.velocity();
    let mut out = Vec::new();
    for j in 1..ts.len() - 1 {
        if ts[j] < t_min {
            continue;
        }
        let (hm, hp) = (ts[j] - ts[j - 1], ts[j + 1] - ts[j]);
        // Three-point derivative, second order on nonuniform grids.
        let (a, b, c) = (-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp)));
        let uhat = u[j].to_spectral();
        let mut tv = v.fields()[j].to_spectral();
        tv.dealias();
        let n = nonlinear_band_limited(&tv.to_grid());
        let (um, up) = (u[j - 1].to_spectral(), u[j + 1].to_spectral());
        let mut sq = 0.0;
        for comp in 0..3 {
            sq += par::sum_range(grid.cells(), |idx| {
                let dt = a * um.coeffs()[comp][idx] + b * uhat.coeffs()[comp][idx] + c * up.coeffs()[comp][idx];
                let r = dt + wn.k2(idx) * uhat.coeffs()[comp][idx] - n.coeffs()[comp][idx];
                r.norm_sqr()
            });
        }
        let l2 = (sq * grid.cell_volume() / grid.cells() as f64).sqrt();
        out.push((ts[j], l2));
    }
    Ok(out)
}

/// `∬ v · φ dx dt` over the trace, trapezoid in time.
pub fn distributional_pairing(v: &Trace, phi: &SpaceTimeBump) -> Result<f64> {
    let grid = *v.grid();
    phi.check_support(&grid, v.times().horizon())?;
    let (ta, tb) = phi.time_support();
    let values: Vec<f64> = v
        .times()
        .times()
        .iter()
        .zip(v.fields())
        .map(|(&t, f)| {
            if t > ta && t < tb {
                pair_with_direction(f, &phi.sample(&grid, t), phi.direction)
            } else {
                0.0
            }
        })
        .collect();
    Ok(trapezoid(v.times().times(), &values))
}

/// `(t, ‖v(t) − u₀‖_{L^{3,∞}})` along the trace.
pub fn continuity_gap(v: &Trace, u0: &GridField) -> Result<Vec<(f64, f64)>> {
    v.grid().check_same(u0.grid())?;
    v.times()
        .times()
        .iter()
        .zip(v.fields())
        .map(|(&t, f)| Ok((t, lorentz_quasinorm(&(f - u0), 3.0, f64::INFINITY)?)))
        .collect()
}

/// Outcome of the tail-smallness short-time procedure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KozonoYamazakiReport {
    pub tail: TailProfile,
    pub condition_met: bool,
    pub cutoff: f64,
    /// `‖(u₀)⁺_N‖_{L^{3,∞}}`.
    pub tail_norm: f64,
    /// `‖(u₀)⁻_N‖_{L₅}`.
    pub bounded_l5: f64,
    pub weak_norm: f64,
    /// Fitted `C` in `‖(u₀)⁻_N‖_{L₅} ≤ C N^{2/5} ‖u₀‖^{3/5}`.
    pub l5_constant: f64,
    /// `min(ε⁵, ε₀⁵) / (C N² ‖u₀‖³)`.
    pub predicted_time: f64,
    /// `ε⁵ / ‖(u₀)⁻_N‖₅⁵`, the horizon on which the bounded part alone keeps `⟨·⟩` below `ε`.
    pub empirical_time: f64,
    /// Horizon actually run, the predicted time capped at the configured maximum.
    pub run_time: f64,
    pub kato_heat: f64,
    /// `C ε₃ + T^{1/5} C N^{2/5} ‖u₀‖^{3/5}`.
    pub heat_bound: f64,
    pub heat_bound_holds: bool,
    pub status: Option<KatoStatus>,
    pub reports: Vec<VerifierReport>,
}

/// Smallest grid level `N` with `‖f χ_{|f|>N}‖_{L^{3,∞}} < ε₃`.
pub fn smallest_admissible_cutoff(profile: &LorentzProfile, eps3: f64) -> f64 {
    let levels = profile.levels();
    // tail is nonincreasing in N: search the descending level list.
    let mut lo = 0usize;
    let mut hi = levels.len();
    while lo < hi {
        let mid = (lo + hi) / 2;
        if tail_quasinorm(profile, levels[mid]) < eps3 {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    if lo == 0 {
        profile.max()
    } else {
        levels[lo - 1]
    }
}

/// Chooses `N`, predicts the existence horizon and runs the iteration there.
///
/// `cutoff` overrides the automatic choice of `N`. The run uses `samples`
/// uniform steps on `(0, min(T_pred, max_time)]`; `run` can be set to
/// `false` to evaluate only the predictions.
pub fn kozono_yamazaki_run(
    u0: &GridField,
    th: &Thresholds,
    cutoff: Option<f64>,
    max_time: f64,
    samples: usize,
    run: bool,
) -> Result<KozonoYamazakiReport> {
    th.validate()?;
    let tail = tail_smallness(u0);
    let profile = LorentzProfile::of(u0);
    let weak_norm = profile.quasinorm(3.0, f64::INFINITY);
    let condition_met = tail.value < th.eps3;
    let n = match cutoff {
        Some(n) if n > 0.0 => n,
        Some(n) => return Err(invalid("N", format!("must be positive, got {n}"))),
        None => smallest_admissible_cutoff(&profile, th.eps3),
    };
    let tail_norm = tail_quasinorm(&profile, n);
    let dv = u0.grid().cell_volume();
    let bounded_l5 = (dv
        * par::sum_range(u0.grid().cells(), |i| {
            let m = u0.magnitude(i);
            if m <= n {
                m.powi(5)
            } else {
                0.0
            }
        }))
    .powf(0.2);
    let l5_base = n.powf(0.4) * weak_norm.powf(0.6);
    let l5_constant = fitted_ratio(bounded_l5, l5_base);
    let eps_min = th.eps.min(th.eps0);
    let predicted_time = if weak_norm > 0.0 {
        eps_min.powi(5) / (th.c_time * n * n * weak_norm.powi(3))
    } else {
        f64::INFINITY
    };
    let empirical_time = if bounded_l5 > 0.0 {
        th.eps.powi(5) / bounded_l5.powi(5)
    } else {
        f64::INFINITY
    };
    let run_time = predicted_time.min(max_time);
    let mut reports = vec![
        VerifierReport::inequality("ky.tail_smallness", tail.value, th.eps3, 0.0)
            .with_note("top-decade level profile maximum against eps3"),
        VerifierReport::inequality("ky.cutoff_tail", tail_norm, th.eps3, 0.0).with_param("N", n),
        VerifierReport::inequality("ky.bounded_part_l5", bounded_l5, th.c_time * l5_base, 0.0)
            .with_constant(l5_constant)
            .with_param("N", n),
    ];
    let (mut kato_heat, mut heat_bound, mut heat_bound_holds, mut status) = (0.0, 0.0, true, None);
    if run && run_time.is_finite() && run_time > 0.0 {
        let times = TimeGrid::uniform(run_time, samples)?;
        let opts = KatoOptions::from_thresholds(th);
        let trace = kato_iterate(u0, &times, &opts)?;
        kato_heat = trace.kato_heat;
        heat_bound = th.c_time * th.eps3 + run_time.powf(0.2) * th.c_time * l5_base;
        heat_bound_holds = kato_heat < heat_bound || kato_heat == 0.0;
        status = Some(trace.status);
        reports.push(
            VerifierReport::inequality("ky.heat_kato_bound", kato_heat, heat_bound, 0.0)
                .with_param("T", run_time),
        );
        let mut conv = VerifierReport::inequality("ky.contraction", 0.0, 0.0, 0.0)
            .with_param("T", run_time)
            .with_param("iterations", trace.iterates.len() as f64);
        conv.pass = trace.status == KatoStatus::Converged;
        reports.push(conv);
    }
    Ok(KozonoYamazakiReport {
        tail,
        condition_met,
        cutoff: n,
        tail_norm,
        bounded_l5,
        weak_norm,
        l5_constant,
        predicted_time,
        empirical_time,
        run_time,
        kato_heat,
        heat_bound,
        heat_bound_holds,
        status,
        reports,
    })
}

/// One row of an amplitude sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub amplitude: f64,
    pub status: KatoStatus,
    pub kato_heat: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSweep {
    pub rows: Vec<SweepRow>,
    /// Largest converging and smallest failing amplitude seen.
    pub bracket: Option<(f64, f64)>,
}

/// Doubles the amplitude from `start` until contraction fails, then bisects
/// `bisections` times inside the bracket.
pub fn amplitude_sweep(
    spec: &InitialDataSpec,
    grid: &crate::field::Grid,
    times: &TimeGrid,
    opts: &KatoOptions,
    start: f64,
    max_doublings: usize,
    bisections: usize,
) -> Result<AmplitudeSweep> {
    if !(start > 0.0) {
        return Err(invalid("start", "must be positive"));
    }
    let run = |a: f64| -> Result<SweepRow> {
        let u0 = make_initial_data(&spec.scaled(a), grid)?;
        let t = kato_iterate(&u0, times, opts)?;
        Ok(SweepRow {
            amplitude: a,
            status: t.status,
            kato_heat: t.kato_heat,
            iterations: t.iterates.len(),
        })
    };
    let mut rows = Vec::new();
    let mut good: Option<f64> = None;
    let mut bad: Option<f64> = None;
    let mut a = start;
    for _ in 0..=max_doublings {
        let row = run(a)?;
        let ok = row.status == KatoStatus::Converged;
        rows.push(row);
        if ok {
            good = Some(a);
            a *= 2.0;
        } else {
            bad = Some(a);
            break;
        }
    }
    if let (Some(mut lo), Some(mut hi)) = (good, bad) {
        for _ in 0..bisections {
            let mid = 0.5 * (lo + hi);
            let row = run(mid)?;
            if row.status == KatoStatus::Converged {
                lo = mid;
            } else {
                hi = mid;
            }
            rows.push(row);
        }
        good = Some(lo);
        bad = Some(hi);
    }
    let bracket = match (good, bad) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        _ => None,
    };
    Ok(AmplitudeSweep { rows, bracket })
}

impl From<KatoStatus> for &'static str {
    fn from(s: KatoStatus) -> &'static str {
        match s {
            KatoStatus::Converged => "converged",
            KatoStatus::NoContraction => "no contraction",
            KatoStatus::MaxIterations => "max iterations",
        }
    }
}

impl std::fmt::Display for KatoStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str((*self).into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::initdata::{curl_bump, single_mode};

    #[test]
    fn zero_data_converges_immediately() {
        let g = Grid::new(8, 2.0).unwrap();
        let times = TimeGrid::uniform(0.5, 4).unwrap();
        let t = kato_iterate(&GridField::zeros(g), &times, &KatoOptions::default()).unwrap();
        assert_eq!(t.status, KatoStatus::Converged);
        assert_eq!(t.iterates.len(), 1);
        let reps = contraction_report(&t, 0.05);
        assert!(reps.iter().all(|r| r.pass), "{reps:?}");
        assert!(reps[0].note.is_some());
    }

    #[test]
    fn shear_mode_is_an_exact_solution() {
        // The nonlinearity of a single real mode vanishes, so u stays zero.
        let g = Grid::new(16, 2.0 * std::f64::consts::PI).unwrap();
        let u0 = single_mode(&g, 0.3, [0, 1, 0], [1.0, 0.0, 0.0]).unwrap();
        let times = TimeGrid::uniform(0.5, 8).unwrap();
        let t = kato_iterate(&u0, &times, &KatoOptions::default()).unwrap();
        assert_eq!(t.status, KatoStatus::Converged);
        assert!(t.last().kato_u < 1e-14);
    }

    #[test]
    fn small_bump_contracts() {
        let g = Grid::new(16, 4.0).unwrap();
        let u0 = curl_bump(&g, 0.5, 1.4, [0.0; 3], 3, 1).unwrap();
        let times = TimeGrid::uniform(0.25, 8).unwrap();
        let t = kato_iterate(&u0, &times, &KatoOptions::default()).unwrap();
        assert_eq!(t.status, KatoStatus::Converged);
        assert!(t.iterates.iter().all(|r| r.divergence < 1e-10));
        for r in contraction_report(&t, 0.05) {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn rejects_compressible_data() {
        let g = Grid::new(8, 2.0 * std::f64::consts::PI).unwrap();
        let f = GridField::from_fn(g, |[x, _, _]| [x.sin(), 0.0, 0.0]).unwrap();
        let times = TimeGrid::uniform(0.5, 4).unwrap();
        assert!(kato_iterate(&f, &times, &KatoOptions::default()).is_err());
    }

    #[test]
    fn interpolation_ratio_constant_for_frozen_mode() {
        let g = Grid::new(8, 2.0 * std::f64::consts::PI).unwrap();
        let u0 = single_mode(&g, 1.0, [1, 0, 0], [0.0, 1.0, 0.0]).unwrap();
        let tr = Trace::constant(TimeGrid::geometric(1.0, 6, 0.5).unwrap(), &u0);
        let chk = interpolation_check(&tr).unwrap();
        assert!(chk.drift(0.0, 1.0) < 1e-12);
        assert!(chk.report.pass);
    }

    #[test]
    fn frozen_trace_has_zero_continuity_gap() {
        let g = Grid::new(8, 2.0).unwrap();
        let u0 = curl_bump(&g, 1.0, 0.9, [0.0; 3], 2, 3).unwrap();
        let tr = Trace::constant(TimeGrid::uniform(1.0, 3).unwrap(), &u0);
        assert!(continuity_gap(&tr, &u0).unwrap().iter().all(|r| r.1 == 0.0));
    }

    #[test]
    fn cutoff_search_matches_linear_scan() {
        let g = Grid::new(16, 4.0).unwrap();
        let f = crate::initdata::vortex_homogeneous(&g, 0.3, 2.0).unwrap();
        let p = LorentzProfile::of(&f);
        for eps3 in [0.05, 0.2, 0.39, 1.0] {
            let n = smallest_admissible_cutoff(&p, eps3);
            assert!(tail_quasinorm(&p, n) < eps3 || n == p.max());
            let below = p.levels().iter().filter(|&&a| a < n).cloned().fold(0.0, f64::max);
            if below > 0.0 {
                assert!(tail_quasinorm(&p, below) >= eps3);
            }
        }
    }
}
