//! The verification suites a manifest can name.

use std::collections::BTreeMap;

use weakns::energy::{
    apriori_scaling_check, barker_seregin_bounds, energy_functional, energy_trace, integrability_report,
    local_energy_residuals, prefactor_ladder, pressure_tail_ladder, pressure_tail_report, split_energy_trace,
    tail_l2_bound, ScalingFit,
};
use weakns::heat::{heat_energy_identity, heat_evolve, initial_convergence_check, semigroup_decay_report, weakstar_pairing_trace};
use weakns::initdata::{make_initial_data, make_sequence, InitialDataSpec};
use weakns::kato::{
    contraction_report, continuity_gap, distributional_pairing, interpolation_check, kato_iterate, kozono_yamazaki_run,
    ns_residual, KatoOptions, KatoStatus, MildSolutionTrace,
};
use weakns::lorentz::{calderon_split, tail_smallness, verify_split_bounds, LorentzProfile};
use weakns::stokes::pressure_decompose;
use weakns::testfn::random_admissible;
use weakns::{Grid, GridField, Magnitudes, TimeGrid, VerifierReport};

use crate::manifest::{Experiment, RunManifest};
use crate::RunError;

type Res<T> = Result<T, RunError>;

/// Plot-ready table: one x column and named y columns.
#[derive(Clone, Debug, Default)]
pub struct Plot {
    pub name: String,
    pub x_name: String,
    pub x: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl Plot {
    fn new(name: &str, x_name: &str, x: Vec<f64>) -> Self {
        Plot {
            name: name.into(),
            x_name: x_name.into(),
            x,
            columns: Vec::new(),
        }
    }

    fn column(mut self, name: &str, values: Vec<f64>) -> Self {
        self.columns.push((name.into(), values));
        self
    }
}

/// Everything an experiment produces before it is written to disk.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    /// Verifier reports grouped into one CSV per family.
    pub families: Vec<(String, Vec<VerifierReport>)>,
    /// Fitted quantities that are not attached to a report.
    pub constants: BTreeMap<String, f64>,
    pub flags: Vec<String>,
    pub run_failed: bool,
    pub plots: Vec<Plot>,
    pub snapshots: Vec<(String, GridField, Option<f64>)>,
}

impl Outcome {
    fn push(&mut self, family: &str, reports: Vec<VerifierReport>) {
        match self.families.iter_mut().find(|(f, _)| f == family) {
            Some((_, r)) => r.extend(reports),
            None => self.families.push((family.into(), reports)),
        }
    }

    fn flag(&mut self, flag: impl Into<String>) {
        let flag = flag.into();
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
        }
    }

    fn merge(&mut self, other: Outcome) {
        for (f, r) in other.families {
            self.push(&f, r);
        }
        self.constants.extend(other.constants);
        for f in other.flags {
            self.flag(f);
        }
        self.run_failed |= other.run_failed;
        self.plots.extend(other.plots);
        self.snapshots.extend(other.snapshots);
    }

    pub fn reports(&self) -> impl Iterator<Item = &VerifierReport> {
        self.families.iter().flat_map(|(_, r)| r)
    }

    pub fn report(&self, id: &str) -> Option<&VerifierReport> {
        self.reports().find(|r| r.inequality_id == id)
    }

    /// Records a Kato status; anything but convergence is a run failure.
    fn note_status(&mut self, status: KatoStatus) {
        match status {
            KatoStatus::Converged => {}
            KatoStatus::NoContraction => {
                self.flag("no contraction");
                self.run_failed = true;
            }
            KatoStatus::MaxIterations => {
                self.flag("max iterations");
                self.run_failed = true;
            }
        }
    }
}

/// Shared inputs of every experiment.
pub struct Context<'a> {
    pub manifest: &'a RunManifest,
    pub grid: Grid,
    pub times: TimeGrid,
    pub u0: GridField,
}

impl Context<'_> {
    fn opts(&self) -> KatoOptions {
        KatoOptions::from_thresholds(&self.manifest.thresholds)
    }

    fn horizon(&self) -> f64 {
        self.times.horizon()
    }
}

pub fn execute(manifest: &RunManifest, grid: Grid) -> Res<Outcome> {
    let times = manifest.timegrid.build()?;
    let u0 = make_initial_data(&manifest.initial_data, &grid)?;
    if !u0.is_finite() {
        return Err(RunError::invalid("initial_data", "generated field is not finite"));
    }
    let ctx = Context {
        manifest,
        grid,
        times,
        u0,
    };
    match manifest.experiment {
        Experiment::Semigroup => semigroup(&ctx),
        Experiment::Split => split(&ctx),
        Experiment::Kato => kato(&ctx),
        Experiment::Energy => energy(&ctx),
        Experiment::Scaling => scaling(&ctx),
        Experiment::Stability => stability(&ctx),
        Experiment::KozonoYamazaki => kozono_yamazaki(&ctx),
        Experiment::All => {
            let mut out = Outcome::default();
            for f in [semigroup, split, kato, energy, scaling, kozono_yamazaki, stability] {
                out.merge(f(&ctx)?);
            }
            Ok(out)
        }
    }
}

fn weak_norm(f: &GridField) -> f64 {
    LorentzProfile::of(f).quasinorm(3.0, f64::INFINITY)
}

/// Allowed `max/min − 1` of the weighted decay samples over one decade.
pub const PLATEAU_VARIATION: f64 = 0.1;

pub fn semigroup(ctx: &Context) -> Res<Outcome> {
    let mut out = Outcome::default();
    let ts: Vec<f64> = ctx.times.times()[1..].to_vec();
    let t_end = ctx.horizon();
    let decay = semigroup_decay_report(&ctx.u0, 5.0, 0, 0, &ts)?;
    let variation = decay.variation(0.1 * t_end, t_end);
    out.constants.insert("heat.decay_variation".into(), variation);
    let mut reports = vec![
        VerifierReport::inequality("heat.decay_bound", decay.sup_ratio, decay.sup_ratio, 0.0)
            .with_constant(decay.sup_ratio)
            .with_param("r", 5.0)
            .require(decay.sup_ratio.is_finite()),
        VerifierReport::inequality("heat.weak_bound", decay.weak_constant, decay.weak_constant, 0.0)
            .with_constant(decay.weak_constant)
            .require(decay.weak_constant.is_finite()),
        heat_energy_identity(&ctx.u0, &ctx.times)?,
    ];
    // a plateau of the weighted samples is only expected for homogeneous data
    if matches!(ctx.manifest.initial_data, InitialDataSpec::VortexHomogeneous { .. }) {
        reports.push(
            VerifierReport::inequality("heat.decay_plateau", variation, PLATEAU_VARIATION, 0.0)
                .with_param("r", 5.0)
                .with_note("variation of the weighted L5 samples over the last decade"),
        );
    }
    let end = heat_evolve(&ctx.u0, t_end)?;
    let l2 = |f: &GridField| (f.inner(f)).sqrt();
    let (a, b) = (l2(&end), l2(&ctx.u0));
    reports.push(VerifierReport::inequality("heat.l2_contraction", a, b, 1e-12 * b));

    let mut plot = Plot::new("semigroup", "t", ts.clone())
        .column("weighted_l5", decay.samples.iter().map(|s| s.1).collect())
        .column("weak_ratio", decay.weak_ratios.iter().map(|s| s.1).collect());
    if ctx.grid.length() > 2.0 {
        let stride = (ctx.grid.n() / 8).max(1);
        let rows = initial_convergence_check(&ctx.u0, 2.0, &ts, stride)?;
        let (first, last) = (rows[0].lq_unif, rows[rows.len() - 1].lq_unif);
        reports.push(
            VerifierReport::inequality("heat.initial_convergence", first, last, 1e-12 * last.max(1.0))
                .with_param("q", 2.0)
                .with_note("L_{2,unif} distance at the first sample against the last"),
        );
        plot = plot
            .column("lq_unif_gap", rows.iter().map(|r| r.lq_unif).collect())
            .column("weak_gap", rows.iter().map(|r| r.weak_gap).collect());
    }
    out.push("semigroup", reports);
    out.plots.push(plot);
    out.snapshots.push(("heat_u0".into(), ctx.u0.clone(), Some(0.0)));
    out.snapshots.push(("heat_final".into(), end, Some(t_end)));
    Ok(out)
}

/// Cutoff levels at fixed fractions of the field maximum.
fn split_levels(u0: &GridField) -> Vec<f64> {
    let top = u0.max_abs();
    if top > 0.0 {
        vec![top / 8.0, top / 4.0, top / 2.0]
    } else {
        vec![1.0]
    }
}

const TRIPLES: [(f64, f64, f64); 3] = [(2.0, 3.0, 4.0), (2.0, 3.0, 6.0), (1.5, 3.0, 5.0)];

pub fn split(ctx: &Context) -> Res<Outcome> {
    let mut out = Outcome::default();
    let weak = weak_norm(&ctx.u0);
    let mut reports = Vec::new();
    for n in split_levels(&ctx.u0) {
        for divfree in [false, true] {
            let pair = calderon_split(&ctx.u0, n, divfree)?;
            for (t, r, s) in TRIPLES {
                reports.extend(verify_split_bounds(&pair, r, s, t)?);
            }
        }
        reports.push(tail_l2_bound(&ctx.u0, n, weak)?);
    }
    out.push("split", reports);
    let tail = tail_smallness(&ctx.u0);
    out.constants.insert("split.tail_profile_max".into(), tail.value);
    out.plots.push(
        Plot::new("tail_profile", "alpha", tail.profile.iter().map(|p| p.0).collect())
            .column("alpha_d_cuberoot", tail.profile.iter().map(|p| p.1).collect()),
    );
    Ok(out)
}

fn kato_run(ctx: &Context, out: &mut Outcome) -> Res<MildSolutionTrace> {
    let run = kato_iterate(&ctx.u0, &ctx.times, &ctx.opts())?;
    out.note_status(run.status);
    if run.kato_heat == 0.0 {
        out.flag("trivial: zero data");
    }
    out.constants.insert("kato.heat_norm".into(), run.kato_heat);
    out.constants.insert("kato.iterations".into(), run.iterates.len() as f64);
    Ok(run)
}

pub fn kato(ctx: &Context) -> Res<Outcome> {
    let mut out = Outcome::default();
    let run = kato_run(ctx, &mut out)?;
    let mut reports = contraction_report(&run, ctx.manifest.thresholds.gap_slack);
    let v = run.velocity();
    let interp = interpolation_check(&v)?;
    reports.push(interp.report.clone());
    let ts = ctx.times.times();
    let t_end = ctx.horizon();
    let residual = ns_residual(&run, 0.25 * t_end)?;
    let worst = residual.iter().map(|r| r.1).fold(0.0_f64, f64::max);
    reports.push(
        VerifierReport::inequality("kato.ns_residual", worst, worst, 0.0)
            .require(worst.is_finite())
            .with_note("diagnostic: L2 residual of the differential equation on [T/4, T]"),
    );
    out.push("kato", reports);
    let gap = continuity_gap(&v, &ctx.u0)?;
    let mut res_col = vec![f64::NAN; ts.len()];
    for (t, r) in &residual {
        if let Some(j) = ctx.times.position(*t) {
            res_col[j] = *r;
        }
    }
    out.plots.push(
        Plot::new("kato", "t", ts.to_vec())
            .column("heat_l5_weighted", weighted_l5(&run.heat))
            .column("v_l5_weighted", weighted_l5(&v))
            .column("continuity_gap", gap.iter().map(|g| g.1).collect())
            .column("ns_residual", res_col),
    );
    let iters = &run.iterates;
    out.plots.push(
        Plot::new("kato_iterates", "k", iters.iter().map(|r| r.k as f64).collect())
            .column("kato_v", iters.iter().map(|r| r.kato_v).collect())
            .column("kato_u", iters.iter().map(|r| r.kato_u).collect())
            .column("gap", iters.iter().map(|r| r.gap.unwrap_or(f64::NAN)).collect())
            .column("linf_l3", iters.iter().map(|r| r.linf_l3).collect()),
    );
    out.snapshots.push(("kato_u0".into(), ctx.u0.clone(), Some(0.0)));
    let count = v.len();
    for j in (0..count).step_by((count / 4).max(1)).chain([count - 1]) {
        out.snapshots.push((format!("kato_v_{j:04}"), v.fields()[j].clone(), Some(ts[j])));
    }
    out.snapshots.dedup_by(|a, b| a.0 == b.0);
    Ok(out)
}

fn weighted_l5(trace: &weakns::Trace) -> Vec<f64> {
    trace
        .times()
        .times()
        .iter()
        .zip(trace.lp_series(5.0))
        .map(|(t, n)| t.powf(0.2) * n)
        .collect()
}

pub const ENERGY_CUTOFFS: [f64; 3] = [0.5, 1.0, 2.0];

pub fn energy(ctx: &Context) -> Res<Outcome> {
    let mut out = Outcome::default();
    let run = kato_run(ctx, &mut out)?;
    if run.status != KatoStatus::Converged {
        out.flag("energy checks skipped: iteration did not converge");
        return Ok(out);
    }
    let t_end = ctx.horizon();
    let weak = weak_norm(&ctx.u0);
    let balance = energy_trace(&run.u, &run.heat)?;
    let mut reports = vec![balance.report("energy.global", t_end)?];
    let j_end = balance.position(t_end)?;
    out.constants.insert("energy.global_residual".into(), balance.residual(j_end));
    out.constants.insert("energy.global_tolerance".into(), balance.tolerance(j_end));
    for n in ENERGY_CUTOFFS {
        let e = split_energy_trace(&run.u, &ctx.u0, n)?;
        reports.push(e.report("energy.split", t_end)?.with_param("N", n));
        reports.extend(barker_seregin_bounds(&e, weak, n, t_end)?);
        reports.push(tail_l2_bound(&ctx.u0, n, weak)?);
    }
    out.push("energy", reports);

    let v = run.velocity();
    let q = run.pressure();
    let phis = random_admissible(&ctx.grid, t_end, 10, ctx.manifest.seed);
    out.push("local_energy", local_energy_residuals(&v, &q, &phis, t_end)?);
    out.push("integrability", integrability_report(&run.u, &run.heat, weak)?);

    let p = pressure_decompose(&run.u, &run.heat)?;
    out.constants.insert("pressure.sum_defect".into(), p.sum_defect);
    for (i, g) in p.gradient_norms.iter().enumerate() {
        out.constants.insert(format!("pressure.gradient_norm_{}", i + 1), *g);
    }
    let quarter = 0.25 * ctx.grid.length();
    let radii: Vec<f64> = [0.25, 0.35, 0.5, 0.7, 1.0].iter().map(|f| f * quarter).collect();
    let ladder = pressure_tail_ladder(&v, &p, &radii)?;
    out.push("pressure", vec![pressure_tail_report(&ladder)]);
    out.plots.push(
        Plot::new("pressure_tail", "R", ladder.iter().map(|l| l.0).collect())
            .column("p1", ladder.iter().map(|l| l.1[0]).collect())
            .column("p2", ladder.iter().map(|l| l.1[1]).collect())
            .column("p3", ladder.iter().map(|l| l.1[2]).collect()),
    );
    let ts = balance.times.times().to_vec();
    let count = ts.len();
    out.plots.push(
        Plot::new("energy", "t", ts)
            .column("kinetic", balance.kinetic.clone())
            .column("dissipation", balance.dissipation.clone())
            .column("rhs_work", balance.rhs_work.clone())
            .column("residual", (0..count).map(|j| balance.residual(j)).collect())
            .column("tolerance", (0..count).map(|j| balance.tolerance(j)).collect()),
    );
    Ok(out)
}

/// Amplitude multipliers of the scaling ladder.
pub const SCALING_LADDER: [f64; 3] = [0.5, 1.0, 1.5];
/// Decades of `t` covered by the fit window `[T·10^{−1.5}, T]`.
pub const SCALING_DECADES: f64 = 1.5;

pub fn scaling(ctx: &Context) -> Res<Outcome> {
    let mut out = Outcome::default();
    let t_end = ctx.horizon();
    let window = (t_end * 10f64.powf(-SCALING_DECADES), t_end);
    let mut fits: Vec<ScalingFit> = Vec::new();
    let mut reports = Vec::new();
    let mut plot = Plot::new("scaling", "t", ctx.times.times().to_vec());
    for factor in SCALING_LADDER {
        let u0 = make_initial_data(&ctx.manifest.initial_data.scaled(factor), &ctx.grid)?;
        let run = kato_iterate(&u0, &ctx.times, &ctx.opts())?;
        out.note_status(run.status);
        if run.status != KatoStatus::Converged {
            continue;
        }
        let weak = weak_norm(&u0);
        let (fit, rep) = apriori_scaling_check(&run.u, weak, window)?;
        reports.push(rep.with_param("amplitude_factor", factor));
        out.constants.insert(format!("scaling.beta[amplitude_factor={factor}]"), fit.beta);
        out.constants.insert(format!("scaling.prefactor[amplitude_factor={factor}]"), fit.prefactor);
        plot = plot.column(&format!("E_factor_{factor}"), energy_functional(&run.u));
        fits.push(fit);
    }
    reports.push(prefactor_ladder(&fits));
    out.push("scaling", reports);
    out.plots.push(plot);
    Ok(out)
}

/// Members of the approximating sequence.
pub const SEQUENCE_LENGTH: usize = 10;
/// Fixed test functions the sequence is paired against.
pub const STABILITY_TEST_FUNCTIONS: usize = 5;

/// Gaps below this fraction of the largest gap count as converged.
const GAP_FLOOR: f64 = 1e-12;

/// Number of `k` with `gap_{k+1} > gap_k` above the round-off floor.
pub fn monotone_violations(gaps: &[f64]) -> usize {
    let top = gaps.iter().cloned().fold(0.0_f64, f64::max);
    let floor = GAP_FLOOR * top;
    gaps.windows(2)
        .filter(|w| w[1] > floor && w[1] > w[0] * (1.0 + 1e-9))
        .count()
}

pub fn stability(ctx: &Context) -> Res<Outcome> {
    let spec = if ctx.manifest.initial_data.is_sequence() {
        ctx.manifest.initial_data.clone()
    } else {
        InitialDataSpec::MollifiedSequence {
            base: Box::new(ctx.manifest.initial_data.clone()),
            width: ctx.grid.length() / 8.0,
        }
    };
    let mut out = Outcome::default();
    let seq = make_sequence(&spec, &ctx.grid, SEQUENCE_LENGTH)?;
    for n in &seq.notes {
        out.flag(n.clone());
    }
    out.constants.insert("stability.uniform_weak_bound".into(), seq.uniform_bound);
    let t_end = ctx.horizon();
    let phis = random_admissible(&ctx.grid, t_end, STABILITY_TEST_FUNCTIONS, ctx.manifest.seed);

    let mut base_pair = Vec::new();
    let mut member_pairs = vec![Vec::new(); seq.members.len()];
    for phi in &phis {
        base_pair.push(weakstar_pairing_trace(std::slice::from_ref(&seq.base), phi, &ctx.times)?[0]);
        for (k, p) in weakstar_pairing_trace(&seq.members, phi, &ctx.times)?.into_iter().enumerate() {
            member_pairs[k].push(p);
        }
    }
    let semigroup_gaps: Vec<f64> = member_pairs.iter().map(|p| max_gap(p, &base_pair)).collect();

    let opts = ctx.opts();
    let pair_run = |u0: &GridField, out: &mut Outcome| -> Res<Vec<f64>> {
        let run = kato_iterate(u0, &ctx.times, &opts)?;
        out.note_status(run.status);
        let v = run.velocity();
        phis.iter().map(|phi| Ok(distributional_pairing(&v, phi)?)).collect()
    };
    let base_kato = pair_run(&seq.base, &mut out)?;
    let mut kato_gaps = Vec::new();
    for m in &seq.members {
        let p = pair_run(m, &mut out)?;
        kato_gaps.push(max_gap(&p, &base_kato));
    }

    let violations = monotone_violations(&semigroup_gaps);
    let mut reports = vec![VerifierReport::inequality(
        "stability.semigroup_monotone",
        violations as f64,
        0.0,
        0.0,
    )
    .with_param("members", semigroup_gaps.len() as f64)];
    if kato_gaps.len() >= SEQUENCE_LENGTH {
        let (g2, g10) = (kato_gaps[1], kato_gaps[SEQUENCE_LENGTH - 1]);
        reports.push(
            VerifierReport::inequality("stability.kato_shrink", g10, 0.5 * g2, 0.0)
                .with_constant(if g2 > 0.0 { g10 / g2 } else { 0.0 }),
        );
    } else {
        reports.push(
            VerifierReport::inequality("stability.kato_shrink", f64::NAN, 0.0, 0.0)
                .with_note("sequence shorter than ten members"),
        );
    }
    out.push("stability", reports);
    let ks: Vec<f64> = (1..=kato_gaps.len()).map(|k| k as f64).collect();
    out.plots.push(
        Plot::new("stability", "k", ks)
            .column("semigroup_gap", semigroup_gaps)
            .column("kato_gap", kato_gaps),
    );
    Ok(out)
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Amplitude multipliers and cutoff multipliers of the existence-time study.
pub const KY_AMPLITUDES: [f64; 2] = [1.0, 2.0];
pub const KY_CUTOFFS: [f64; 2] = [1.0, 2.0];
/// Allowed spread `max/min − 1` of the measured-to-predicted time ratio.
pub const KY_SPREAD: f64 = 0.2;

pub fn kozono_yamazaki(ctx: &Context) -> Res<Outcome> {
    let mut out = Outcome::default();
    let th = &ctx.manifest.thresholds;
    // cutoffs are anchored to the base field so that N and the amplitude vary independently
    let anchor = ctx.u0.max_abs() / 4.0;
    if anchor == 0.0 {
        let rep = kozono_yamazaki_run(&ctx.u0, th, None, ctx.horizon(), ctx.times.len() - 1, true)?;
        out.push("kozono_yamazaki", rep.reports);
        out.flag("zero data: time scaling not applicable");
        return Ok(out);
    }
    let mut ratios = Vec::new();
    let mut reports = Vec::new();
    let mut rows: Vec<[f64; 5]> = Vec::new();
    for a in KY_AMPLITUDES {
        let u0 = make_initial_data(&ctx.manifest.initial_data.scaled(a), &ctx.grid)?;
        for c in KY_CUTOFFS {
            let n = c * anchor;
            let rep = kozono_yamazaki_run(&u0, th, Some(n), ctx.horizon(), ctx.times.len() - 1, true)?;
            if let Some(s) = rep.status {
                out.note_status(s);
            }
            let ratio = rep.empirical_time / rep.predicted_time;
            ratios.push(ratio);
            rows.push([a, n, rep.predicted_time, rep.empirical_time, rep.run_time]);
            reports.extend(
                rep.reports
                    .into_iter()
                    .map(|r| r.with_param("amplitude_factor", a).with_param("N", n)),
            );
        }
    }
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    let spread = max / min - 1.0;
    reports.push(
        VerifierReport::inequality("ky.time_scaling", spread, KY_SPREAD, 0.0)
            .with_constant(min)
            .with_note("spread of empirical over predicted existence time"),
    );
    out.push("kozono_yamazaki", reports);
    out.plots.push(
        Plot::new("kozono_yamazaki", "run", (1..=rows.len()).map(|i| i as f64).collect())
            .column("amplitude_factor", rows.iter().map(|r| r[0]).collect())
            .column("N", rows.iter().map(|r| r[1]).collect())
            .column("predicted_time", rows.iter().map(|r| r[2]).collect())
            .column("empirical_time", rows.iter().map(|r| r[3]).collect())
            .column("run_time", rows.iter().map(|r| r[4]).collect()),
    );
    Ok(out)
}
