use std::fmt::Write as _;

use centralizer::{
    birkhoff_deviation, commutation_residual, gradient_decay_probe, invariance_residual, kinematic_probe,
    normal_distortion, recover_f, separating_probe, und_probe, PairSampler,
};
use geometry_flow::{
    flow, flow_unwrapped, lie_bracket, orbit, spectral_norm, variational, IntegratorOptions, SingularityKind, Vector,
};
use perturb::{
    cocycle_perturbation, distort_pair, lift_perturbation, realize, Ball, BumpProfile, Certified, CocycleOptions,
    DistortSpec, PerturbError, PerturbationBundle, PipelineOptions, RealizeOptions, TubeRegion,
};
use poincare::{
    boundedness_certificate, calibrate, hitting_time_bounds_check, linear_poincare, normal_frame, CertificateOptions,
    MapOptions, PoincareError, PoincareMap,
};
use serde_json::{json, Value};

use crate::catalog::{catalog_get, roof, CatalogEntry, GOLDEN, NAMES};
use crate::cli::{
    BirkhoffArgs, CertifyArgs, CommuteArgs, DecayArgs, DistortArgs, DistortionArgs, FlowArgs, KinematicArgs, ListArgs,
    PairArgs, PoincareArgs, PointArgs, RealizeArgs, RecoverArgs, SeparatingArgs, UndArgs, VariationalArgs,
};
use crate::report::{rows, to_value, vec_value, Outcome, Params, Report, Verdict};
use crate::verify::{verify_entry, COMMUTE_TIMES};
use crate::CliError;

const TOL: f64 = 1e-10;
const CALIBRATION_TOL: f64 = 1e-11;

struct Draft<'a> {
    command: &'static str,
    params: Params<'a>,
    seed: Option<u64>,
}

impl<'a> Draft<'a> {
    fn new(command: &'static str, params: Params<'a>) -> Self {
        Self { command, params, seed: None }
    }

    fn done(self, passed: bool, payload: Value, summary: String, csv: Option<String>) -> Result<Outcome, CliError> {
        Ok(Outcome {
            report: Report {
                command: self.command.to_string(),
                params: self.params.finish(),
                seed: self.seed,
                verdict: Verdict::from_bool(passed),
                payload,
            },
            summary,
            csv,
        })
    }
}

fn fmt_point(p: &Vector) -> String {
    let parts: Vec<String> = p.iter().map(|c| format!("{c:.6}")).collect();
    format!("({})", parts.join(", "))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![b],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn sample_pairs(
    e: &CatalogEntry,
    params: &mut Params,
    args: &PairArgs,
    seed: u64,
    default_count: usize,
    default_offsets: (f64, f64),
) -> Result<Vec<(Vector, Vector)>, CliError> {
    let count = params.count("pairs", args.pairs, default_count)?;
    let lo = params.positive("min_offset", args.min_offset, default_offsets.0)?;
    let hi = params.positive("max_offset", args.max_offset, default_offsets.1)?;
    if lo > hi {
        return Err(CliError::Usage(format!("min_offset {lo} exceeds max_offset {hi}")));
    }
    Ok(PairSampler::new(e.region.clone(), seed, lo, hi).pairs(&e.x, count))
}

pub fn flow_cmd(e: &CatalogEntry, mut params: Params, a: &FlowArgs) -> Result<Outcome, CliError> {
    let x = params.point("x", a.x.as_deref(), &e.base_point)?;
    let t = params.num("t", a.t, 1.0)?;
    let samples = params.count("samples", a.samples, 101)?;
    let tol = params.positive("tol", a.common.tol, TOL)?;
    let end = flow(&e.x, &x, t, tol)?;
    let seg = orbit(&e.x, &x, t, IntegratorOptions::new(tol), false)?;
    let csv = seg.to_csv(&linspace(0.0, t, samples.max(2)));
    let payload = json!({ "start": vec_value(&x), "time": t, "end": vec_value(&end), "rows": samples.max(2) });
    Draft::new("flow", params).done(true, payload, format!("X_{t}{} = {}", fmt_point(&x), fmt_point(&end)), Some(csv))
}

pub fn variational_cmd(e: &CatalogEntry, mut params: Params, a: &VariationalArgs) -> Result<Outcome, CliError> {
    let x = params.point("x", a.x.as_deref(), &e.base_point)?;
    let t = params.num("t", a.t, 1.0)?;
    let h = params.positive("h", a.h, 1e-4)?;
    let tol = params.positive("tol", a.common.tol, TOL)?;
    let phi = variational(&e.x, &x, t, tol)?;
    let d = x.len();
    let mut fd = phi.clone();
    for j in 0..d {
        let mut step = Vector::zeros(d);
        step[j] = h;
        let col =
            (flow_unwrapped(&e.x, &(&x + &step), t, tol)? - flow_unwrapped(&e.x, &(&x - &step), t, tol)?) / (2.0 * h);
        fd.set_column(j, &col);
    }
    let residual = (&phi - &fd).abs().max();
    let norm = spectral_norm(&phi);
    let bound = 100.0 * norm.max(1.0) * (h * h + tol / h);
    let lpf = linear_poincare(&e.x, &x, t, tol).ok();
    let payload = json!({
        "point": vec_value(&x),
        "time": t,
        "tangent": rows(&phi),
        "difference_quotient": rows(&fd),
        "residual": residual,
        "bound": bound,
        "spectral_norm": norm,
        "lpf_logabsdet": lpf.as_ref().map(|l| l.logabsdet),
        "lpf_matrix": lpf.as_ref().map(|l| rows(&l.matrix)),
    });
    let summary = format!("|DX_t − central differences| = {residual:.3e} (bound {bound:.3e})");
    Draft::new("variational", params).done(residual <= bound, payload, summary, None)
}

pub fn poincare(e: &CatalogEntry, mut params: Params, a: &PoincareArgs) -> Result<Outcome, CliError> {
    let x = params.point("x", a.x.as_deref(), &e.base_point)?;
    let n = params.num("n", a.n, 1.0)?;
    let q = params.point("q", a.q.as_deref(), &x)?;
    let speed = e.x.eval(&x).norm();
    let radius = params.positive("radius", a.radius, (0.5 * speed).min(0.5 * e.domain().injectivity_radius()))?;
    let tol = params.positive("tol", a.common.tol, TOL)?;
    let opts = MapOptions { tol, ..MapOptions::default() };
    let map = PoincareMap::new(&e.x, &x, n, radius, opts)?;
    let draft = Draft::new("poincare", params);
    match map.hit(&q, true) {
        Ok(hit) => {
            let payload = json!({
                "base": vec_value(&x),
                "n": n,
                "source_radius": radius,
                "target_base": vec_value(map.target().base()),
                "q": vec_value(&q),
                "image": vec_value(&hit.point),
                "time": hit.time,
                "coords": vec_value(&hit.coords),
                "jacobian": hit.jacobian.as_ref().map(rows),
            });
            let summary = format!("P{} = {} after t = {:.9}", fmt_point(&q), fmt_point(&hit.point), hit.time);
            draft.done(true, payload, summary, None)
        }
        Err(
            err @ (PoincareError::NoHit { .. } | PoincareError::Tangency { .. } | PoincareError::OffSection { .. }),
        ) => {
            let payload = json!({ "base": vec_value(&x), "n": n, "q": vec_value(&q), "error": err.to_string() });
            draft.done(false, payload, err.to_string(), None)
        }
        Err(err) => Err(err.into()),
    }
}

pub fn bracket(e: &CatalogEntry, mut params: Params, a: &PointArgs) -> Result<Outcome, CliError> {
    let x = params.point("x", a.x.as_deref(), &e.base_point)?;
    let tol = params.positive("tol", a.common.tol, 1e-6)?;
    let y = e.companion()?;
    let br = lie_bracket(&e.x, y, &x)?;
    let norm = br.norm();
    let payload = json!({ "point": vec_value(&x), "bracket": vec_value(&br), "norm": norm });
    Draft::new("bracket", params).done(
        norm <= tol,
        payload,
        format!("|[X, Y]| = {norm:.3e} at {}", fmt_point(&x)),
        None,
    )
}

pub fn commute(e: &CatalogEntry, mut params: Params, a: &CommuteArgs) -> Result<Outcome, CliError> {
    let tol = params.positive("tol", a.common.tol, 1e-6)?;
    let times = params.list("times", a.times.as_deref(), &COMMUTE_TIMES)?;
    let (grid, label) = match a.per_axis {
        Some(k) => {
            params.record("per_axis", k);
            (e.domain().sample_grid(k), format!("uniform {k} per axis"))
        }
        None => (e.grid.clone(), "declared".to_string()),
    };
    let rep = commutation_residual(&e.x, e.companion()?, &grid, &times, tol, &label);
    let summary = format!(
        "bracket residual {:.3e}, flow residual {:.3e} over {} points (tol {tol:e})",
        rep.max_bracket, rep.max_flow, rep.points
    );
    Draft::new("commute", params).done(rep.verdict, to_value(&rep), summary, None)
}

pub fn recover(e: &CatalogEntry, mut params: Params, a: &RecoverArgs) -> Result<Outcome, CliError> {
    let x = params.point("x", a.x.as_deref(), &e.base_point)?;
    let tol = params.positive("tol", a.common.tol, 1e-6)?;
    let against = params.text("against", a.against.as_deref(), "x");
    let default_times: Vec<f64> = (1..=10).map(f64::from).collect();
    let times = params.list("times", a.times.as_deref(), &default_times)?;
    let y = e.companion()?;
    let den = match against.as_str() {
        "x" => &e.x,
        "base" => e.base.as_ref().ok_or_else(|| CliError::Usage(format!("{} declares no base field", e.name)))?,
        other => return Err(CliError::Usage(format!("--against takes x or base, got {other:?}"))),
    };
    let f = recover_f(den, y, &x)?;
    let ratio = |q: &Vector| recover_f(den, y, q).unwrap_or(f64::NAN);
    let drift = invariance_residual(&ratio, &e.x, &x, &times, TOL)?;
    let declared = e.invariant.as_ref().filter(|_| against == "x").map(|g| (f - g(&x)).abs());
    let passed = drift <= tol && declared.is_none_or(|d| d <= tol);
    let payload = json!({ "point": vec_value(&x), "f": f, "drift": drift, "times": times, "declared_gap": declared });
    let summary = format!("f{} = {f:.12} with drift {drift:.3e} along the flow", fmt_point(&x));
    Draft::new("recover-f", params).done(passed, payload, summary, None)
}

pub fn distortion(e: &CatalogEntry, mut params: Params, a: &DistortionArgs) -> Result<Outcome, CliError> {
    let x = params.point("x", a.x.as_deref(), &e.base_point)?;
    if a.y.is_none() && !params.has_config("y") {
        return Err(CliError::Usage("distortion needs --y".into()));
    }
    let y = params.point("y", a.y.as_deref(), &x)?;
    let n = params.count("N", a.n, 10)?;
    let dt = params.positive("dt", a.dt, 1.0)?;
    let tol = params.positive("tol", a.common.tol, TOL)?;
    let rec = normal_distortion(&e.x, &x, &y, n, dt, tol)?;
    let max = rec.series.iter().cloned().fold(0.0, f64::max);
    let summary = format!("{} steps, max Δ_n = {max:.3e}", rec.series.len());
    let csv = rec.to_csv();
    Draft::new("distortion", params).done(rec.interrupted.is_none(), to_value(&rec), summary, Some(csv))
}

pub fn und(e: &CatalogEntry, mut params: Params, a: &UndArgs) -> Result<Outcome, CliError> {
    let k = params.positive("K", a.k, 1.0)?;
    let n = params.count("N", a.n, 30)?;
    let dt = params.positive("dt", a.dt, 1.0)?;
    let tol = params.positive("tol", a.common.tol, TOL)?;
    let explicit = a.x.is_some() || a.y.is_some() || params.has_config("x");
    let (pairs, seed) = if explicit {
        let x = params.point("x", a.x.as_deref(), &e.base_point)?;
        let y = params.point("y", a.y.as_deref(), &x)?;
        (vec![(x, y)], None)
    } else {
        let seed = params.seed(a.common.seed)?;
        (sample_pairs(e, &mut params, &a.sampling, seed, 20, (0.01, 0.05))?, Some(seed))
    };
    let rep = und_probe(&e.x, &pairs, k, n, dt, tol);
    let summary = format!("{} of {} pairs exceed K = {k} within {n} steps", rep.achieved, rep.rows.len());
    let mut csv = String::from("index,achieved,time,max_delta\n");
    for r in &rep.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{:e}",
            r.index,
            r.achieved.map(|v| v.to_string()).unwrap_or_default(),
            r.time.map(|v| v.to_string()).unwrap_or_default(),
            r.max_delta
        );
    }
    let mut draft = Draft::new("und", params);
    draft.seed = seed;
    draft.done(!rep.rows.is_empty() && rep.achieved == rep.rows.len(), to_value(&rep), summary, Some(csv))
}

pub fn separating(e: &CatalogEntry, mut params: Params, a: &SeparatingArgs) -> Result<Outcome, CliError> {
    let eps = params.positive("eps", a.eps, 0.1)?;
    let horizon = params.positive("T", a.horizon, 50.0)?;
    let tol = params.positive("tol", a.common.tol, TOL)?;
    let seed = params.seed(a.common.seed)?;
    let pairs = sample_pairs(e, &mut params, &a.sampling, seed, 100, (eps / 4.0, eps / 2.0))?;
    let rep = separating_probe(&e.x, eps, horizon, &pairs, Some(seed), tol);
    let expected = e.tags.separating;
    let passed = match expected {
        Some(sep) => (rep.witnesses == 0) == sep,
        None => rep.witnesses == 0,
    };
    let summary = format!(
        "{} witnesses among {} pairs (eps {eps}, T {horizon}){}",
        rep.witnesses,
        pairs.len(),
        expected.map(|s| format!(", catalog expects separating = {s}")).unwrap_or_default()
    );
    let mut payload = to_value(&rep);
    payload["expected_separating"] = json!(expected);
    let mut draft = Draft::new("separating", params);
    draft.seed = Some(seed);
    draft.done(passed, payload, summary, None)
}

pub fn kinematic(e: &CatalogEntry, mut params: Params, a: &KinematicArgs) -> Result<Outcome, CliError> {
    let eps = params.positive("eps", a.eps, 0.1)?;
    let deltas = params.list("deltas", a.deltas.as_deref(), &[0.5, 0.1])?;
    let horizon = params.positive("T", a.horizon, 20.0)?;
    let tol = params.positive("tol", a.common.tol, TOL)?;
    let seed = params.seed(a.common.seed)?;
    let pairs = sample_pairs(e, &mut params, &a.sampling, seed, 20, (eps / 4.0, eps / 2.0))?;
    let rep = kinematic_probe(&e.x, eps, &deltas, horizon, &pairs, tol);
    let summary = format!("{} kinematic failures among {} pairs", rep.failures, pairs.len());
    let mut draft = Draft::new("kinematic", params);
    draft.seed = Some(seed);
    draft.done(rep.failures == 0, to_value(&rep), summary, None)
}

pub fn gradient_decay(e: &CatalogEntry, mut params: Params, a: &DecayArgs) -> Result<Outcome, CliError> {
    let f = e.invariant.as_ref().ok_or_else(|| CliError::Usage(format!("{} declares no first integral", e.name)))?;
    let default_saddle =
        e.x.singularities()
            .iter()
            .find(|s| s.kind == SingularityKind::Saddle)
            .map(|s| s.position())
            .ok_or_else(|| CliError::Usage(format!("{} declares no saddle", e.name)))?;
    let saddle = params.point("saddle", a.saddle.as_deref(), &default_saddle)?;
    let radii = params.list("radii", a.radii.as_deref(), &[0.1, 0.01, 0.001])?;
    let samples = params.count("samples", a.samples, 32)?;
    let tol = params.positive("tol", a.common.tol, TOL)?;
    let rep = gradient_decay_probe(&|q| f(q), None, &e.x, &saddle, &radii, samples, tol)?;
    let series: Vec<String> = rep.series.iter().map(|s| format!("{s:.3e}")).collect();
    let summary = format!("sup |∇f| on shrinking circles: {}", series.join(", "));
    Draft::new("gradient-decay", params).done(rep.monotone, to_value(&rep), summary, None)
}

pub fn birkhoff(e: Option<&CatalogEntry>, mut params: Params, a: &BirkhoffArgs) -> Result<Outcome, CliError> {
    let defaults = match e {
        Some(e) if e.name == "suspension_rotation" => (e.params[0], e.params[1]),
        Some(e) => return Err(CliError::Usage(format!("birkhoff needs a suspension entry, got {}", e.name))),
        None => (GOLDEN, 0.1),
    };
    let theta = params.num("theta", a.theta, defaults.0)?;
    let amp = params.num("amp", a.amp, defaults.1)?;
    if amp.abs() >= 1.0 {
        return Err(CliError::Usage(format!("|amp| must stay below 1 for a positive roof, got {amp}")));
    }
    let count = params.count("count", a.count, 6)?;
    let grid = params.count("grid", a.grid, 1000)?;
    let rep = birkhoff_deviation(&roof(amp), theta, count, grid)?;
    let summary = format!(
        "deviation {:.4e} at q = {} down to {:.4e} at q = {}",
        rep.deviations.first().copied().unwrap_or(f64::NAN),
        rep.denominators.first().copied().unwrap_or(0),
        rep.deviations.last().copied().unwrap_or(f64::NAN),
        rep.denominators.last().copied().unwrap_or(0)
    );
    let mut csv = String::from("q,deviation\n");
    for (q, d) in rep.denominators.iter().zip(&rep.deviations) {
        let _ = writeln!(csv, "{q},{d:e}");
    }
    Draft::new("birkhoff", params).done(rep.decreasing, to_value(&rep), summary, Some(csv))
}

fn certificate_grid() -> Vec<f64> {
    (-4..=4).filter(|&k| k != 0).map(|k| k as f64 / 4.0).collect()
}

fn certify_entry(e: &CatalogEntry, n_max: usize, disk_samples: usize) -> Result<(Value, Certified), CliError> {
    let cert = boundedness_certificate(&e.x, &e.certify_samples, &certificate_grid(), CertificateOptions::default())?;
    let cal = calibrate(&e.x, cert.c, &e.certify_samples, n_max, disk_samples, CALIBRATION_TOL)?;
    let certified = Certified { c: cert.c, alpha: cal.alpha, beta: cal.beta };
    let value = json!({ "certificate": cert.with_calibration(&cal).to_json(), "calibration": to_value(&cal) });
    Ok((value, certified))
}

pub fn certify(e: &CatalogEntry, mut params: Params, a: &CertifyArgs) -> Result<Outcome, CliError> {
    let x = params.point("x", a.x.as_deref(), &e.base_point)?;
    let n_max = params.count("n_max", a.n_max, 3)?;
    let disk_samples = params.count("disk_samples", a.disk_samples, 8)?;
    let band_samples = params.count("band_samples", a.band_samples, 40)?;
    params.record("t_grid", certificate_grid());
    let (mut payload, c) = certify_entry(e, n_max, disk_samples)?;
    let mut csv = String::new();
    let mut checks = Vec::new();
    let mut violations = 0;
    for n in 1..=n_max {
        let rep = hitting_time_bounds_check(&e.x, &x, n, band_samples, c.alpha, c.beta, c.c, CALIBRATION_TOL)?;
        violations += rep.violations;
        let table = rep.to_csv();
        let mut lines = table.lines();
        let header = lines.next().unwrap_or_default();
        if csv.is_empty() {
            let _ = writeln!(csv, "n,{header}");
        }
        for line in lines {
            let _ = writeln!(csv, "{n},{line}");
        }
        checks.push(to_value(&rep));
    }
    payload["hitting"] = Value::Array(checks);
    let summary = format!(
        "C = {:.6}, α = {}, β = {:.6e}; {violations} hitting-time violations for n ≤ {n_max}",
        c.c, c.alpha, c.beta
    );
    Draft::new("certify", params).done(violations == 0, payload, summary, Some(csv))
}

/// Budget, hypothesis and injectivity failures are verdicts, not operational errors.
fn perturb_verdict(draft: Draft, err: PerturbError, mut payload: Value) -> Result<Outcome, CliError> {
    let kind = match &err {
        PerturbError::EpsilonExceeded { .. } => "epsilon_exceeded",
        PerturbError::InfeasibleBudget(_) => "infeasible_budget",
        PerturbError::HypothesisUnverified(_) => "hypothesis_unverified",
        PerturbError::InjectivityFailure(_) => "injectivity_failure",
        _ => return Err(err.into()),
    };
    payload["error"] = json!({ "error": kind, "message": err.to_string() });
    let summary = format!("{kind}: {err}");
    draft.done(false, payload, summary, None)
}

pub fn perturb_realize(e: &CatalogEntry, mut params: Params, a: &RealizeArgs) -> Result<Outcome, CliError> {
    let p = params.point("x", a.x.as_deref(), &e.base_point)?;
    let n0 = params.count("n0", a.n0, 2)?;
    let r = params.positive("radius", a.radius, 1e-3)?;
    let gain = params.num("gain", a.gain, 0.01)?;
    let eps = params.positive("eps", a.eps, 1.0)?;
    let delta1 = params.positive("delta1", a.delta1, eps / 2.0)?;
    let alpha = params.positive("alpha", a.alpha, 0.25)?;
    let identity = params.switch("identity", a.identity)?;
    let per_slice = params.count("per_slice", a.per_slice, 5)?;
    let k = e.x.dim() - 1;
    let opts = MapOptions::default();
    let u = Ball::centered(k, r);
    let draft = Draft::new("perturb-realize", params);
    let base = json!({ "p": vec_value(&p), "n0": n0, "radius": r });
    let run = || -> Result<_, PerturbError> {
        let tube = TubeRegion::new(&e.x, &p, u.clone(), n0, opts)?;
        let bundle = if identity {
            PerturbationBundle::identity(tube.orbit(), u.clone())?
        } else {
            let a = tube.orbit().cocycle()?;
            let pert = cocycle_perturbation(
                &a,
                &u,
                &Ball::centered(k, r / 4.0),
                gain,
                delta1,
                None,
                CocycleOptions::default(),
            )?;
            PerturbationBundle::from_cocycle(tube.orbit(), &pert, delta1)?
        };
        let lifted = lift_perturbation(&e.x, &bundle, opts)?;
        let real = realize(&lifted, &tube, BumpProfile::default(), eps, RealizeOptions::new(alpha, 2.0 * r))?;
        let csv = real.to_csv(per_slice, 4 * n0)?;
        Ok((real.report, csv))
    };
    match run() {
        Ok((rep, csv)) => {
            let summary = format!(
                "d_C1(X, Y) = {:.4e} < {eps}, fidelity {:.3e}, hitting times in [{:.4}, {:.4}]",
                rep.c1_distance, rep.fidelity_max, rep.hitting_times.0, rep.hitting_times.1
            );
            let mut payload = base;
            payload["realization"] = to_value(&rep);
            draft.done(rep.passed(), payload, summary, Some(csv))
        }
        Err(err) => perturb_verdict(draft, err, base),
    }
}

pub fn distort_pair_cmd(e: &CatalogEntry, mut params: Params, a: &DistortArgs) -> Result<Outcome, CliError> {
    let p = params.point("x", a.x.as_deref(), &e.base_point)?;
    let r = params.positive("radius", a.radius, 5e-5)?;
    let frame = normal_frame(&e.x, &p)?;
    let default_point = &p + frame.basis().column(0) * (3.0 * r);
    let point = params.point("point", a.point.as_deref(), &default_point)?;
    let dr = params.positive("delta_radius", a.delta_radius, r / 4.0)?;
    let k = params.num("K", a.k, 0.5)?;
    let eps = params.positive("eps", a.eps, 2.0)?;
    let eta = params.positive("eta", a.eta, 0.1)?;
    let horizon = params.positive("horizon", a.horizon, 20.0)?;
    let (cert, certified) = certify_entry(e, 3, 8)?;
    let d = e.x.dim() - 1;
    let spec = DistortSpec {
        p: p.clone(),
        u: Ball::centered(d, r),
        delta: Ball::centered(d, dr),
        x: point.clone(),
        threshold: k,
        epsilon: eps,
        eta,
        horizon,
        certified,
    };
    let draft = Draft::new("distort-pair", params);
    let base = json!({ "certified": cert });
    match distort_pair(&e.x, &spec, PipelineOptions::default()) {
        Ok((_, rep)) => {
            let mut csv = String::from("y_index,n,distortion\n");
            for (i, row) in rep.pairs.iter().enumerate() {
                for (n, v) in row.distortion.iter().enumerate() {
                    let _ = writeln!(csv, "{i},{},{v:e}", n + 1);
                }
            }
            let worst = rep.pairs.iter().filter_map(|row| row.distortion.last()).cloned().fold(f64::INFINITY, f64::min);
            let summary = format!(
                "branch {}, n0 = {}, min distortion at n0 {worst:.4e} vs K = {k}, d_C1 {:.4e} < {eps}",
                rep.branch,
                rep.n0,
                rep.realization.as_ref().map(|r| r.c1_distance).unwrap_or(0.0)
            );
            let mut payload = base;
            payload["report"] = to_value(&rep);
            draft.done(rep.passed(), payload, summary, Some(csv))
        }
        Err(err) => perturb_verdict(draft, err, base),
    }
}

pub fn catalog_list(mut params: Params, a: &ListArgs) -> Result<Outcome, CliError> {
    let verify = params.switch("verify", a.verify)?;
    let entries = NAMES.iter().map(|n| catalog_get(n)).collect::<Result<Vec<_>, _>>()?;
    let summaries: Vec<Value> = entries.iter().map(|e| to_value(&e.summary())).collect();
    let draft = Draft::new("catalog-list", params);
    if !verify {
        let summary = format!("{} entries: {}", entries.len(), NAMES.join(", "));
        return draft.done(true, json!({ "entries": summaries }), summary, None);
    }
    let checks: Vec<_> = entries.iter().flat_map(verify_entry).collect();
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| format!("{}/{}", c.entry, c.check)).collect();
    let mut csv = String::from("entry,check,passed,seconds,detail\n");
    for c in &checks {
        let _ =
            writeln!(csv, "{},{},{},{:.3},\"{}\"", c.entry, c.check, c.passed, c.seconds, c.detail.replace('"', "'"));
    }
    let summary = if failed.is_empty() {
        format!("{} checks over {} entries passed", checks.len(), entries.len())
    } else {
        format!("{} of {} checks failed: {}", failed.len(), checks.len(), failed.join(", "))
    };
    draft.done(failed.is_empty(), json!({ "entries": summaries, "checks": to_value(&checks) }), summary, Some(csv))
}
