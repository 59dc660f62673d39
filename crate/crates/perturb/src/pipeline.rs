use std::sync::Arc;

use geometry_flow::{orbit, spectral_norm, IntegratorOptions, Matrix, Vector, VectorField};
use poincare::{disk_points, LinearPoincareOp, LinearizingChart, MapOptions, PoincareMap, SectionDisk};
use rayon::prelude::*;
use serde::Serialize;

use crate::{
    cocycle_perturbation, lift_perturbation, realize, Ball, BaseOrbit, BumpProfile, CocycleOptions, LiftedPerturbation,
    PerturbError, PerturbationBundle, RealizationReport, RealizeOptions, TubeRegion,
};

/// `C`, `α`, `β` from the boundedness certificate and its calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certified {
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Certified {
    /// Budget `δ(C, ε) = ε / (C·‖χ‖_{C¹})` on the transverse maps.
    pub fn delta(&self, epsilon: f64, chi: &BumpProfile) -> f64 {
        epsilon / (self.c * chi.c1_norm())
    }

    /// Source radius factor `ρ₀ = β / Cⁿ` for a tube of `n` steps.
    pub fn rho(&self, n: usize) -> f64 {
        self.beta / self.c.powi(n as i32)
    }
}

/// Inputs of `distort_pair`. `U` and `Δ` are balls in normal coordinates at `p`.
#[derive(Debug, Clone)]
pub struct DistortSpec {
    pub p: Vector,
    pub u: Ball,
    pub delta: Ball,
    pub x: Vector,
    pub threshold: f64,
    pub epsilon: f64,
    pub eta: f64,
    /// Orbit-avoidance horizon for `x`.
    pub horizon: f64,
    pub certified: Certified,
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineOptions {
    pub map: MapOptions,
    pub cocycle: CocycleOptions,
    pub chi: BumpProfile,
    /// Most steps the tube may take.
    pub step_cap: usize,
    pub pair_samples: usize,
    pub psi_samples: usize,
    pub map_samples: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            map: MapOptions::default(),
            cocycle: CocycleOptions::default(),
            chi: BumpProfile::default(),
            step_cap: 24,
            pair_samples: 25,
            psi_samples: 16,
            map_samples: 17,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Hypotheses {
    /// `Δ ⊂ U ⊂ N(ρ₀‖X(p)‖)` with the attained extent of `U` and the allowed radius.
    pub radii: bool,
    pub u_extent: f64,
    pub allowed_radius: f64,
    pub injective: bool,
    /// Crossings of the section at `p` by the orbit of `x`, `(time, |ξ − c_U|)`, inside the closure of `U`.
    pub avoidance: bool,
    pub crossings: Vec<(f64, f64)>,
    pub horizon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairRow {
    pub y: Vec<f64>,
    /// `|log det P^Y_{x,n} − log det P^Y_{y,n}|` for `n = 1..=n₀`.
    pub distortion: Vec<f64>,
    pub first_above: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepControl {
    pub step: usize,
    pub c1: f64,
    pub c0_times: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortReport {
    pub branch: &'static str,
    pub threshold: f64,
    pub target: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub delta: f64,
    pub delta1: f64,
    pub n0: usize,
    pub psi_max: f64,
    pub unperturbed_gap: f64,
    pub gains: Vec<f64>,
    pub hypotheses: Hypotheses,
    pub realization: Option<RealizationReport>,
    pub steps: Vec<StepControl>,
    pub pairs: Vec<PairRow>,
    /// Support, `C¹` closeness, `δ`-closeness of the step maps, `C⁰` closeness of the
    /// time-`t` maps, and distortion above `K` at every sampled `y`.
    pub conclusions: [bool; 5],
}

impl DistortReport {
    pub fn passed(&self) -> bool {
        self.hypotheses.radii
            && self.hypotheses.injective
            && self.hypotheses.avoidance
            && self.conclusions.iter().all(|c| *c)
    }
}

/// Perturbs `X` inside a tube over `U` so that `x` and every point of `Δ` separate in
/// normal log-det by more than `K` within `n₀` steps.
pub fn distort_pair(
    field: &VectorField,
    spec: &DistortSpec,
    opts: PipelineOptions,
) -> Result<(VectorField, DistortReport), PerturbError> {
    let k = field.dim() - 1;
    if spec.u.dim() != k || spec.delta.dim() != k {
        return Err(PerturbError::InvalidInput(format!("U and Δ must live in dimension {k}")));
    }
    let room = spec.u.radius - (spec.delta.center_vec() - spec.u.center_vec()).norm();
    if !(spec.delta.radius > 0.0 && room > spec.delta.radius) {
        return Err(PerturbError::InvalidInput("Δ must lie inside U with a positive margin".into()));
    }
    if !(spec.threshold >= 0.0 && spec.epsilon > 0.0 && spec.eta > 0.0) {
        return Err(PerturbError::InvalidInput("need K ≥ 0, ε > 0, η > 0".into()));
    }
    let cert = spec.certified;
    let delta = cert.delta(spec.epsilon, &opts.chi);
    let delta1 = 0.9 * delta;
    let speed = field.eval(&spec.p).norm();
    let extent = spec.u.center_vec().norm() + spec.u.radius;

    let long = BaseOrbit::new(field, &spec.p, opts.step_cap, opts.map)?;
    let cocycle = long.cocycle()?;
    let x_series = logdet_series(field, &spec.x, opts.step_cap, opts.map);
    let gap_until = |n: usize| -> f64 {
        x_series.iter().take(n).enumerate().map(|(i, l)| (long.lpf(i + 1).logabsdet - l).abs()).fold(0.0, f64::max)
    };

    if spec.threshold == 0.0 {
        return unchanged(field, spec, "trivial", Vec::new(), delta, delta1, 0.0);
    }

    let mut psi_max: f64 = 1.0;
    let mut gap: f64 = 0.0;
    let mut plan = None;
    for _ in 0..6 {
        let target = 1.2 * spec.threshold + gap + 4.0 * psi_max.ln();
        let pert =
            cocycle_perturbation(&cocycle, &spec.u, &spec.delta, target, delta1, Some(spec.eta / 2.0), opts.cocycle)?;
        let n0 = pert.n1;
        let radius = (cert.rho(n0) * speed).min(field.domain().injectivity_radius());
        if extent > radius {
            plan = Some((target, pert));
            break;
        }
        let psi = psi_bound(field, &spec.p, n0, extent.max(radius), opts)?;
        let g = gap_until(n0);
        let settled = psi <= psi_max && g <= gap;
        psi_max = psi_max.max(psi);
        gap = gap.max(g);
        plan = Some((target, pert));
        if settled {
            break;
        }
    }
    let n_plan = plan.as_ref().map_or(0, |p| p.1.n1);
    let pairs = pair_rows(field, &spec.p, &spec.delta, &spec.x, n_plan, spec.threshold, opts)?;
    if pairs.iter().all(|r| r.first_above.is_some()) {
        return unchanged(field, spec, "unperturbed", pairs, delta, delta1, gap);
    }

    let (target, pert) = plan.expect("at least one round");
    let n0 = pert.n1;
    let allowed = cert.rho(n0) * speed;
    let orbit = Arc::new(BaseOrbit::new(field, &spec.p, n0, opts.map)?);
    let tube = TubeRegion::on_orbit(orbit.clone(), spec.u.clone())?;
    let (avoidance, crossings) = avoidance(field, &spec.p, &spec.u, &spec.x, spec.horizon, n0, cert.alpha, opts.map)?;
    let mut hyp = Hypotheses {
        radii: extent <= allowed,
        u_extent: extent,
        allowed_radius: allowed,
        injective: false,
        avoidance,
        crossings,
        horizon: spec.horizon,
    };
    if !hyp.avoidance {
        return Err(PerturbError::HypothesisUnverified(format!(
            "the orbit of x crosses U at times {:?} within horizon {}",
            hyp.crossings.iter().map(|c| c.0).collect::<Vec<_>>(),
            spec.horizon
        )));
    }
    if !hyp.radii {
        return Err(PerturbError::HypothesisUnverified(format!(
            "U reaches {extent:e} but the calibrated source radius for {n0} steps is {allowed:e}"
        )));
    }

    let bundle = PerturbationBundle::from_cocycle(&orbit, &pert, delta1)?;
    let lifted = lift_perturbation(field, &bundle, opts.map)?;
    let realized = realize(
        &lifted,
        &tube,
        opts.chi,
        spec.epsilon,
        RealizeOptions::new(cert.alpha, allowed.min(field.domain().injectivity_radius())),
    )?;
    hyp.injective = realized.report.injectivity.passed;
    let y = realized.field.clone();

    let steps = step_controls(field, &y, &lifted, &orbit, cert.beta * speed, opts)?;
    let pairs = pair_rows(&y, &spec.p, &spec.delta, &spec.x, n0, spec.threshold, opts)?;
    let rep = &realized.report;
    let conclusions = [
        rep.support_exact,
        rep.c1_distance < spec.epsilon,
        steps.iter().all(|s| s.c1 < delta),
        steps.iter().all(|s| s.c0_times.iter().all(|(_, d)| *d < spec.eta)),
        pairs.iter().all(|r| r.first_above.is_some()),
    ];
    let report = DistortReport {
        branch: "perturbed",
        threshold: spec.threshold,
        target,
        epsilon: spec.epsilon,
        eta: spec.eta,
        delta,
        delta1,
        n0,
        psi_max,
        unperturbed_gap: gap,
        gains: pert.gains.clone(),
        hypotheses: hyp,
        realization: Some(realized.report),
        steps,
        pairs,
        conclusions,
    };
    Ok((y, report))
}

/// `log|det P_{pt,i}|` for `i = 1..=n`, one unit step at a time; stops early if the
/// orbit leaves the chart.
fn logdet_series(field: &VectorField, pt: &Vector, n: usize, opts: MapOptions) -> Vec<f64> {
    let iopts = IntegratorOptions::new(opts.tol).with_max_step(opts.max_step);
    let mut out = Vec::with_capacity(n);
    let mut q = pt.clone();
    let mut phi = Matrix::identity(pt.len(), pt.len());
    for i in 1..=n {
        let Ok(seg) = orbit(field, &q, 1.0, iopts, true) else { break };
        let (Some(next), Some(step)) = (seg.point(1.0), seg.tangent(1.0)) else { break };
        phi = step * phi;
        q = next;
        match LinearPoincareOp::from_tangent(field, pt, &q, &phi, i as f64) {
            Ok(l) => out.push(l.logabsdet),
            Err(_) => break,
        }
    }
    out
}

/// Largest of the four `Ψ` quantities over the charts `i = 0..=n`.
fn psi_bound(
    field: &VectorField,
    p: &Vector,
    n: usize,
    radius: f64,
    opts: PipelineOptions,
) -> Result<f64, PerturbError> {
    let speed = field.eval(p).norm();
    let rho = radius / speed;
    let r = field.domain().injectivity_radius();
    (1..=n)
        .into_par_iter()
        .map(|i| -> Result<f64, PerturbError> {
            let chart = LinearizingChart::new(field, p, i as f64, radius.min(r), opts.map)?;
            Ok(chart.bounds_over_disk(rho, opts.psi_samples)?.max())
        })
        .try_reduce(|| 1.0, |a, b| Ok(a.max(b)))
}

/// Crossings of the section at `p` by the orbit of `x` over `[−horizon − n − α, horizon]`
/// that land in the closure of `U`; any such crossing puts `x` in the tube within the horizon.
#[allow(clippy::too_many_arguments)]
fn avoidance(
    field: &VectorField,
    p: &Vector,
    u: &Ball,
    x: &Vector,
    horizon: f64,
    n: usize,
    alpha: f64,
    opts: MapOptions,
) -> Result<(bool, Vec<(f64, f64)>), PerturbError> {
    let disk = SectionDisk::new(field, p, field.domain().injectivity_radius())?;
    let iopts = IntegratorOptions::new(opts.tol).with_max_step(opts.max_step);
    let c = u.center_vec();
    let mut hits = Vec::new();
    for t1 in [horizon, -(horizon + n as f64 + alpha)] {
        let seg = orbit(field, x, t1, iopts, false)?;
        for s in seg.steps() {
            let (g0, g1) = (disk.height(&s.start_point()), disk.height(&s.end_point()));
            if g0 != 0.0 && (g0 > 0.0) == (g1 > 0.0) {
                continue;
            }
            let (mut a, mut b, mut ga) = (s.t0, s.t1(), g0);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let gm = disk.height(&s.point(m));
                if gm == 0.0 || (b - a).abs() <= 1e-14 * (1.0 + b.abs()) {
                    a = m;
                    b = m;
                    break;
                }
                if (gm > 0.0) == (ga > 0.0) {
                    a = m;
                    ga = gm;
                } else {
                    b = m;
                }
            }
            let t = 0.5 * (a + b);
            let q = field.domain().reduce(&s.point(t));
            let off = (disk.coords(&q) - &c).norm();
            if off <= u.radius * (1.0 + 1e-9) {
                hits.push((t, off));
            }
        }
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));
    hits.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-9);
    Ok((hits.is_empty(), hits))
}

/// For each section `i < n₀`: `d_{C¹}` between the step maps of `X` and `Y` and the `C⁰`
/// distance of the time-`t` maps to the slices at `i + t`, over the disk of radius
/// `β‖X‖` (coarse grid) and the image of `U` (fine grid).
fn step_controls(
    x: &VectorField,
    y: &VectorField,
    lifted: &LiftedPerturbation,
    orbit: &BaseOrbit,
    outer_radius: f64,
    opts: PipelineOptions,
) -> Result<Vec<StepControl>, PerturbError> {
    let n = lifted.steps();
    let u = &lifted.bundle().u;
    let r = x.domain().injectivity_radius();
    (0..n)
        .into_par_iter()
        .map(|i| -> Result<StepControl, PerturbError> {
            let src = lifted.disk(i).clone();
            let k = u.dim();
            let mut coords: Vec<Vector> = disk_points(k, outer_radius.min(0.9 * r), opts.map_samples);
            for xi in Ball::new(u.center.clone(), 1.1 * u.radius).samples(2 * opts.map_samples) {
                coords.push(src.coords(&lifted.section_point(i, &xi)?));
            }
            let h = 1e-3 * u.radius * spectral_norm(&orbit.lpf(i).matrix);
            let mx = PoincareMap::between(x, src.clone(), lifted.disk(i + 1).clone(), 1.0, opts.map);
            let my = PoincareMap::between(y, src.clone(), lifted.disk(i + 1).clone(), 1.0, opts.map);
            let mut c0: f64 = 0.0;
            let mut d1: f64 = 0.0;
            for a in &coords {
                let diff = |a: &Vector| -> Result<Vector, PerturbError> { Ok(my.lifted(a)? - mx.lifted(a)?) };
                c0 = c0.max(diff(a)?.norm());
                let mut jac = Matrix::zeros(k, k);
                for j in 0..k {
                    let mut plus = a.clone();
                    let mut minus = a.clone();
                    plus[j] += h;
                    minus[j] -= h;
                    jac.set_column(j, &((diff(&plus)? - diff(&minus)?) / (plus[j] - minus[j])));
                }
                d1 = d1.max(spectral_norm(&jac));
            }
            let mut c0_times = Vec::new();
            for t in [0.25, 0.5, 0.75, 1.0] {
                let target = orbit.slice_disk(i as f64 + t, r)?;
                let tx = PoincareMap::between(x, src.clone(), target.clone(), t, opts.map);
                let ty = PoincareMap::between(y, src.clone(), target, t, opts.map);
                let mut m: f64 = 0.0;
                for a in &coords {
                    let q = src.point(a);
                    let (px, _) = tx.evaluate(&q)?;
                    let (py, _) = ty.evaluate(&q)?;
                    m = m.max(x.domain().distance(&px, &py));
                }
                c0_times.push((t, m));
            }
            Ok(StepControl { step: i, c1: c0 + d1, c0_times })
        })
        .collect()
}

/// `|log det P^Y_{x,n} − log det P^Y_{y,n}|` for sampled `y ∈ Δ` and `n = 1..=n₀`.
fn pair_rows(
    y: &VectorField,
    p: &Vector,
    delta: &Ball,
    x: &Vector,
    n0: usize,
    threshold: f64,
    opts: PipelineOptions,
) -> Result<Vec<PairRow>, PerturbError> {
    let lx = logdet_series(y, x, n0, opts.map);
    let disk = SectionDisk::new(y, p, y.domain().injectivity_radius())?;
    delta
        .samples(opts.pair_samples)
        .par_iter()
        .map(|xi| -> Result<PairRow, PerturbError> {
            let pt = disk.point(xi);
            let distortion: Vec<f64> =
                logdet_series(y, &pt, n0, opts.map).iter().zip(&lx).map(|(a, b)| (a - b).abs()).collect();
            let first_above = distortion.iter().position(|d| *d > threshold).map(|i| i + 1);
            Ok(PairRow { y: pt.iter().cloned().collect(), distortion, first_above })
        })
        .collect()
}

/// `Y = X`: `K = 0`, or the unperturbed flow already separates `x` from all of `Δ`.
fn unchanged(
    field: &VectorField,
    spec: &DistortSpec,
    branch: &'static str,
    pairs: Vec<PairRow>,
    delta: f64,
    delta1: f64,
    gap: f64,
) -> Result<(VectorField, DistortReport), PerturbError> {
    let speed = field.eval(&spec.p).norm();
    let extent = spec.u.center_vec().norm() + spec.u.radius;
    let reached = pairs.iter().all(|r| r.first_above.is_some());
    let report = DistortReport {
        branch,
        threshold: spec.threshold,
        target: spec.threshold,
        epsilon: spec.epsilon,
        eta: spec.eta,
        delta,
        delta1,
        n0: pairs.iter().filter_map(|r| r.first_above).max().unwrap_or(0),
        psi_max: 1.0,
        unperturbed_gap: gap,
        gains: Vec::new(),
        hypotheses: Hypotheses {
            radii: extent <= spec.certified.beta * speed,
            u_extent: extent,
            allowed_radius: spec.certified.beta * speed,
            injective: true,
            avoidance: true,
            crossings: Vec::new(),
            horizon: spec.horizon,
        },
        realization: None,
        steps: Vec::new(),
        pairs,
        conclusions: [true, true, true, true, reached],
    };
    Ok((field.clone(), report))
}
