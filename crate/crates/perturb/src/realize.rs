use std::fmt::Write as _;
use std::sync::Arc;

use geometry_flow::{min_singular, spectral_norm, Matrix, Vector, VectorField};
use poincare::{PoincareMap, SectionDisk};
use rayon::prelude::*;
use serde::Serialize;

use crate::{Ball, BumpProfile, FiberMap, InjectivityReport, LiftedPerturbation, PerturbError, TubeRegion};

struct Step {
    map: FiberMap,
    /// `P_{p,i−1}`: normal coordinates at `p` to the frame of the bump.
    to_frame: Matrix,
    /// `P_{p,i}^{-1} A_i`: bump displacements back to coordinates at `p`.
    back: Matrix,
}

struct Core {
    field: VectorField,
    tube: TubeRegion,
    chi: BumpProfile,
    steps: Vec<Step>,
}

impl Core {
    /// `Y(q) − X(q)` inside the active part of the tube, `None` elsewhere.
    fn displacement(&self, q: &Vector) -> Option<Vector> {
        let n = self.steps.len();
        let t = self.tube.slice_of(q)?;
        if !(t > 0.0 && t < n as f64) {
            return None;
        }
        let i = (t.ceil() as usize).clamp(1, n);
        let s = t - (i - 1) as f64;
        let dchi = self.chi.derivative(s);
        if dchi == 0.0 {
            return None;
        }
        let step = &self.steps[i - 1];
        let bump = step.map.bump.as_ref()?;
        let chart = self.tube.chart_at(q, t, true).ok()?;
        let xi = &chart.xi;
        if !self.tube.set().contains(xi) || !bump.contains_support(&(&step.to_frame * xi)) {
            return None;
        }
        let c = self.chi.value(s);
        let k = xi.len();
        let shift = |v: &Vector| {
            let w = &step.to_frame * v;
            &step.back * (bump.eval(&w) - w)
        };
        let mut v = xi.clone();
        for _ in 0..60 {
            let r = &v + shift(&v) * c - xi;
            if r.norm() <= 1e-15 * (1.0 + xi.norm()) {
                break;
            }
            let w = &step.to_frame * &v;
            let dm = bump.jacobian(&w) - Matrix::identity(k, k);
            let jac = Matrix::identity(k, k) + &step.back * dm * &step.to_frame * c;
            v -= jac.lu().solve(&r)?;
        }
        let delta = shift(&v);
        let base = chart.slice_disk.base();
        let u = chart.slice_disk.frame().direction();
        let xt = self.field.eval(base);
        let dx = self.field.jacobian(base).ok()?;
        let w = self.field.domain().log(base, q);
        let udot = &dx * u - u * u.dot(&(&dx * u));
        let rate = u.dot(&self.field.eval(q)) / (xt.norm() - w.dot(&udot));
        let jinv = chart.jacobian?.try_inverse()?;
        Some(chart.slice_disk.frame().basis() * jinv * delta * (dchi * rate))
    }

    fn eval(&self, q: &Vector) -> Vector {
        let x = self.field.eval(q);
        match self.displacement(q) {
            Some(d) => x + d,
            None => x,
        }
    }

    /// `DX(q)` plus central differences of the displacement, exact where it vanishes nearby.
    fn jacobian(&self, q: &Vector, h: f64) -> Matrix {
        let d = q.len();
        let mut m = self.field.jacobian(q).unwrap_or_else(|_| Matrix::from_element(d, d, f64::NAN));
        let zero = Vector::zeros(d);
        for j in 0..d {
            let mut plus = q.clone();
            let mut minus = q.clone();
            plus[j] += h;
            minus[j] -= h;
            let a = self.displacement(&plus);
            let b = self.displacement(&minus);
            if a.is_none() && b.is_none() {
                continue;
            }
            let col = (a.unwrap_or_else(|| zero.clone()) - b.unwrap_or_else(|| zero.clone())) / (plus[j] - minus[j]);
            let mut c = m.column_mut(j);
            c += col;
        }
        m
    }
}

/// Builds the perturbed field `Y` realizing the lifted maps along the tube.
///
/// Inside the tube, with `q = Φ(ξ, t)` on slice `t ∈ (i−1, i)` and `s = t − (i−1)`,
/// `ξ = v + χ(s)(ĝ_i(v) − v)` is solved for `v` and
/// `Y(q) = X(q) + χ′(s)·ṫ(q)·DΦ·(ĝ_i(v) − v)`, where `ṫ` is the slice rate of `X` at `q`.
/// Elsewhere `Y(q) = X(q)` by branch.
pub fn perturbed_field(
    lifted: &LiftedPerturbation,
    tube: &TubeRegion,
    chi: BumpProfile,
) -> Result<VectorField, PerturbError> {
    let bundle = lifted.bundle();
    let orbit = tube.orbit();
    if bundle.steps != tube.steps() || bundle.u != *tube.set() {
        return Err(PerturbError::InvalidInput("bundle and tube disagree on U or n".into()));
    }
    let mut steps = Vec::with_capacity(bundle.steps);
    let mut min_sigma: f64 = 1.0;
    for (i, map) in bundle.maps.iter().enumerate() {
        let to_frame = orbit.lpf(i).matrix.clone();
        let inv = orbit.lpf(i + 1).inverse().ok_or_else(|| PerturbError::InvalidInput("singular frame".into()))?;
        min_sigma = min_sigma.min(min_singular(&to_frame));
        steps.push(Step { map: map.clone(), to_frame, back: inv * &map.matrix });
    }
    let field = lifted.field().clone();
    let h = 1e-3 * bundle.u.radius * min_sigma;
    let core = Arc::new(Core { field: field.clone(), tube: tube.clone(), chi, steps });
    let (c1, c2) = (core.clone(), core);
    Ok(VectorField::new(format!("{}+perturbation", field.name()), field.domain().clone(), move |q| c1.eval(q))
        .with_jacobian(move |q| c2.jacobian(q, h))
        .with_singularities(field.singularities().to_vec())
        .with_fd_step_cap(h))
}

#[derive(Debug, Clone, Serialize)]
pub struct StepFidelity {
    pub step: usize,
    pub samples: usize,
    pub max_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RealizationReport {
    pub injectivity: InjectivityReport,
    pub support_samples: usize,
    pub support_exact: bool,
    pub fidelity: Vec<StepFidelity>,
    pub fidelity_max: f64,
    pub c0_distance: f64,
    pub c1_distance: f64,
    pub epsilon: f64,
    pub hitting_times: (f64, f64),
    pub band: (f64, f64),
    pub checks: [bool; 4],
}

impl RealizationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| *c)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RealizeOptions {
    pub alpha: f64,
    /// Radius of the source disk at `p` for the hitting-time band.
    pub source_radius: f64,
    pub fidelity_samples: usize,
    pub fidelity_tol: f64,
    pub per_slice: usize,
}

impl RealizeOptions {
    pub fn new(alpha: f64, source_radius: f64) -> Self {
        Self { alpha, source_radius, fidelity_samples: 50, fidelity_tol: 1e-6, per_slice: 16 }
    }
}

#[derive(Debug, Clone)]
pub struct Realization {
    pub field: VectorField,
    pub tube: TubeRegion,
    pub report: RealizationReport,
}

/// Realizes the lifted maps by a field `Y` supported in the tube and verifies support
/// exactness, fidelity of the re-integrated Poincaré maps, `d_{C¹}(X, Y) < ε` and the
/// hitting-time band.
pub fn realize(
    lifted: &LiftedPerturbation,
    tube: &TubeRegion,
    chi: BumpProfile,
    epsilon: f64,
    opts: RealizeOptions,
) -> Result<Realization, PerturbError> {
    let n = tube.steps();
    let injectivity = tube.injectivity_certificate(opts.alpha, opts.per_slice, 4 * n)?;
    if !injectivity.passed {
        return Err(PerturbError::InjectivityFailure(format!(
            "min separation {:e}, round trip {:e}, hitting times {:?} vs band {:?}",
            injectivity.min_separation, injectivity.max_roundtrip, injectivity.hitting_times, injectivity.band
        )));
    }
    let y = perturbed_field(lifted, tube, chi)?;
    let x = lifted.field();

    let outside = outside_samples(tube, opts.per_slice)?;
    let support_exact = outside.par_iter().all(|q| y.eval(q) == x.eval(q));

    let fidelity: Vec<StepFidelity> = (1..=n)
        .into_par_iter()
        .map(|i| step_fidelity(lifted, &y, i, opts.fidelity_samples))
        .collect::<Result<_, _>>()?;
    let fidelity_max = fidelity.iter().map(|f| f.max_error).fold(0.0, f64::max);

    let (c0_distance, c1_distance) = field_distance(x, &y, tube, opts.per_slice)?;

    let source = SectionDisk::new(x, tube.orbit().base(), opts.source_radius)?;
    let target = lifted.disk(n).clone();
    let map = PoincareMap::between(&y, source.clone(), target, n as f64, lifted.options());
    let k = x.dim() - 1;
    let times: Vec<f64> = poincare::disk_points(k, opts.source_radius, opts.fidelity_samples)
        .par_iter()
        .map(|xi| map.hit(&source.point(xi), false).map(|h| h.time).unwrap_or(f64::NAN))
        .collect();
    let lo = times.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let band = (n as f64 - opts.alpha, n as f64 + opts.alpha);
    let in_band = times.iter().all(|t| *t >= band.0 && *t <= band.1);

    let report = RealizationReport {
        injectivity,
        support_samples: outside.len(),
        support_exact,
        fidelity,
        fidelity_max,
        c0_distance,
        c1_distance,
        epsilon,
        hitting_times: (lo, hi),
        band,
        checks: [support_exact, fidelity_max <= opts.fidelity_tol, c1_distance < epsilon, in_band],
    };
    if !(c1_distance < epsilon) {
        return Err(PerturbError::EpsilonExceeded { attained: c1_distance, budget: epsilon });
    }
    Ok(Realization { field: y, tube: tube.clone(), report })
}

/// Points on the slices just outside the tube, at several distances, plus the base
/// sections beyond both ends.
fn outside_samples(tube: &TubeRegion, per_slice: usize) -> Result<Vec<Vector>, PerturbError> {
    let u = tube.set();
    let c = u.center_vec();
    let orbit = tube.orbit();
    let n = tube.steps() as f64;
    let k = u.dim();
    let mut params = Vec::new();
    for j in 0..=4 * tube.steps() {
        let t = n * j as f64 / (4 * tube.steps()).max(1) as f64;
        for scale in [1.02, 1.5, 3.0] {
            for dir in Ball::centered(k, 1.0).samples(per_slice) {
                let norm = dir.norm();
                if norm > 0.0 {
                    params.push((&c + dir * (scale * u.radius / norm), t));
                }
            }
        }
    }
    let mut pts: Vec<Vector> = params.into_par_iter().filter_map(|(xi, t)| orbit.forward(&xi, t).ok()).collect();
    for t in [n + 0.05, n + 0.2] {
        if let Some(q) = orbit.point(t) {
            pts.push(q);
        }
    }
    pts.retain(|q| !tube.contains(q));
    Ok(pts)
}

fn step_fidelity(
    lifted: &LiftedPerturbation,
    y: &VectorField,
    i: usize,
    samples: usize,
) -> Result<StepFidelity, PerturbError> {
    let u = lifted.bundle().u.clone();
    let grid = Ball::new(u.center.clone(), 1.2 * u.radius).samples(samples);
    let map = PoincareMap::between(y, lifted.disk(i - 1).clone(), lifted.disk(i).clone(), 1.0, lifted.options());
    let mut max_error: f64 = 0.0;
    for xi in &grid {
        let q = lifted.section_point(i - 1, xi)?;
        let target = lifted.eval(i, &q)?;
        let (image, _) = map.evaluate(&q)?;
        max_error = max_error.max(y.domain().distance(&image, &target));
    }
    Ok(StepFidelity { step: i, samples: grid.len(), max_error })
}

/// Sampled `(sup ‖Y − X‖, sup ‖Y − X‖ + sup ‖DY − DX‖)` over tube points.
fn field_distance(
    x: &VectorField,
    y: &VectorField,
    tube: &TubeRegion,
    per_slice: usize,
) -> Result<(f64, f64), PerturbError> {
    let pts = tube.sample_points(per_slice, 16 * tube.steps())?;
    let rows: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|(_, _, q)| -> Result<(f64, f64), PerturbError> {
            let c0 = (y.eval(q) - x.eval(q)).norm();
            let c1 = spectral_norm(&(y.jacobian(q)? - x.jacobian(q)?));
            Ok((c0, c1))
        })
        .collect::<Result<_, _>>()?;
    let c0 = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let c1 = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok((c0, c0 + c1))
}

impl Realization {
    /// CSV rows `slice, xi_1.., q_1.., (Y−X)_1..` over sampled tube points.
    pub fn to_csv(&self, per_slice: usize, slices: usize) -> Result<String, PerturbError> {
        let pts = self.tube.sample_points(per_slice, slices)?;
        let x = self.tube.orbit().field();
        let mut out = String::new();
        let k = self.tube.set().dim();
        let d = k + 1;
        let mut header = vec!["slice".to_string()];
        header.extend((1..=k).map(|j| format!("xi_{j}")));
        header.extend((1..=d).map(|j| format!("q_{j}")));
        header.extend((1..=d).map(|j| format!("dy_{j}")));
        let _ = writeln!(out, "{}", header.join(","));
        for (xi, t, q) in pts {
            let dy = self.field.eval(&q) - x.eval(&q);
            let row: Vec<String> = std::iter::once(t)
                .chain(xi.iter().cloned())
                .chain(q.iter().cloned())
                .chain(dy.iter().cloned())
                .map(|v| format!("{v:.17e}"))
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        Ok(out)
    }
}
