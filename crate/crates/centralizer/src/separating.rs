use geometry_flow::{
    DenseStep, DomainChart, Integrator, IntegratorOptions, SingularityKind, StepControl, Vector, VectorField,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::CentralizerError;

const SCAN_STEP: f64 = 0.01;
const SAME_ORBIT: f64 = 1e-8;

/// Dense orbit over `[0, t_end]` that tolerates being evaluated anywhere inside.
struct DenseOrbit {
    steps: Vec<DenseStep>,
    base: Vector,
    reach: f64,
}

impl DenseOrbit {
    fn new(field: &VectorField, p: &Vector, t_end: f64, tol: f64) -> Result<Self, CentralizerError> {
        let mut steps = Vec::new();
        Integrator::new(field, IntegratorOptions::new(tol)).solve(p, t_end, false, |s| {
            steps.push(s.clone());
            StepControl::Continue
        })?;
        Ok(Self { steps, base: p.clone(), reach: t_end })
    }

    fn at(&self, t: f64) -> Vector {
        if t == 0.0 || self.steps.is_empty() {
            return self.base.clone();
        }
        let fwd = self.reach > 0.0;
        let i = self.steps.partition_point(|s| if fwd { s.t1() < t } else { s.t1() > t });
        self.steps[i.min(self.steps.len() - 1)].point(t)
    }
}

/// Two-sided orbit of `x` over `[-s_max, s_max]`.
struct TwoSided {
    fwd: DenseOrbit,
    bwd: DenseOrbit,
}

impl TwoSided {
    fn new(field: &VectorField, p: &Vector, s_max: f64, tol: f64) -> Result<Self, CentralizerError> {
        let (a, b) = rayon::join(|| DenseOrbit::new(field, p, s_max, tol), || DenseOrbit::new(field, p, -s_max, tol));
        Ok(Self { fwd: a?, bwd: b? })
    }

    fn at(&self, s: f64) -> Vector {
        if s >= 0.0 {
            self.fwd.at(s)
        } else {
            self.bwd.at(s)
        }
    }
}

/// Smallest `|s| ≤ s_max` with `d(X_s(x), y) ≤ 1e-8`, found by a coarse scan plus golden-section refinement.
pub fn same_orbit(
    field: &VectorField,
    x: &Vector,
    y: &Vector,
    s_max: f64,
    tol: f64,
) -> Result<Option<f64>, CentralizerError> {
    let orbit = TwoSided::new(field, x, s_max, tol)?;
    Ok(same_orbit_on(&orbit, field.domain(), y, s_max))
}

fn same_orbit_on(orbit: &TwoSided, dom: &DomainChart, y: &Vector, s_max: f64) -> Option<f64> {
    let n = (s_max / SCAN_STEP).ceil() as i64;
    let h = s_max / n as f64;
    let dist = |s: f64| dom.distance(&orbit.at(s), y);
    let samples: Vec<(f64, f64)> = (-n..=n).map(|k| (k as f64 * h, dist(k as f64 * h))).collect();
    let mut best: Option<f64> = None;
    for k in 0..samples.len() {
        let left = if k > 0 { samples[k - 1].1 } else { f64::INFINITY };
        let right = samples.get(k + 1).map_or(f64::INFINITY, |s| s.1);
        if samples[k].1 > left || samples[k].1 > right {
            continue;
        }
        let a = samples[k].0 - h;
        let b = samples[k].0 + h;
        let (s, d) = golden_min(&dist, a.max(-s_max), b.min(s_max));
        if d <= SAME_ORBIT && best.is_none_or(|bs: f64| s.abs() < bs.abs()) {
            best = Some(s);
        }
    }
    best
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let s = 0.5 * (a + b);
    (s, f(s))
}

/// Ball around a sink (forward invariant) or source (backward invariant), checked on sampled boundary points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrappingBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub forward: bool,
}

impl TrappingBall {
    fn contains(&self, dom: &DomainChart, q: &Vector) -> bool {
        dom.distance(&Vector::from_column_slice(&self.center), q) < self.radius
    }
}

/// Verifies `⟨X(q), q − c⟩ < 0` (forward) or `> 0` (backward) on `samples` boundary points.
pub fn verify_trapping_ball(field: &VectorField, center: &Vector, radius: f64, forward: bool, samples: usize) -> bool {
    let d = field.dim();
    let dom = field.domain();
    let dirs: Vec<Vector> = if d == 2 {
        (0..samples)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / samples as f64;
                Vector::from_vec(vec![th.cos(), th.sin()])
            })
            .collect()
    } else {
        poincare::disk_points(d, 1.0, samples).into_iter().filter(|v| v.norm() > 0.1).map(|v| v.normalize()).collect()
    };
    dirs.iter().all(|u| {
        let q = dom.exp(center, &(u * radius));
        let s = field.eval(&q).dot(&dom.log(center, &q));
        if forward {
            s < 0.0
        } else {
            s > 0.0
        }
    })
}

/// Verified trapping balls of radius `< eps/2` around the field's declared sinks and sources.
pub fn trapping_balls(field: &VectorField, eps: f64) -> Vec<TrappingBall> {
    let mut out = Vec::new();
    for s in field.singularities() {
        let forward = match s.kind {
            SingularityKind::Sink => true,
            SingularityKind::Source => false,
            _ => continue,
        };
        let c = s.position();
        let mut r = 0.45 * eps;
        for _ in 0..20 {
            if verify_trapping_ball(field, &c, r, forward, 256) {
                out.push(TrappingBall { center: s.point.clone(), radius: r, forward });
                break;
            }
            r /= 2.0;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationWitness {
    pub index: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub eps: f64,
    pub horizon: f64,
    pub max_distance: f64,
    pub separated: bool,
    pub separation_time: Option<f64>,
    pub same_orbit: Option<f64>,
    /// Both directions ended inside a common verified trapping ball.
    pub certified_all_time: bool,
    pub forward_trapped_at: Option<f64>,
    pub backward_trapped_at: Option<f64>,
    pub error: Option<String>,
}

impl SeparationWitness {
    /// Non-separating evidence: stayed `eps`-close and not on the same orbit.
    pub fn is_witness(&self) -> bool {
        self.error.is_none() && !self.separated && self.same_orbit.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparatingReport {
    pub eps: f64,
    pub horizon: f64,
    pub seed: Option<u64>,
    pub trapping_balls: Vec<TrappingBall>,
    pub records: Vec<SeparationWitness>,
    pub witnesses: usize,
}

struct Scan {
    max_distance: f64,
    exceeded_at: Option<f64>,
    trapped_at: Option<f64>,
}

fn scan(dom: &DomainChart, ox: &DenseOrbit, oy: &DenseOrbit, t_end: f64, eps: f64, balls: &[TrappingBall]) -> Scan {
    let n = (t_end.abs() / SCAN_STEP).ceil().max(1.0) as usize;
    let mut worst = 0.0f64;
    for k in 0..=n {
        let t = t_end * k as f64 / n as f64;
        let (a, b) = (ox.at(t), oy.at(t));
        let d = dom.distance(&a, &b);
        worst = worst.max(d);
        if d >= eps {
            return Scan { max_distance: worst, exceeded_at: Some(t), trapped_at: None };
        }
        if balls.iter().any(|ball| (ball.forward == (t_end > 0.0)) && ball.contains(dom, &a) && ball.contains(dom, &b))
        {
            return Scan { max_distance: worst, exceeded_at: None, trapped_at: Some(t) };
        }
    }
    Scan { max_distance: worst, exceeded_at: None, trapped_at: None }
}

fn probe_pair(
    field: &VectorField,
    index: usize,
    x: &Vector,
    y: &Vector,
    eps: f64,
    horizon: f64,
    balls: &[TrappingBall],
    tol: f64,
) -> SeparationWitness {
    let mut w = SeparationWitness {
        index,
        x: x.iter().cloned().collect(),
        y: y.iter().cloned().collect(),
        eps,
        horizon,
        max_distance: 0.0,
        separated: false,
        separation_time: None,
        same_orbit: None,
        certified_all_time: false,
        forward_trapped_at: None,
        backward_trapped_at: None,
        error: None,
    };
    let dom = field.domain();
    let mut run = || -> Result<(), CentralizerError> {
        let mut sep = None;
        let mut trapped = [None, None];
        for (slot, t_end) in [horizon, -horizon].into_iter().enumerate() {
            let ox = DenseOrbit::new(field, x, t_end, tol)?;
            let oy = DenseOrbit::new(field, y, t_end, tol)?;
            let s = scan(dom, &ox, &oy, t_end, eps, balls);
            w.max_distance = w.max_distance.max(s.max_distance);
            trapped[slot] = s.trapped_at;
            if s.exceeded_at.is_some() {
                sep = s.exceeded_at;
                break;
            }
        }
        w.separated = sep.is_some();
        w.separation_time = sep;
        w.forward_trapped_at = trapped[0];
        w.backward_trapped_at = trapped[1];
        w.certified_all_time = !w.separated && trapped[0].is_some() && trapped[1].is_some();
        if !w.separated {
            w.same_orbit = same_orbit(field, x, y, 2.0 * horizon, tol)?;
        }
        Ok(())
    };
    if let Err(e) = run() {
        w.error = Some(e.to_string());
    }
    w
}

/// Looks for pairs that stay `eps`-close over `[-T, T]` without lying on one orbit.
pub fn separating_probe(
    field: &VectorField,
    eps: f64,
    horizon: f64,
    pairs: &[(Vector, Vector)],
    seed: Option<u64>,
    tol: f64,
) -> SeparatingReport {
    let balls = trapping_balls(field, eps);
    let records: Vec<SeparationWitness> =
        pairs.par_iter().enumerate().map(|(i, (x, y))| probe_pair(field, i, x, y, eps, horizon, &balls, tol)).collect();
    let witnesses = records.iter().filter(|w| w.is_witness()).count();
    SeparatingReport { eps, horizon, seed, trapping_balls: balls, records, witnesses }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinematicCase {
    pub delta: f64,
    pub stays_close: bool,
    pub failure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinematicRow {
    pub index: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub max_distance: f64,
    pub same_orbit: Option<f64>,
    pub cases: Vec<KinematicCase>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinematicReport {
    pub eps: f64,
    pub horizon: f64,
    pub deltas: Vec<f64>,
    pub rows: Vec<KinematicRow>,
    pub failures: usize,
}

/// Flags pairs that stay `δ`-close over `[-T, T]` yet are not `X_s`-related with `0 < |s| < ε`.
pub fn kinematic_probe(
    field: &VectorField,
    eps: f64,
    deltas: &[f64],
    horizon: f64,
    pairs: &[(Vector, Vector)],
    tol: f64,
) -> KinematicReport {
    let d_max = deltas.iter().cloned().fold(0.0, f64::max);
    let dom = field.domain();
    let rows: Vec<KinematicRow> = pairs
        .par_iter()
        .enumerate()
        .map(|(index, (x, y))| {
            let mut row = KinematicRow {
                index,
                x: x.iter().cloned().collect(),
                y: y.iter().cloned().collect(),
                max_distance: 0.0,
                same_orbit: None,
                cases: Vec::new(),
                error: None,
            };
            let run = |row: &mut KinematicRow| -> Result<(), CentralizerError> {
                for t_end in [horizon, -horizon] {
                    let ox = DenseOrbit::new(field, x, t_end, tol)?;
                    let oy = DenseOrbit::new(field, y, t_end, tol)?;
                    let s = scan(dom, &ox, &oy, t_end, d_max, &[]);
                    row.max_distance = row.max_distance.max(s.max_distance);
                    if s.exceeded_at.is_some() {
                        row.max_distance = row.max_distance.max(d_max);
                        break;
                    }
                }
                row.same_orbit = same_orbit(field, x, y, 2.0 * horizon, tol)?;
                Ok(())
            };
            if let Err(e) = run(&mut row) {
                row.error = Some(e.to_string());
            }
            let explained = row.same_orbit.is_some_and(|s| s.abs() < eps);
            row.cases = deltas
                .iter()
                .map(|&delta| {
                    let stays_close = row.error.is_none() && row.max_distance < delta;
                    KinematicCase { delta, stays_close, failure: stays_close && !explained }
                })
                .collect();
            row
        })
        .collect();
    let failures = rows.iter().filter(|r| r.cases.iter().any(|c| c.failure)).count();
    KinematicReport { eps, horizon, deltas: deltas.to_vec(), rows, failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use geometry_flow::{flow, Matrix, Singularity};

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn same_orbit_recovers_time_shift() {
        let f = VectorField::new("rot", DomainChart::annulus(0.5, 2.0, 0.5).unwrap(), |p| v(&[-p[1], p[0]]));
        let x = v(&[1.2, 0.0]);
        let y = flow(&f, &x, 0.3, 1e-12).unwrap();
        let s = same_orbit(&f, &x, &y, 2.0, 1e-12).unwrap().unwrap();
        assert!((s - 0.3).abs() < 1e-7);
        assert!(same_orbit(&f, &x, &v(&[1.3, 0.0]), 2.0, 1e-12).unwrap().is_none());
    }

    #[test]
    fn sink_ball_is_forward_invariant() {
        let f = VectorField::new("sink", DomainChart::boxed(vec![-1.0, -1.0], vec![1.0, 1.0], 0.5).unwrap(), |p| -p)
            .with_jacobian(|_| -Matrix::identity(2, 2))
            .with_singularities(vec![Singularity::new(vec![0.0, 0.0], SingularityKind::Sink)]);
        assert!(verify_trapping_ball(&f, &v(&[0.0, 0.0]), 0.04, true, 32));
        assert!(!verify_trapping_ball(&f, &v(&[0.0, 0.0]), 0.04, false, 32));
        assert_eq!(trapping_balls(&f, 0.1).len(), 1);
    }
}
