use std::sync::Arc;

use geometry_flow::{orbit, spectral_norm, IntegratorOptions, Matrix, OrbitSegment, Vector, VectorField};
use poincare::{LinearPoincareOp, MapOptions, NormalFrame, PoincareError, PoincareMap, SectionDisk};
use rayon::prelude::*;
use serde::Serialize;

use crate::{Ball, PerturbError};

/// Spacing of the stored base-orbit samples used to seed the slice search.
const SAMPLE_DT: f64 = 1.0 / 64.0;
/// Extra orbit integrated past `n` so slices near the far end can be bracketed.
const PAD: f64 = 0.25;

/// The orbit of `p` over `[0, n]` with its normal frames and linear Poincaré flow.
///
/// Slice `t` is the flat transverse disk through `X_t(p)`; integer slices are the
/// sections `i = 0..=n`.
#[derive(Debug)]
pub struct BaseOrbit {
    field: VectorField,
    p: Vector,
    n: usize,
    opts: MapOptions,
    segment: OrbitSegment,
    samples: Vec<Vector>,
    growth: Vec<f64>,
    lpf: Vec<LinearPoincareOp>,
}

impl BaseOrbit {
    pub fn new(field: &VectorField, p: &Vector, n: usize, opts: MapOptions) -> Result<Self, PerturbError> {
        if field.is_singular_at(p) {
            return Err(PoincareError::SingularPoint { point: p.iter().cloned().collect() }.into());
        }
        let t1 = n as f64 + PAD;
        let integ = IntegratorOptions::new(opts.tol).with_max_step(opts.max_step);
        let segment = orbit(field, p, t1, integ, true)?;
        let count = (t1 / SAMPLE_DT).floor() as usize;
        let mut samples = Vec::with_capacity(count + 1);
        let mut growth = Vec::with_capacity(count + 1);
        let e0 = NormalFrame::new(field, p)?;
        for k in 0..=count {
            let t = k as f64 * SAMPLE_DT;
            let x = segment.point(t).expect("inside the orbit span");
            let phi = segment.tangent(t).expect("tangent requested");
            let et = NormalFrame::new(field, &x)?;
            growth.push(spectral_norm(&(et.basis().transpose() * phi * e0.basis())));
            samples.push(x);
        }
        let mut lpf = Vec::with_capacity(n + 1);
        for i in 0..=n {
            lpf.push(Self::lpf_from(field, p, &segment, i as f64)?);
        }
        Ok(Self { field: field.clone(), p: p.clone(), n, opts, segment, samples, growth, lpf })
    }

    fn lpf_from(field: &VectorField, p: &Vector, seg: &OrbitSegment, t: f64) -> Result<LinearPoincareOp, PerturbError> {
        let x = seg.point(t).expect("inside the orbit span");
        let phi = seg.tangent(t).expect("tangent requested");
        Ok(LinearPoincareOp::from_tangent(field, p, &x, &phi, t)?)
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn base(&self) -> &Vector {
        &self.p
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn options(&self) -> MapOptions {
        self.opts
    }

    /// `X_t(p)` on the stored orbit, `t ∈ [0, n + 1/4]`.
    pub fn point(&self, t: f64) -> Option<Vector> {
        self.segment.point(t)
    }

    /// `P_{p,i}` in the frames at `p` and `X_i(p)`.
    pub fn lpf(&self, i: usize) -> &LinearPoincareOp {
        &self.lpf[i]
    }

    pub fn lpf_matrices(&self) -> Vec<Matrix> {
        self.lpf.iter().map(|l| l.matrix.clone()).collect()
    }

    /// `A_i = P_{p,i} P_{p,i−1}^{-1}`, `i = 1..=n`.
    pub fn cocycle(&self) -> Result<Vec<Matrix>, PerturbError> {
        (1..=self.n)
            .map(|i| {
                let inv = self.lpf[i - 1].inverse().ok_or_else(|| {
                    PerturbError::InvalidInput(format!("singular linear Poincaré flow at step {}", i - 1))
                })?;
                Ok(&self.lpf[i].matrix * inv)
            })
            .collect()
    }

    /// Largest `‖P_{p,t}‖` over the sampled slices.
    pub fn max_growth(&self) -> f64 {
        self.growth.iter().take(self.n * 64 + 1).cloned().fold(1.0, f64::max)
    }

    pub fn slice_disk(&self, t: f64, radius: f64) -> Result<SectionDisk, PerturbError> {
        let x = self.point(t).ok_or_else(|| PerturbError::InvalidInput(format!("slice {t} outside the orbit")))?;
        Ok(SectionDisk::new(&self.field, &x, radius)?)
    }

    fn full_radius(&self) -> f64 {
        self.field.domain().injectivity_radius()
    }

    /// Signed height of `q` over slice `t`.
    fn height(&self, t: f64, q: &Vector) -> f64 {
        let x = self.point(t).expect("inside the orbit span");
        let u = self.field.eval(&x);
        self.field.domain().log(&x, q).dot(&u) / u.norm()
    }

    /// Slice parameter of `q`: the root of the height function next to the closest
    /// stored orbit sample. `None` when `q` is farther than `reach` from the orbit.
    pub fn slice_of(&self, q: &Vector, reach: f64) -> Option<f64> {
        let dom = self.field.domain();
        let (k, dist) = self
            .samples
            .iter()
            .enumerate()
            .map(|(k, x)| (k, dom.distance(x, q)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if !(dist <= reach) {
            return None;
        }
        let last = self.samples.len() - 1;
        let lo = k.saturating_sub(2);
        let hi = (k + 2).min(last);
        let mut ha = self.height(lo as f64 * SAMPLE_DT, q);
        for j in lo..hi {
            let a = j as f64 * SAMPLE_DT;
            let b = (j + 1) as f64 * SAMPLE_DT;
            let hb = self.height(b, q);
            if ha == 0.0 {
                return Some(a);
            }
            if (ha > 0.0) != (hb > 0.0) || hb == 0.0 {
                return Some(self.bisect(a, b, ha, q));
            }
            ha = hb;
        }
        None
    }

    fn bisect(&self, mut a: f64, mut b: f64, mut ha: f64, q: &Vector) -> f64 {
        for _ in 0..200 {
            if b - a <= 1e-15 * (1.0 + b) {
                break;
            }
            let m = 0.5 * (a + b);
            let hm = self.height(m, q);
            if hm == 0.0 {
                return m;
            }
            if (hm > 0.0) == (ha > 0.0) {
                a = m;
                ha = hm;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Lifted forward map from the section at `p` to slice `t`: `Φ(ξ, t)`.
    pub fn forward(&self, xi: &Vector, t: f64) -> Result<Vector, PerturbError> {
        let r = self.full_radius();
        let source = SectionDisk::new(&self.field, &self.p, r)?;
        if t == 0.0 {
            return Ok(source.point(xi));
        }
        let map = PoincareMap::between(&self.field, source, self.slice_disk(t, r)?, t, self.opts);
        Ok(map.evaluate_coords(xi, false)?.point)
    }

    /// Backward lifted hit of a slice-`t` point onto the section at `p`.
    pub fn backward(
        &self,
        q: &Vector,
        t: f64,
        with_jacobian: bool,
    ) -> Result<(poincare::Hit, SectionDisk), PerturbError> {
        let r = self.full_radius();
        let slice = self.slice_disk(t, r)?;
        let target = SectionDisk::new(&self.field, &self.p, r)?;
        let map = PoincareMap::between(&self.field, slice.clone(), target, -t, self.opts);
        Ok((map.hit(q, with_jacobian)?, slice))
    }
}

/// `H⁻¹(q)` for a tube point: source point `y₀` on the section at `p`, its normal
/// coordinates `ξ`, the flow time `t₀` with `X_{t₀}(y₀) = q`, and the slice of `q`.
#[derive(Debug, Clone)]
pub struct TubeChart {
    pub slice: f64,
    pub xi: Vector,
    pub source: Vector,
    pub flow_time: f64,
    /// Lifted Jacobian from slice coordinates at `q` to coordinates at `p`.
    pub jacobian: Option<Matrix>,
    pub slice_disk: SectionDisk,
}

#[derive(Debug, Clone, Serialize)]
pub struct InjectivityReport {
    pub samples: usize,
    pub min_separation: f64,
    pub max_roundtrip: f64,
    pub band: (f64, f64),
    pub hitting_times: (f64, f64),
    pub passed: bool,
}

/// The flow tube `⋃_{y∈U} ⋃_{t∈[0,τ_{p,n}(y)]} X_t(y)` with `U` a ball in normal
/// coordinates at `p`.
#[derive(Debug, Clone)]
pub struct TubeRegion {
    orbit: Arc<BaseOrbit>,
    u: Ball,
    reach: f64,
}

impl TubeRegion {
    pub fn new(field: &VectorField, p: &Vector, u: Ball, n: usize, opts: MapOptions) -> Result<Self, PerturbError> {
        let orbit = BaseOrbit::new(field, p, n, opts)?;
        Self::on_orbit(Arc::new(orbit), u)
    }

    pub fn on_orbit(orbit: Arc<BaseOrbit>, u: Ball) -> Result<Self, PerturbError> {
        let k = orbit.field().dim() - 1;
        if u.dim() != k || !(u.radius > 0.0) {
            return Err(PerturbError::InvalidInput(format!("U must be a ball of positive radius in dimension {k}")));
        }
        let extent = u.center_vec().norm() + u.radius;
        if extent >= orbit.full_radius() {
            return Err(PerturbError::InvalidInput(format!("U extends to {extent}, beyond the section radius")));
        }
        let speed = orbit.samples.iter().map(|x| orbit.field.eval(x).norm()).fold(0.0, f64::max);
        let reach = 3.0 * orbit.max_growth() * extent + SAMPLE_DT * speed;
        Ok(Self { orbit, u, reach })
    }

    pub fn orbit(&self) -> &Arc<BaseOrbit> {
        &self.orbit
    }

    pub fn set(&self) -> &Ball {
        &self.u
    }

    pub fn steps(&self) -> usize {
        self.orbit.n
    }

    /// Distance from the orbit beyond which points are rejected without integration.
    pub fn reach(&self) -> f64 {
        self.reach
    }

    pub fn slice_of(&self, q: &Vector) -> Option<f64> {
        let t = self.orbit.slice_of(q, self.reach)?;
        (t <= self.orbit.n as f64).then_some(t)
    }

    /// Inverse chart of a tube point; `NoHit` is the negative membership answer.
    pub fn chart(&self, q: &Vector, with_jacobian: bool) -> Result<TubeChart, PerturbError> {
        let no_hit = || PerturbError::Poincare(PoincareError::NoHit { horizon: self.orbit.n as f64 });
        let t = self.slice_of(q).ok_or_else(no_hit)?;
        let chart = self.chart_at(q, t, with_jacobian).map_err(|_| no_hit())?;
        if self.u.contains(&chart.xi) {
            Ok(chart)
        } else {
            Err(no_hit())
        }
    }

    /// Chart of `q` on a known slice `t`, without the membership test on `ξ`.
    pub fn chart_at(&self, q: &Vector, t: f64, with_jacobian: bool) -> Result<TubeChart, PerturbError> {
        let (hit, slice_disk) = self.orbit.backward(q, t, with_jacobian)?;
        Ok(TubeChart {
            slice: t,
            xi: hit.coords,
            source: hit.point,
            flow_time: -hit.time,
            jacobian: hit.jacobian,
            slice_disk,
        })
    }

    pub fn contains(&self, q: &Vector) -> bool {
        self.chart(q, false).is_ok()
    }

    /// Sampled tube points `(ξ, slice, q)`: `per_slice` source points on each of
    /// `slices + 1` evenly spaced slices in `[0, n]`.
    pub fn sample_points(&self, per_slice: usize, slices: usize) -> Result<Vec<(Vector, f64, Vector)>, PerturbError> {
        let n = self.orbit.n as f64;
        let shrink = Ball::new(self.u.center.clone(), self.u.radius * (1.0 - 1e-6));
        let params: Vec<(Vector, f64)> = (0..=slices)
            .flat_map(|j| {
                let t = n * j as f64 / slices.max(1) as f64;
                shrink.samples(per_slice).into_iter().map(move |xi| (xi, t))
            })
            .collect();
        params
            .into_par_iter()
            .map(|(xi, t)| {
                let q = self.orbit.forward(&xi, t)?;
                Ok((xi, t, q))
            })
            .collect()
    }

    /// Sampled injectivity of `(y, t) ↦ X_t(y)` plus the hitting-time band `[n−α, n+α]`.
    pub fn injectivity_certificate(
        &self,
        alpha: f64,
        per_slice: usize,
        slices: usize,
    ) -> Result<InjectivityReport, PerturbError> {
        let pts = self.sample_points(per_slice, slices)?;
        let dom = self.orbit.field.domain();
        let min_separation = (0..pts.len())
            .into_par_iter()
            .map(|a| {
                let mut m = f64::INFINITY;
                for b in a + 1..pts.len() {
                    if pts[a].1 == pts[b].1 && pts[a].0 == pts[b].0 {
                        continue;
                    }
                    m = m.min(dom.distance(&pts[a].2, &pts[b].2));
                }
                m
            })
            .reduce(|| f64::INFINITY, f64::min);
        let max_roundtrip = pts
            .par_iter()
            .map(|(xi, t, q)| match self.chart_at(q, *t, false) {
                Ok(c) => (c.xi - xi).norm(),
                Err(_) => f64::INFINITY,
            })
            .reduce(|| 0.0, f64::max);
        let n = self.orbit.n as f64;
        let r = self.orbit.full_radius();
        let source = SectionDisk::new(&self.orbit.field, &self.orbit.p, r)?;
        let map = PoincareMap::between(&self.orbit.field, source, self.orbit.slice_disk(n, r)?, n, self.orbit.opts);
        let times: Vec<f64> = self
            .u
            .samples(per_slice)
            .par_iter()
            .map(|xi| map.evaluate_coords(xi, false).map(|h| h.time).unwrap_or(f64::NAN))
            .collect();
        let lo = times.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let band = (n - alpha, n + alpha);
        let in_band = times.iter().all(|t| *t >= band.0 && *t <= band.1);
        let passed = min_separation > 1e-9 && max_roundtrip <= 1e-8 * (1.0 + self.u.radius) && in_band;
        Ok(InjectivityReport {
            samples: pts.len(),
            min_separation,
            max_roundtrip,
            band,
            hitting_times: (lo, hi),
            passed,
        })
    }
}

#[cfg(test)]
mod tests {
    use geometry_flow::DomainChart;

    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn constant() -> VectorField {
        VectorField::new("e1", DomainChart::boxed(vec![-5.0, -5.0], vec![20.0, 5.0], 1.0).unwrap(), |_| v(&[1.0, 0.0]))
            .with_jacobian(|_| Matrix::zeros(2, 2))
    }

    #[test]
    fn constant_field_tube_is_a_cylinder() {
        let tube = TubeRegion::new(&constant(), &v(&[0.0, 0.0]), Ball::new(vec![0.1], 0.05), 3, MapOptions::default())
            .unwrap();
        for (q, inside) in [
            (v(&[1.5, 0.12]), true),
            (v(&[0.0, 0.08]), true),
            (v(&[2.9, 0.149]), true),
            (v(&[1.5, 0.16]), false),
            (v(&[-0.01, 0.1]), false),
            (v(&[3.01, 0.1]), false),
            (v(&[1.5, -0.1]), false),
        ] {
            assert_eq!(tube.contains(&q), inside, "{q:?}");
        }
        let c = tube.chart(&v(&[1.5, 0.12]), false).unwrap();
        assert!((c.slice - 1.5).abs() < 1e-12 && (c.flow_time - 1.5).abs() < 1e-9);
        assert!((c.source - v(&[0.0, 0.12])).norm() < 1e-12);
    }

    #[test]
    fn base_orbit_midpoint_is_a_member() {
        let tube =
            TubeRegion::new(&constant(), &v(&[0.0, 0.0]), Ball::centered(1, 0.05), 4, MapOptions::default()).unwrap();
        let c = tube.chart(&v(&[2.0, 0.0]), false).unwrap();
        assert!(c.xi.norm() < 1e-12 && (c.flow_time - 2.0).abs() < 1e-9);
    }
}
