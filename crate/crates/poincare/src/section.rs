use geometry_flow::{flow, DomainChart, Integrator, IntegratorOptions, Matrix, StepControl, Vector, VectorField};

use crate::{NormalFrame, PoincareError};

/// `exp_p(N_{X,p}(r))`: the flat transverse disk through `p`.
#[derive(Debug, Clone)]
pub struct SectionDisk {
    frame: NormalFrame,
    radius: f64,
    domain: DomainChart,
}

impl SectionDisk {
    pub fn new(field: &VectorField, p: &Vector, radius: f64) -> Result<Self, PoincareError> {
        let frame = NormalFrame::new(field, p)?;
        Self::from_frame(field.domain(), frame, radius)
    }

    pub fn from_frame(domain: &DomainChart, frame: NormalFrame, radius: f64) -> Result<Self, PoincareError> {
        let r_max = domain.injectivity_radius();
        if !(radius > 0.0 && radius <= r_max) {
            return Err(PoincareError::InvalidRadius(radius));
        }
        Ok(Self { frame, radius, domain: domain.clone() })
    }

    pub fn frame(&self) -> &NormalFrame {
        &self.frame
    }

    pub fn base(&self) -> &Vector {
        self.frame.base()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self, PoincareError> {
        Self::from_frame(&self.domain, self.frame.clone(), radius)
    }

    /// Chart point with normal coordinates `xi`.
    pub fn point(&self, xi: &Vector) -> Vector {
        self.domain.exp(self.frame.base(), &self.frame.embed(xi))
    }

    pub fn coords(&self, q: &Vector) -> Vector {
        self.frame.coords(&self.domain.log(self.frame.base(), q))
    }

    /// Signed distance of `q` from the hyperplane, along the flow direction.
    pub fn height(&self, q: &Vector) -> f64 {
        self.domain.log(self.frame.base(), q).dot(self.frame.direction())
    }

    fn plane_slack(&self) -> f64 {
        1e-8 * (1.0 + self.frame.base().amax())
    }

    pub fn contains(&self, q: &Vector) -> bool {
        self.height(q).abs() <= self.plane_slack()
            && self.coords(q).norm() <= self.radius * (1.0 + 1e-9) + 1e-14 * (1.0 + self.frame.base().amax())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    pub tol: f64,
    pub max_step: f64,
    /// Minimal `|<X, u>| / |X|` at a crossing.
    pub transversality: f64,
    /// Search window in time; defaults to `2|n| + 1`.
    pub horizon: Option<f64>,
    /// Crossings earlier than `max(min_time, |n|/2)` are ignored.
    pub min_time: f64,
    /// Radius of the target disk; defaults to the injectivity radius.
    pub target_radius: Option<f64>,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_step: 0.125, transversality: 1e-6, horizon: None, min_time: 1e-9, target_radius: None }
    }
}

impl MapOptions {
    /// Caps the integration step at `alpha / 4`.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.max_step = self.max_step.min(alpha / 4.0);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_target_radius(mut self, r: f64) -> Self {
        self.target_radius = Some(r);
        self
    }
}

/// One evaluation of a Poincaré map.
#[derive(Debug, Clone)]
pub struct Hit {
    pub point: Vector,
    pub time: f64,
    /// Normal coordinates of the image on the target disk.
    pub coords: Vector,
    /// `D(lifted map)` in the two normal frames, when requested.
    pub jacobian: Option<Matrix>,
}

/// Poincaré map of `field` from a source disk to a target disk whose base is reached after `time`.
#[derive(Debug, Clone)]
pub struct PoincareMap {
    field: VectorField,
    source: SectionDisk,
    target: SectionDisk,
    time: f64,
    opts: MapOptions,
}

impl PoincareMap {
    /// Map from `N_{X,p}(source_radius)` to `N_{X,X_n(p)}(R)`; `n` may be negative.
    pub fn new(
        field: &VectorField,
        p: &Vector,
        n: f64,
        source_radius: f64,
        opts: MapOptions,
    ) -> Result<Self, PoincareError> {
        let source = SectionDisk::new(field, p, source_radius)?;
        let image = flow(field, p, n, opts.tol)?;
        let r = field.domain().injectivity_radius();
        let target = SectionDisk::new(field, &image, opts.target_radius.map_or(r, |t| t.min(r)))?;
        Ok(Self::between(field, source, target, n, opts))
    }

    /// Map of a (possibly different) field between two given disks.
    pub fn between(field: &VectorField, source: SectionDisk, target: SectionDisk, time: f64, opts: MapOptions) -> Self {
        Self { field: field.clone(), source, target, time, opts }
    }

    pub fn source(&self) -> &SectionDisk {
        &self.source
    }

    pub fn target(&self) -> &SectionDisk {
        &self.target
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn horizon(&self) -> f64 {
        self.opts.horizon.unwrap_or(2.0 * self.time.abs() + 1.0)
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    /// `(image, hitting time)`.
    pub fn evaluate(&self, q: &Vector) -> Result<(Vector, f64), PoincareError> {
        let h = self.hit(q, false)?;
        Ok((h.point, h.time))
    }

    pub fn evaluate_coords(&self, xi: &Vector, with_jacobian: bool) -> Result<Hit, PoincareError> {
        self.hit(&self.source.point(xi), with_jacobian)
    }

    /// Lifted map `exp^{-1} ∘ P ∘ exp` in normal coordinates.
    pub fn lifted(&self, xi: &Vector) -> Result<Vector, PoincareError> {
        Ok(self.evaluate_coords(xi, false)?.coords)
    }

    pub fn lifted_jacobian(&self, xi: &Vector) -> Result<(Vector, Matrix), PoincareError> {
        let h = self.evaluate_coords(xi, true)?;
        let j = h.jacobian.expect("requested");
        Ok((h.coords, j))
    }

    pub fn hit(&self, q: &Vector, with_jacobian: bool) -> Result<Hit, PoincareError> {
        if !self.source.contains(q) {
            let off = self.source.height(q).abs().max(self.source.coords(q).norm() - self.source.radius());
            return Err(PoincareError::OffSection { distance: off });
        }
        if self.time == 0.0 {
            let k = self.source.frame().dim();
            let coords = self.target.coords(q);
            let jac = with_jacobian.then(|| {
                self.target.frame().basis().transpose() * self.source.frame().basis() * Matrix::identity(k, k)
            });
            return Ok(Hit { point: q.clone(), time: 0.0, coords, jacobian: jac });
        }
        let limit = self.time.signum() * self.horizon();
        let earliest = self.opts.min_time.max(0.5 * self.time.abs());
        let (point, time, tangent) =
            first_crossing(&self.field, q, &self.target, limit, earliest, with_jacobian, &self.opts)?;
        let coords = self.target.coords(&point);
        let jacobian = tangent.map(|phi| {
            let y = self.field.eval(&point);
            let u = self.target.frame().direction();
            let d = y.len();
            let proj = Matrix::identity(d, d) - &y * u.transpose() / y.dot(u);
            self.target.frame().basis().transpose() * proj * phi * self.source.frame().basis()
        });
        Ok(Hit { point, time, coords, jacobian })
    }
}

/// First crossing of the target disk along the orbit of `start`, searching up to the signed time `limit`.
fn first_crossing(
    field: &VectorField,
    start: &Vector,
    target: &SectionDisk,
    limit: f64,
    earliest: f64,
    with_tangent: bool,
    opts: &MapOptions,
) -> Result<(Vector, f64, Option<Matrix>), PoincareError> {
    let integ = Integrator::new(field, IntegratorOptions::new(opts.tol).with_max_step(opts.max_step));
    let mut found = None;
    let outcome = integ.solve(start, limit, with_tangent, |s| {
        let g0 = target.height(&s.start_point());
        let g1 = target.height(&s.end_point());
        let crosses = (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0);
        if !crosses || s.t1().abs() < earliest {
            return StepControl::Continue;
        }
        let (mut a, mut b, mut ga) = (s.t0, s.t1(), g0);
        for _ in 0..200 {
            if (b - a).abs() <= 1e-14 * (1.0 + b.abs()) {
                break;
            }
            let m = 0.5 * (a + b);
            let gm = target.height(&s.point(m));
            if gm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if (gm < 0.0) == (ga < 0.0) {
                a = m;
                ga = gm;
            } else {
                b = m;
            }
        }
        let t = 0.5 * (a + b);
        let x = s.point(t);
        let genuine = target.height(&x).abs() <= target.plane_slack();
        if genuine && t.abs() >= earliest && target.coords(&x).norm() <= target.radius() {
            found = Some((t, s.clone()));
            StepControl::Stop
        } else {
            StepControl::Continue
        }
    })?;
    let Some((t, step)) = found else {
        let _ = outcome;
        return Err(PoincareError::NoHit { horizon: limit.abs() });
    };
    let point = field.domain().reduce(&step.point(t));
    let y = field.eval(&point);
    let ratio = y.dot(target.frame().direction()).abs() / y.norm();
    if !(ratio >= opts.transversality) {
        return Err(PoincareError::Tangency { time: t, ratio });
    }
    let tangent = if with_tangent { step.tangent(t) } else { None };
    Ok((point, t, tangent))
}

/// Deterministic points in the closed `k`-ball of radius `r`.
///
/// `k = 1`: evenly spaced on `[-r, r]`; `k = 2`: a sunflower spiral; higher: Halton points kept inside the ball.
pub fn disk_points(k: usize, r: f64, count: usize) -> Vec<Vector> {
    let count = count.max(1);
    match k {
        0 => vec![Vector::zeros(0); count],
        1 => {
            if count == 1 {
                return vec![Vector::zeros(1)];
            }
            (0..count).map(|i| Vector::from_element(1, -r + 2.0 * r * i as f64 / (count - 1) as f64)).collect()
        }
        2 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let rho = r * ((i as f64 + 0.5) / count as f64).sqrt();
                    let th = golden * i as f64;
                    Vector::from_vec(vec![rho * th.cos(), rho * th.sin()])
                })
                .collect()
        }
        _ => {
            const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
            let mut out = Vec::with_capacity(count);
            let mut i = 1u64;
            while out.len() < count {
                let v = Vector::from_iterator(k, (0..k).map(|j| 2.0 * halton(i, PRIMES[j % PRIMES.len()]) - 1.0));
                if v.norm() <= 1.0 {
                    out.push(v * r);
                }
                i += 1;
            }
            out
        }
    }
}

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut x = 0.0;
    while i > 0 {
        f /= base as f64;
        x += f * (i % base) as f64;
        i /= base;
    }
    x
}
