//! Dormand–Prince 5(4) with the fourth-order continuous extension.
//!
//! The state is augmented with the column-major tangent flow when requested, so the
//! trajectory and the variational equation share one step sequence.

use crate::{ChartKind, FlowError, Matrix, Vector, VectorField};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub tol: f64,
    pub max_step: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl IntegratorOptions {
    pub fn new(tol: f64) -> Self {
        Self { tol, max_step: f64::INFINITY, initial_step: None, max_steps: 2_000_000 }
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }

    fn check(&self) -> Result<(), FlowError> {
        if self.tol.is_finite() && self.tol > 0.0 {
            Ok(())
        } else {
            Err(FlowError::InvalidTolerance(self.tol))
        }
    }
}

/// One accepted step with its continuous extension, in unwrapped chart coordinates.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    pub error: f64,
    dim: usize,
    r: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn contains(&self, t: f64) -> bool {
        let (a, b) = if self.h >= 0.0 { (self.t0, self.t1()) } else { (self.t1(), self.t0) };
        t >= a && t <= b
    }

    /// Full augmented state at time `t`.
    pub fn augmented(&self, t: f64) -> Vec<f64> {
        if t == self.t0 {
            return self.r[0].clone();
        }
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        (0..self.r[0].len())
            .map(|i| {
                self.r[0][i] + th * (self.r[1][i] + th1 * (self.r[2][i] + th * (self.r[3][i] + th1 * self.r[4][i])))
            })
            .collect()
    }

    /// Unwrapped point at time `t`.
    pub fn point(&self, t: f64) -> Vector {
        let y = self.augmented(t);
        Vector::from_column_slice(&y[..self.dim])
    }

    /// Tangent-flow matrix at time `t`, when the step was integrated with it.
    pub fn tangent(&self, t: f64) -> Option<Matrix> {
        let y = self.augmented(t);
        (y.len() > self.dim).then(|| Matrix::from_column_slice(self.dim, self.dim, &y[self.dim..]))
    }

    pub fn start_point(&self) -> Vector {
        Vector::from_column_slice(&self.r[0][..self.dim])
    }

    pub fn end_point(&self) -> Vector {
        let y: Vec<f64> = (0..self.dim).map(|i| self.r[0][i] + self.r[1][i]).collect();
        Vector::from_vec(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Result of [`Integrator::solve`]: time reached and the augmented state there.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub t: f64,
    pub state: Vec<f64>,
    pub stats: StepStats,
    pub stopped: bool,
}

pub struct Integrator<'a> {
    field: &'a VectorField,
    opts: IntegratorOptions,
}

impl<'a> Integrator<'a> {
    pub fn new(field: &'a VectorField, opts: IntegratorOptions) -> Self {
        Self { field, opts }
    }

    fn rhs(&self, y: &[f64], out: &mut [f64]) -> Result<(), FlowError> {
        let d = self.field.dim();
        let p = Vector::from_column_slice(&y[..d]);
        let f = self.field.eval(&p);
        out[..d].copy_from_slice(f.as_slice());
        if y.len() > d {
            let a = self.field.jacobian(&p)?;
            let phi = nalgebra::DMatrixView::from_slice(&y[d..], d, d);
            let prod = a * phi;
            out[d..].copy_from_slice(prod.as_slice());
        }
        Ok(())
    }

    fn scale(&self, d: usize, y0: &[f64], y1: &[f64], sc: &mut [f64]) {
        let tol = self.opts.tol;
        for i in 0..d {
            sc[i] = tol + tol * y0[i].abs().max(y1[i].abs());
        }
        if y0.len() > d {
            let m0 = y0[d..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let m1 = y1[d..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let s = (tol * m0.max(m1)).max(1e-300);
            for v in sc[d..].iter_mut() {
                *v = s;
            }
        }
    }

    fn norm(e: &[f64], sc: &[f64]) -> f64 {
        let s: f64 = e.iter().zip(sc).map(|(a, b)| (a / b) * (a / b)).sum();
        (s / e.len() as f64).sqrt()
    }

    fn check_domain(&self, t: f64, y: &[f64]) -> Result<(), FlowError> {
        let d = self.field.dim();
        if let ChartKind::Box { .. } = self.field.domain().kind() {
            let p = Vector::from_column_slice(&y[..d]);
            if !self.field.domain().contains(&p) {
                return Err(FlowError::DomainExit { t, point: y[..d].to_vec() });
            }
        }
        Ok(())
    }

    fn initial_step(&self, y0: &[f64], f0: &[f64], span: f64) -> Result<f64, FlowError> {
        if let Some(h) = self.opts.initial_step {
            return Ok(h.abs().min(span.abs()).min(self.opts.max_step));
        }
        let n = y0.len();
        let mut sc = vec![0.0; n];
        self.scale(self.field.dim(), y0, y0, &mut sc);
        let d0 = Self::norm(y0, &sc);
        let d1 = Self::norm(f0, &sc);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let dir = span.signum();
        let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + dir * h0 * f).collect();
        let mut f1 = vec![0.0; n];
        self.rhs(&y1, &mut f1)?;
        let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
        let d2 = Self::norm(&diff, &sc) / h0;
        let m = d1.max(d2);
        let h1 = if m <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / m).powf(0.2) };
        Ok((100.0 * h0).min(h1).min(span.abs()).min(self.opts.max_step))
    }

    /// Integrates from the augmented state `y0` at time 0 to `t_end`, handing every
    /// accepted step to `on_step`.
    pub fn solve_augmented<F>(&self, y0: Vec<f64>, t_end: f64, mut on_step: F) -> Result<Outcome, FlowError>
    where
        F: FnMut(&DenseStep) -> StepControl,
    {
        self.opts.check()?;
        let d = self.field.dim();
        let n = y0.len();
        let mut stats = StepStats::default();
        if t_end == 0.0 {
            return Ok(Outcome { t: 0.0, state: y0, stats, stopped: false });
        }
        let dir = t_end.signum();
        let mut t = 0.0f64;
        let mut y = y0;
        let mut k1 = vec![0.0; n];
        self.rhs(&y, &mut k1)?;
        stats.evaluations += 1;
        if k1.iter().any(|x| !x.is_finite()) {
            return Err(FlowError::StepFailure { t, h: 0.0 });
        }
        let mut h = self.initial_step(&y, &k1, t_end)?.max(1e-12) * dir;
        let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut ys = vec![0.0; n];
        let mut y1 = vec![0.0; n];
        let mut err = vec![0.0; n];
        let mut sc = vec![0.0; n];
        let mut last_rejected = false;
        loop {
            if stats.accepted + stats.rejected >= self.opts.max_steps {
                return Err(FlowError::StepFailure { t, h });
            }
            let remaining = t_end - t;
            let mut last = false;
            if h.abs() >= remaining.abs() * (1.0 - 1e-12) {
                h = remaining;
                last = true;
            }
            if h.abs() < 1e-14 * t.abs().max(1.0) && !last {
                return Err(FlowError::StepFailure { t, h });
            }
            let stages: Result<(), FlowError> = (|| {
                for i in 0..n {
                    ys[i] = y[i] + h * A21 * k1[i];
                }
                self.rhs(&ys, &mut k2)?;
                for i in 0..n {
                    ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
                }
                self.rhs(&ys, &mut k3)?;
                for i in 0..n {
                    ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
                }
                self.rhs(&ys, &mut k4)?;
                for i in 0..n {
                    ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
                }
                self.rhs(&ys, &mut k5)?;
                for i in 0..n {
                    ys[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
                }
                self.rhs(&ys, &mut k6)?;
                for i in 0..n {
                    y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
                }
                self.rhs(&y1, &mut k7)?;
                Ok(())
            })();
            stats.evaluations += 6;
            stages?;
            for i in 0..n {
                err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            self.scale(d, &y, &y1, &mut sc);
            let mut e = Self::norm(&err, &sc);
            if !e.is_finite() || y1.iter().any(|x| !x.is_finite()) {
                e = f64::INFINITY;
            }
            if e <= 1.0 {
                let mut r = [y.clone(), vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
                for i in 0..n {
                    let dy = y1[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    r[1][i] = dy;
                    r[2][i] = bspl;
                    r[3][i] = dy - h * k7[i] - bspl;
                    r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                let step = DenseStep { t0: t, h, error: e, dim: d, r };
                t = if last { t_end } else { t + h };
                std::mem::swap(&mut y, &mut y1);
                std::mem::swap(&mut k1, &mut k7);
                stats.accepted += 1;
                self.check_domain(t, &y)?;
                if on_step(&step) == StepControl::Stop {
                    return Ok(Outcome { t, state: y, stats, stopped: true });
                }
                if last {
                    return Ok(Outcome { t, state: y, stats, stopped: false });
                }
                let mut fac = if e == 0.0 { 5.0 } else { 0.9 * e.powf(-0.2) };
                fac = fac.clamp(0.2, 5.0);
                if last_rejected {
                    fac = fac.min(1.0);
                }
                last_rejected = false;
                h = (h * fac).abs().min(self.opts.max_step) * dir;
            } else {
                stats.rejected += 1;
                last_rejected = true;
                let fac = if e.is_finite() { (0.9 * e.powf(-0.2)).clamp(0.1, 0.9) } else { 0.25 };
                h *= fac;
            }
        }
    }

    /// Integrates `p` to `t_end`, optionally with the tangent flow (started at the identity).
    pub fn solve<F>(&self, p: &Vector, t_end: f64, with_tangent: bool, on_step: F) -> Result<Outcome, FlowError>
    where
        F: FnMut(&DenseStep) -> StepControl,
    {
        let d = self.field.dim();
        if p.len() != d {
            return Err(FlowError::DimensionMismatch { expected: d, got: p.len() });
        }
        self.solve_augmented(augment(p, with_tangent), t_end, on_step)
    }
}

pub fn augment(p: &Vector, with_tangent: bool) -> Vec<f64> {
    let d = p.len();
    let mut y: Vec<f64> = p.iter().cloned().collect();
    if with_tangent {
        y.extend(Matrix::identity(d, d).iter());
    }
    y
}

/// Bookkeeping for one accepted step: wrapped start point plus winding counts.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub h: f64,
    pub error: f64,
    pub point: Vec<f64>,
    pub winding: Vec<i64>,
}

/// A stored orbit with dense output over `[t0, t1]` (`t0 = 0`).
#[derive(Debug, Clone)]
pub struct OrbitSegment {
    field: VectorField,
    base: Vector,
    t1: f64,
    tol: f64,
    steps: Vec<DenseStep>,
    records: Vec<StepRecord>,
    stats: StepStats,
}

impl OrbitSegment {
    pub fn base(&self) -> &Vector {
        &self.base
    }

    pub fn span(&self) -> (f64, f64) {
        (0.0, self.t1)
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn steps(&self) -> &[DenseStep] {
        &self.steps
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    pub fn has_tangent(&self) -> bool {
        self.steps.first().map(|s| s.tangent(s.t0).is_some()).unwrap_or(false)
    }

    fn step_for(&self, t: f64) -> Option<&DenseStep> {
        let (a, b) = if self.t1 >= 0.0 { (0.0, self.t1) } else { (self.t1, 0.0) };
        if t < a || t > b || self.steps.is_empty() {
            return None;
        }
        let forward = self.t1 >= 0.0;
        let idx = self.steps.partition_point(|s| if forward { s.t1() < t } else { s.t1() > t });
        self.steps.get(idx.min(self.steps.len() - 1))
    }

    /// Unwrapped point at `t`; exact base point at `t = 0`.
    pub fn unwrapped(&self, t: f64) -> Option<Vector> {
        if t == 0.0 {
            return Some(self.base.clone());
        }
        self.step_for(t).map(|s| s.point(t))
    }

    /// Wrapped point and winding counts at `t`.
    pub fn state(&self, t: f64) -> Option<(Vector, Vec<i64>)> {
        self.unwrapped(t).map(|p| self.field.domain().wrap(&p))
    }

    pub fn point(&self, t: f64) -> Option<Vector> {
        self.state(t).map(|s| s.0)
    }

    pub fn tangent(&self, t: f64) -> Option<Matrix> {
        if t == 0.0 && self.has_tangent() {
            let d = self.base.len();
            return Some(Matrix::identity(d, d));
        }
        self.step_for(t).and_then(|s| s.tangent(t))
    }

    /// CSV rows `t, x_1..x_d[, phi_11..phi_dd]` at the requested times (row-major tangent).
    pub fn to_csv(&self, times: &[f64]) -> String {
        let d = self.base.len();
        let with_tangent = self.has_tangent();
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("x_{i}")));
        if with_tangent {
            for i in 1..=d {
                for j in 1..=d {
                    header.push(format!("dphi_{i}{j}"));
                }
            }
        }
        let mut out = header.join(",");
        out.push('\n');
        for &t in times {
            let Some(p) = self.point(t) else { continue };
            let mut row = vec![format!("{t:.12e}")];
            row.extend(p.iter().map(|x| format!("{x:.12e}")));
            if with_tangent {
                if let Some(m) = self.tangent(t) {
                    for i in 0..d {
                        for j in 0..d {
                            row.push(format!("{:.12e}", m[(i, j)]));
                        }
                    }
                }
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Integrates and stores the full orbit segment over `[0, t1]` with dense output.
pub fn orbit(
    field: &VectorField,
    p: &Vector,
    t1: f64,
    opts: IntegratorOptions,
    with_tangent: bool,
) -> Result<OrbitSegment, FlowError> {
    let mut steps = Vec::new();
    let mut records = Vec::new();
    let integ = Integrator::new(field, opts);
    let out = integ.solve(p, t1, with_tangent, |s| {
        let (w, k) = field.domain().wrap(&s.start_point());
        records.push(StepRecord { t: s.t0, h: s.h, error: s.error, point: w.iter().cloned().collect(), winding: k });
        steps.push(s.clone());
        StepControl::Continue
    })?;
    Ok(OrbitSegment { field: field.clone(), base: p.clone(), t1, tol: opts.tol, steps, records, stats: out.stats })
}

/// `X_t(p)`, wrapped into the fundamental domain on torus axes.
pub fn flow(field: &VectorField, p: &Vector, t: f64, tol: f64) -> Result<Vector, FlowError> {
    IntegratorOptions::new(tol).check()?;
    if t == 0.0 {
        return Ok(p.clone());
    }
    flow_unwrapped(field, p, t, tol).map(|q| field.domain().reduce(&q))
}

/// `X_t(p)` without wrapping (continuous lift on torus axes).
pub fn flow_unwrapped(field: &VectorField, p: &Vector, t: f64, tol: f64) -> Result<Vector, FlowError> {
    let out = Integrator::new(field, IntegratorOptions::new(tol)).solve(p, t, false, |_| StepControl::Continue)?;
    Ok(Vector::from_column_slice(&out.state))
}

/// `DX_t(p)` from the co-integrated variational equation.
pub fn variational(field: &VectorField, p: &Vector, t: f64, tol: f64) -> Result<Matrix, FlowError> {
    flow_with_tangent(field, p, t, tol).map(|(_, m)| m)
}

/// `(X_t(p), DX_t(p))` in one augmented integration.
pub fn flow_with_tangent(field: &VectorField, p: &Vector, t: f64, tol: f64) -> Result<(Vector, Matrix), FlowError> {
    let d = field.dim();
    IntegratorOptions::new(tol).check()?;
    if t == 0.0 {
        return Ok((p.clone(), Matrix::identity(d, d)));
    }
    let out = Integrator::new(field, IntegratorOptions::new(tol)).solve(p, t, true, |_| StepControl::Continue)?;
    let q = Vector::from_column_slice(&out.state[..d]);
    let m = Matrix::from_column_slice(d, d, &out.state[d..]);
    Ok((field.domain().reduce(&q), m))
}
