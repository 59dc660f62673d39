use geometry_flow::{min_singular, orbit, spectral_norm, IntegratorOptions, Matrix, Vector, VectorField};
use serde::Serialize;

use crate::{disk_points, LinearPoincareOp, MapOptions, NormalFrame, PoincareError, PoincareMap};

const SAFETY: f64 = 1.05;
const ALPHA_GRID: std::ops::RangeInclusive<i32> = 1..=12;

/// Attained maxima of each condition (each already the max of the norm and the inverse-norm bound).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ConditionMaxima {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

impl ConditionMaxima {
    pub fn max(&self) -> f64 {
        self.a.max(self.b).max(self.c).max(self.d).max(self.e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessCertificate {
    #[serde(rename = "C")]
    pub c: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub conditions: ConditionMaxima,
    pub norm: &'static str,
    pub samples: usize,
    pub t_grid: Vec<f64>,
    /// Radius fraction `β_e` of the disks `N(β_e ‖X(p)‖)` used for condition (e).
    pub section_fraction: f64,
    pub skipped: Vec<Vec<f64>>,
}

impl BoundednessCertificate {
    pub fn with_calibration(mut self, cal: &Calibration) -> Self {
        self.alpha = Some(cal.alpha);
        self.beta = Some(cal.beta);
        self
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateOptions {
    pub tol: f64,
    pub section_fraction: f64,
    /// Points per disk for condition (e).
    pub section_samples: usize,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self { tol: 1e-10, section_fraction: 0.05, section_samples: 5 }
    }
}

fn two_sided(m: &Matrix) -> f64 {
    spectral_norm(m).max(1.0 / min_singular(m))
}

/// Smallest `C` (times 1.05) with conditions (a)–(e) on the sampled points and times.
pub fn boundedness_certificate(
    field: &VectorField,
    samples: &[Vector],
    t_grid: &[f64],
    opts: CertificateOptions,
) -> Result<BoundednessCertificate, PoincareError> {
    let mut cond = ConditionMaxima::default();
    let mut skipped = Vec::new();
    let mut used = 0;
    let t_plus = t_grid.iter().cloned().fold(0.0f64, f64::max);
    let t_minus = t_grid.iter().cloned().fold(0.0f64, f64::min);
    let iopts = IntegratorOptions::new(opts.tol);
    for p in samples {
        if field.is_singular_at(p) {
            skipped.push(p.iter().cloned().collect());
            continue;
        }
        used += 1;
        let x = field.eval(p);
        cond.a = cond.a.max(x.norm());
        cond.b = cond.b.max(spectral_norm(&field.jacobian(p)?));
        let fwd = orbit(field, p, t_plus, iopts, true)?;
        let bwd = orbit(field, p, t_minus, iopts, true)?;
        for &t in t_grid {
            let seg = if t >= 0.0 { &fwd } else { &bwd };
            let (Some(q), Some(phi)) = (seg.point(t), seg.tangent(t)) else { continue };
            cond.c = cond.c.max(two_sided(&phi));
            let lp = LinearPoincareOp::from_tangent(field, p, &q, &phi, t)?;
            cond.d = cond.d.max(two_sided(&lp.matrix));
        }
        let r = opts.section_fraction * x.norm();
        let map = PoincareMap::new(field, p, 1.0, r.min(field.domain().injectivity_radius()), MapOptions::default())?;
        let k = field.dim() - 1;
        let mut pts = vec![Vector::zeros(k)];
        pts.extend(disk_points(k, r, opts.section_samples));
        for xi in pts {
            let (_, j) = map.lifted_jacobian(&xi)?;
            cond.e = cond.e.max(two_sided(&j));
        }
    }
    if used == 0 {
        return Err(PoincareError::SingularPoint {
            point: samples.first().map(|p| p.iter().cloned().collect()).unwrap_or_default(),
        });
    }
    Ok(BoundednessCertificate {
        c: SAFETY * cond.max().max(1.0),
        alpha: None,
        beta: None,
        conditions: cond,
        norm: "spectral",
        samples: used,
        t_grid: t_grid.to_vec(),
        section_fraction: opts.section_fraction,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub alpha: f64,
    pub beta: f64,
    /// Hitting times checked while fixing `beta`.
    pub checked: usize,
}

/// `α`: the largest `2^{-k}` with `|det P_{p,t} − 1| < log 2 / 2` for sampled `p`, `|t| ≤ α`;
/// `β`: halved from `min(10αC, R)/(2C)` until every sampled hitting time from
/// `N(β‖X(p)‖/Cⁿ)`, `n = 1..=n_max`, lies in `[n−α, n+α]`.
pub fn calibrate(
    field: &VectorField,
    c: f64,
    samples: &[Vector],
    n_max: usize,
    disk_samples: usize,
    tol: f64,
) -> Result<Calibration, PoincareError> {
    let bound = std::f64::consts::LN_2 / 2.0;
    let points: Vec<&Vector> = samples.iter().filter(|p| !field.is_singular_at(p)).collect();
    if points.is_empty() {
        return Err(PoincareError::CalibrationFailed("no nonsingular samples".into()));
    }
    let top = 0.5;
    let iopts = IntegratorOptions::new(tol);
    let mut worst = vec![0.0f64; ALPHA_GRID.count()];
    for p in &points {
        let fwd = orbit(field, p, top, iopts, true)?;
        let bwd = orbit(field, p, -top, iopts, true)?;
        for (slot, k) in ALPHA_GRID.enumerate() {
            let alpha = 2f64.powi(-k);
            for j in 1..=8 {
                let t = alpha * j as f64 / 8.0;
                for (seg, s) in [(&fwd, t), (&bwd, -t)] {
                    let (Some(q), Some(phi)) = (seg.point(s), seg.tangent(s)) else { continue };
                    let lp = LinearPoincareOp::from_tangent(field, p, &q, &phi, s)?;
                    worst[slot] = worst[slot].max((lp.logabsdet.exp() - 1.0).abs());
                }
            }
        }
    }
    let alpha =
        ALPHA_GRID.zip(worst.iter()).find(|(_, w)| **w < bound).map(|(k, _)| 2f64.powi(-k)).ok_or_else(|| {
            PoincareError::CalibrationFailed("no alpha on the grid satisfies the determinant bound".into())
        })?;

    let r_inj = field.domain().injectivity_radius();
    let mut beta = (10.0 * alpha * c).min(r_inj) / (2.0 * c);
    let mut checked = 0;
    for _ in 0..40 {
        let mut ok = true;
        'outer: for p in &points {
            for n in 1..=n_max {
                let report = hitting_time_bounds_check(field, p, n, disk_samples, alpha, beta, c, tol)?;
                checked += report.rows.len();
                if report.violations > 0 {
                    ok = false;
                    break 'outer;
                }
            }
        }
        if ok {
            return Ok(Calibration { alpha, beta, checked });
        }
        beta /= 2.0;
    }
    Err(PoincareError::CalibrationFailed(format!("hitting-time band still violated at beta = {beta:e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitRow {
    pub q: Vec<f64>,
    pub tau: Option<f64>,
    pub low: f64,
    pub high: f64,
    pub pass: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingReport {
    pub n: usize,
    pub radius: f64,
    pub rows: Vec<HitRow>,
    pub violations: usize,
}

impl HittingReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// CSV `q_1..q_d, tau, band_low, band_high, pass`.
    pub fn to_csv(&self) -> String {
        let d = self.rows.first().map(|r| r.q.len()).unwrap_or(0);
        let mut head: Vec<String> = (1..=d).map(|i| format!("q_{i}")).collect();
        head.extend(["tau", "band_low", "band_high", "pass"].map(String::from));
        let mut out = head.join(",") + "\n";
        for r in &self.rows {
            let mut row: Vec<String> = r.q.iter().map(|x| format!("{x:.12e}")).collect();
            row.push(r.tau.map(|t| format!("{t:.12e}")).unwrap_or_else(|| "nan".into()));
            row.push(format!("{:.12e}", r.low));
            row.push(format!("{:.12e}", r.high));
            row.push(r.pass.to_string());
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Checks `τ_{p,n}(q) ∈ [n−α, n+α]` for `samples` points of `N(β‖X(p)‖/Cⁿ)`.
/// Crossing failures (no hit, tangency) at a sample count as violations.
#[allow(clippy::too_many_arguments)]
pub fn hitting_time_bounds_check(
    field: &VectorField,
    p: &Vector,
    n: usize,
    samples: usize,
    alpha: f64,
    beta: f64,
    c: f64,
    tol: f64,
) -> Result<HittingReport, PoincareError> {
    let frame = NormalFrame::new(field, p)?;
    let radius = (beta * frame.speed() / c.powi(n as i32)).min(field.domain().injectivity_radius());
    let opts = MapOptions::default().with_alpha(alpha).with_tol(tol).with_target_radius(4.0 * beta * frame.speed());
    let map = PoincareMap::new(field, p, n as f64, radius, opts)?;
    let (low, high) = (n as f64 - alpha, n as f64 + alpha);
    let k = frame.dim();
    let mut pts = disk_points(k, radius, samples);
    if k == 1 {
        pts.retain(|x| x[0] != 0.0);
    }
    let mut rows = Vec::with_capacity(pts.len());
    for xi in pts {
        let q = map.source().point(&xi);
        let (tau, note) = match map.evaluate(&q) {
            Ok((_, t)) => (Some(t), None),
            Err(e @ (PoincareError::NoHit { .. } | PoincareError::Tangency { .. })) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        };
        let pass = tau.is_some_and(|t| t >= low && t <= high);
        rows.push(HitRow { q: q.iter().cloned().collect(), tau, low, high, pass, note });
    }
    let violations = rows.iter().filter(|r| !r.pass).count();
    Ok(HittingReport { n, radius, rows, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use geometry_flow::DomainChart;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn constant_field_certificate() {
        let f = VectorField::new("c", DomainChart::torus(vec![1.0, 1.0], 0.4).unwrap(), |_| v(&[1.0, 0.0]));
        let pts = f.domain().sample_grid(3);
        let cert = boundedness_certificate(&f, &pts, &[-1.0, -0.5, 0.5, 1.0], CertificateOptions::default()).unwrap();
        assert!((cert.c - 1.05).abs() < 1e-9, "{cert:?}");
        let g = VectorField::new("c", DomainChart::torus(vec![1.0, 1.0], 0.4).unwrap(), |_| v(&[1.0, 0.5f64.sqrt()]));
        let cal = calibrate(&g, 1.05, &pts[..2], 2, 4, 1e-10).unwrap();
        assert_eq!(cal.alpha, 0.5);
        let json = cert.with_calibration(&cal).to_json();
        assert!(json.get("C").is_some() && json["conditions"].get("e").is_some());
    }

    #[test]
    fn constant_field_hits_exactly_at_n() {
        let f = VectorField::new("c", DomainChart::torus(vec![1.0, 1.0], 0.4).unwrap(), |_| v(&[1.0, 0.5f64.sqrt()]));
        let r = hitting_time_bounds_check(&f, &v(&[0.2, 0.3]), 3, 6, 0.25, 0.02, 1.05, 1e-11).unwrap();
        assert!(r.passed());
        assert!(r.rows.iter().all(|h| (h.tau.unwrap() - 3.0).abs() < 1e-10));
    }
}
