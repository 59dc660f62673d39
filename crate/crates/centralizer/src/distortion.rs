use geometry_flow::{flow, DenseStep, Integrator, IntegratorOptions, StepControl, Vector, VectorField};
use poincare::{linear_poincare, LinearPoincareOp, PoincareError};
use rayon::prelude::*;
use serde::Serialize;

use crate::CentralizerError;

/// `log|det P_{p,k·dt}|` for `k = 1..=count` from one co-integrated orbit.
/// Stops early (returning the failing index and error) when the orbit becomes singular.
pub fn logdet_series(
    field: &VectorField,
    p: &Vector,
    count: usize,
    dt: f64,
    tol: f64,
) -> (Vec<f64>, Option<(usize, PoincareError)>) {
    let mut steps: Vec<DenseStep> = Vec::new();
    let integ = Integrator::new(field, IntegratorOptions::new(tol));
    let failure = integ
        .solve(p, count as f64 * dt, true, |s| {
            steps.push(s.clone());
            StepControl::Continue
        })
        .err();
    let mut out = Vec::with_capacity(count);
    let mut j = 0;
    for k in 1..=count {
        let t = k as f64 * dt;
        while j < steps.len() && !steps[j].contains(t) {
            j += 1;
        }
        let Some(step) = steps.get(j) else {
            let err = failure.clone().map(PoincareError::from).unwrap_or(PoincareError::NoHit { horizon: t });
            return (out, Some((k, err)));
        };
        let q = field.domain().reduce(&step.point(t));
        let phi = step.tangent(t).expect("tangent integrated");
        match LinearPoincareOp::from_tangent(field, p, &q, &phi, t) {
            Ok(op) => out.push(op.logabsdet),
            Err(e) => return (out, Some((k, e))),
        }
    }
    (out, None)
}

/// Same series by composing unit pieces `P_{X_{(k-1)dt}(p), dt}`.
pub fn logdet_series_composed(
    field: &VectorField,
    p: &Vector,
    count: usize,
    dt: f64,
    tol: f64,
) -> Result<Vec<f64>, CentralizerError> {
    let mut q = p.clone();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(count);
    for k in 1..=count {
        let op = linear_poincare(field, &q, dt, tol)
            .map_err(|e| CentralizerError::SeriesInterrupted { index: k, source: e })?;
        acc += op.logabsdet;
        out.push(acc);
        q = flow(field, &q, dt, tol)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interruption {
    pub index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionRecord {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub step: f64,
    pub requested: usize,
    /// `Δ_k = |log det P_{x,k·step} − log det P_{y,k·step}|`.
    pub series: Vec<f64>,
    pub logdet_x: Vec<f64>,
    pub logdet_y: Vec<f64>,
    pub interrupted: Option<Interruption>,
}

impl DistortionRecord {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,t,logdet_x,logdet_y,delta\n");
        for (k, d) in self.series.iter().enumerate() {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                k + 1,
                (k + 1) as f64 * self.step,
                self.logdet_x[k],
                self.logdet_y[k],
                d
            ));
        }
        out
    }
}

/// Distortion series, keeping the prefix computed before any interruption.
pub fn distortion_series(
    field: &VectorField,
    x: &Vector,
    y: &Vector,
    n: usize,
    step: f64,
    tol: f64,
) -> DistortionRecord {
    let ((lx, ex), (ly, ey)) =
        rayon::join(|| logdet_series(field, x, n, step, tol), || logdet_series(field, y, n, step, tol));
    let m = lx.len().min(ly.len());
    let series = (0..m).map(|k| (lx[k] - ly[k]).abs()).collect();
    let interrupted = [ex, ey]
        .into_iter()
        .flatten()
        .min_by_key(|(k, _)| *k)
        .map(|(index, e)| Interruption { index, error: e.to_string() });
    DistortionRecord {
        x: x.iter().cloned().collect(),
        y: y.iter().cloned().collect(),
        step,
        requested: n,
        series,
        logdet_x: lx[..m].to_vec(),
        logdet_y: ly[..m].to_vec(),
        interrupted,
    }
}

/// Full series `Δ_1..Δ_N` (unit steps unless `step` says otherwise); an interruption is an error.
pub fn normal_distortion(
    field: &VectorField,
    x: &Vector,
    y: &Vector,
    n: usize,
    step: f64,
    tol: f64,
) -> Result<DistortionRecord, CentralizerError> {
    let (lx, ex) = logdet_series(field, x, n, step, tol);
    if let Some((index, source)) = ex {
        return Err(CentralizerError::SeriesInterrupted { index, source });
    }
    let (ly, ey) = logdet_series(field, y, n, step, tol);
    if let Some((index, source)) = ey {
        return Err(CentralizerError::SeriesInterrupted { index, source });
    }
    Ok(DistortionRecord {
        x: x.iter().cloned().collect(),
        y: y.iter().cloned().collect(),
        step,
        requested: n,
        series: lx.iter().zip(&ly).map(|(a, b)| (a - b).abs()).collect(),
        logdet_x: lx,
        logdet_y: ly,
        interrupted: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UndRow {
    pub index: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Minimal `k` with `Δ_k > K`.
    pub achieved: Option<usize>,
    pub time: Option<f64>,
    pub max_delta: f64,
    pub interrupted: Option<Interruption>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UndReport {
    pub threshold: f64,
    pub horizon: usize,
    pub step: f64,
    pub rows: Vec<UndRow>,
    pub achieved: usize,
}

/// For each pair, the first `k ≤ N` with `Δ_k > K` (or none).
pub fn und_probe(
    field: &VectorField,
    pairs: &[(Vector, Vector)],
    k_threshold: f64,
    n: usize,
    step: f64,
    tol: f64,
) -> UndReport {
    let rows: Vec<UndRow> = pairs
        .par_iter()
        .enumerate()
        .map(|(index, (x, y))| {
            let rec = distortion_series(field, x, y, n, step, tol);
            let achieved = rec.series.iter().position(|d| *d > k_threshold).map(|k| k + 1);
            UndRow {
                index,
                x: rec.x,
                y: rec.y,
                achieved,
                time: achieved.map(|k| k as f64 * step),
                max_delta: rec.series.iter().cloned().fold(0.0, f64::max),
                interrupted: if achieved.is_some() { None } else { rec.interrupted },
            }
        })
        .collect();
    let achieved = rows.iter().filter(|r| r.achieved.is_some()).count();
    UndReport { threshold: k_threshold, horizon: n, step, rows, achieved }
}

#[cfg(test)]
mod tests {
    use super::*;
    use geometry_flow::{DomainChart, Matrix};

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn constant_field_has_no_distortion() {
        let f = VectorField::new("c", DomainChart::torus(vec![1.0, 1.0], 0.4).unwrap(), |_| v(&[1.0, 0.3]));
        let r = normal_distortion(&f, &v(&[0.1, 0.2]), &v(&[0.3, 0.4]), 10, 1.0, 1e-10).unwrap();
        assert!(r.series.iter().all(|d| *d < 1e-12));
        let und = und_probe(&f, &[(v(&[0.1, 0.2]), v(&[0.3, 0.4]))], 0.5, 5, 1.0, 1e-10);
        assert_eq!(und.achieved, 0);
    }

    #[test]
    fn singular_orbit_interrupts_at_index() {
        let f =
            VectorField::new("sink", DomainChart::boxed(vec![-2.0, -2.0], vec![2.0, 2.0], 1.0).unwrap(), |p| -p * 40.0)
                .with_jacobian(|_| Matrix::identity(2, 2) * -40.0);
        let (s, e) = logdet_series(&f, &v(&[1.0, 0.5]), 5, 1.0, 1e-10);
        assert!(s.is_empty());
        assert_eq!(e.unwrap().0, 1);
    }
}
