use serde::Serialize;

use crate::{FlowError, Vector};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChartKind {
    Torus { periods: Vec<f64> },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Annulus { inner: f64, outer: f64 },
}

/// A flat chart: torus, box or planar annulus with the affine exponential map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainChart {
    kind: ChartKind,
    injectivity_radius: f64,
}

fn check_radius(r: f64) -> Result<(), FlowError> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(FlowError::InvalidDomain(format!("injectivity radius must be positive, got {r}")))
    }
}

impl DomainChart {
    pub fn torus(periods: Vec<f64>, injectivity_radius: f64) -> Result<Self, FlowError> {
        if periods.len() < 2 {
            return Err(FlowError::InvalidDomain("dimension must be at least 2".into()));
        }
        if periods.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(FlowError::InvalidDomain(format!("torus periods must be positive: {periods:?}")));
        }
        check_radius(injectivity_radius)?;
        let half = periods.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
        if injectivity_radius > half {
            return Err(FlowError::InvalidDomain(format!(
                "injectivity radius {injectivity_radius} exceeds half the shortest period {half}"
            )));
        }
        Ok(Self { kind: ChartKind::Torus { periods }, injectivity_radius })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>, injectivity_radius: f64) -> Result<Self, FlowError> {
        if lower.len() < 2 || lower.len() != upper.len() {
            return Err(FlowError::InvalidDomain("box corners must share a dimension >= 2".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(FlowError::InvalidDomain(format!("box corners out of order: {lower:?} {upper:?}")));
        }
        check_radius(injectivity_radius)?;
        Ok(Self { kind: ChartKind::Box { lower, upper }, injectivity_radius })
    }

    pub fn annulus(inner: f64, outer: f64, injectivity_radius: f64) -> Result<Self, FlowError> {
        if !(inner.is_finite() && outer.is_finite() && 0.0 < inner && inner < outer) {
            return Err(FlowError::InvalidDomain(format!("annulus needs 0 < a < b, got a={inner}, b={outer}")));
        }
        check_radius(injectivity_radius)?;
        Ok(Self { kind: ChartKind::Annulus { inner, outer }, injectivity_radius })
    }

    pub fn kind(&self) -> &ChartKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ChartKind::Torus { periods } => periods.len(),
            ChartKind::Box { lower, .. } => lower.len(),
            ChartKind::Annulus { .. } => 2,
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        self.injectivity_radius
    }

    fn period(&self, axis: usize) -> Option<f64> {
        match &self.kind {
            ChartKind::Torus { periods } => Some(periods[axis]),
            _ => None,
        }
    }

    /// Wrapped representative in the fundamental domain plus winding counts.
    pub fn wrap(&self, p: &Vector) -> (Vector, Vec<i64>) {
        let mut q = p.clone();
        let mut winding = vec![0i64; p.len()];
        if let ChartKind::Torus { periods } = &self.kind {
            for (i, l) in periods.iter().enumerate() {
                let k = (q[i] / l).floor();
                q[i] -= k * l;
                if q[i] >= *l {
                    q[i] -= l;
                }
                winding[i] = k as i64;
            }
        }
        (q, winding)
    }

    pub fn reduce(&self, p: &Vector) -> Vector {
        self.wrap(p).0
    }

    /// Shortest chart displacement from `from` to `to` (minimal image on torus axes).
    pub fn displacement(&self, from: &Vector, to: &Vector) -> Vector {
        let mut v = to - from;
        for i in 0..v.len() {
            if let Some(l) = self.period(i) {
                v[i] -= l * (v[i] / l).round();
            }
        }
        v
    }

    pub fn distance(&self, p: &Vector, q: &Vector) -> f64 {
        self.displacement(p, q).norm()
    }

    pub fn exp(&self, p: &Vector, v: &Vector) -> Vector {
        self.reduce(&(p + v))
    }

    pub fn log(&self, p: &Vector, q: &Vector) -> Vector {
        self.displacement(p, q)
    }

    pub fn contains(&self, p: &Vector) -> bool {
        match &self.kind {
            ChartKind::Torus { .. } => p.iter().all(|x| x.is_finite()),
            ChartKind::Box { lower, upper } => {
                p.iter().zip(lower.iter().zip(upper)).all(|(x, (a, b))| *x >= a - slack(*a) && *x <= b + slack(*b))
            }
            ChartKind::Annulus { inner, outer } => {
                let r = p.norm();
                r >= inner - slack(*inner) && r <= outer + slack(*outer)
            }
        }
    }

    /// Deterministic sample points covering the domain, `per_axis` points per axis
    /// (for the annulus: radial by angular lattice).
    pub fn sample_grid(&self, per_axis: usize) -> Vec<Vector> {
        let n = per_axis.max(2);
        match &self.kind {
            ChartKind::Annulus { inner, outer } => {
                let mut pts = Vec::with_capacity(n * n);
                for i in 0..n {
                    let r = inner + (outer - inner) * i as f64 / (n - 1) as f64;
                    for j in 0..n {
                        let th = std::f64::consts::TAU * j as f64 / n as f64;
                        pts.push(Vector::from_vec(vec![r * th.cos(), r * th.sin()]));
                    }
                }
                pts
            }
            ChartKind::Torus { periods } => {
                let axes: Vec<Vec<f64>> =
                    periods.iter().map(|l| (0..n).map(|i| l * i as f64 / n as f64).collect()).collect();
                lattice(&axes)
            }
            ChartKind::Box { lower, upper } => {
                let axes: Vec<Vec<f64>> = lower
                    .iter()
                    .zip(upper)
                    .map(|(a, b)| (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
                    .collect();
                lattice(&axes)
            }
        }
    }
}

fn slack(x: f64) -> f64 {
    1e-12 * (1.0 + x.abs())
}

/// Cartesian product of per-axis coordinate lists, last axis fastest.
pub fn lattice(axes: &[Vec<f64>]) -> Vec<Vector> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for x in axis {
                let mut v = prefix.clone();
                v.push(*x);
                next.push(v);
            }
        }
        out = next;
    }
    out.into_iter().map(Vector::from_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DomainChart::torus(vec![1.0, 0.0], 0.1).is_err());
        assert!(DomainChart::boxed(vec![0.0, 1.0], vec![1.0, 1.0], 0.1).is_err());
        assert!(DomainChart::annulus(2.0, 1.0, 0.1).is_err());
        assert!(DomainChart::annulus(1.0, 2.0, -1.0).is_err());
    }

    #[test]
    fn torus_wraps_with_winding() {
        let d = DomainChart::torus(vec![1.0, 2.0], 0.4).unwrap();
        let (q, w) = d.wrap(&v(&[2.25, -0.5]));
        assert!((q[0] - 0.25).abs() < 1e-15 && (q[1] - 1.5).abs() < 1e-15);
        assert_eq!(w, vec![2, -1]);
    }

    #[test]
    fn torus_distance_is_minimal_image() {
        let d = DomainChart::torus(vec![1.0, 1.0], 0.4).unwrap();
        let a = v(&[0.05, 0.5]);
        let b = v(&[0.95, 0.5]);
        assert!((d.distance(&a, &b) - 0.1).abs() < 1e-12);
        assert_eq!(d.distance(&a, &b), d.distance(&b, &a));
        assert_eq!(d.distance(&a, &a), 0.0);
    }

    #[test]
    fn exp_log_roundtrip() {
        let d = DomainChart::torus(vec![1.0, 1.0], 0.4).unwrap();
        let p = v(&[0.9, 0.1]);
        let w = v(&[0.2, -0.3]);
        let q = d.exp(&p, &w);
        assert!((d.log(&p, &q) - w).norm() < 1e-12);
    }

    #[test]
    fn annulus_grid_lies_in_domain() {
        let d = DomainChart::annulus(1.0, 2.0, 0.5).unwrap();
        assert!(d.sample_grid(5).iter().all(|p| d.contains(p)));
        assert_eq!(d.dim(), 2);
    }

    #[test]
    fn lattice_orders_last_axis_fastest() {
        let pts = lattice(&[vec![0.0, 1.0], vec![2.0, 3.0]]);
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[1], v(&[0.0, 3.0]));
    }
}
