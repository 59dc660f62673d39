use geometry_flow::{Matrix, Vector, VectorField};
use serde::Serialize;

use crate::PoincareError;

/// Orthonormal basis of the hyperplane orthogonal to `X(p)`.
///
/// Rule: start from the canonical axes, drop the one most parallel to the flow
/// direction, Gram–Schmidt the rest (index order) against the direction.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFrame {
    base: Vector,
    direction: Vector,
    basis: Matrix,
    speed: f64,
}

#[derive(Serialize)]
struct FrameRecord<'a> {
    base: &'a [f64],
    direction: &'a [f64],
    basis: Vec<Vec<f64>>,
    speed: f64,
}

impl NormalFrame {
    pub fn new(field: &VectorField, p: &Vector) -> Result<Self, PoincareError> {
        let x = field.eval(p);
        if !(x.norm() > field.zero_tolerance()) {
            return Err(PoincareError::SingularPoint { point: p.iter().cloned().collect() });
        }
        Ok(Self::from_direction(p, &x))
    }

    /// Frame at `p` normal to the (nonzero) vector `x`.
    pub fn from_direction(p: &Vector, x: &Vector) -> Self {
        let d = x.len();
        let speed = x.norm();
        let u = x / speed;
        let drop = (0..d).fold(0, |best, i| if u[i].abs() > u[best].abs() { i } else { best });
        let mut accepted: Vec<Vector> = vec![u.clone()];
        for i in (0..d).filter(|&i| i != drop) {
            let mut v = Vector::zeros(d);
            v[i] = 1.0;
            for _ in 0..2 {
                for w in &accepted {
                    let c = v.dot(w);
                    v -= w * c;
                }
            }
            let len = v.norm();
            accepted.push(v / len);
        }
        let basis = Matrix::from_columns(&accepted[1..]);
        Self { base: p.clone(), direction: u, basis, speed }
    }

    pub fn base(&self) -> &Vector {
        &self.base
    }

    /// Unit flow direction `u`.
    pub fn direction(&self) -> &Vector {
        &self.direction
    }

    /// `d x (d-1)` matrix whose columns are `e_1..e_{d-1}`.
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Normal coordinates of a tangent vector (orthogonal projection).
    pub fn coords(&self, v: &Vector) -> Vector {
        self.basis.transpose() * v
    }

    pub fn embed(&self, xi: &Vector) -> Vector {
        &self.basis * xi
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rec = FrameRecord {
            base: self.base.as_slice(),
            direction: self.direction.as_slice(),
            basis: self.basis.column_iter().map(|c| c.iter().cloned().collect()).collect(),
            speed: self.speed,
        };
        serde_json::to_value(rec).unwrap_or(serde_json::Value::Null)
    }
}

/// The frame of `field` at `p`.
pub fn normal_frame(field: &VectorField, p: &Vector) -> Result<NormalFrame, PoincareError> {
    NormalFrame::new(field, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn axis_aligned_field() {
        let f = NormalFrame::from_direction(&v(&[0.3, 0.4]), &v(&[2.0, 0.0]));
        assert_eq!(f.direction(), &v(&[1.0, 0.0]));
        assert_eq!(f.basis().column(0).clone_owned(), v(&[0.0, 1.0]));
        assert_eq!(f.speed(), 2.0);
    }

    #[test]
    fn rotation_at_unit_point() {
        let f = NormalFrame::from_direction(&v(&[1.0, 0.0]), &v(&[0.0, 1.0]));
        assert_eq!(f.basis().column(0).clone_owned(), v(&[1.0, 0.0]));
    }

    #[test]
    fn three_dimensional_frame_is_orthonormal_and_reproducible() {
        let x = v(&[1.0, 1.0, 0.0]) / 2f64.sqrt();
        let a = NormalFrame::from_direction(&v(&[0.0; 3]), &x);
        let b = NormalFrame::from_direction(&v(&[0.0; 3]), &x);
        assert_eq!(a, b);
        let e = a.basis();
        let g = e.transpose() * e;
        assert!((g - Matrix::identity(2, 2)).norm() < 1e-12);
        assert!((e.transpose() * a.direction()).norm() < 1e-12);
        // first axis dropped (tie broken to the lowest index), e_2 orthogonalised
        let s = 0.5f64.sqrt();
        assert!((e.column(0) - v(&[-s, s, 0.0])).norm() < 1e-12);
        assert!((e.column(1) - v(&[0.0, 0.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn singular_point_is_rejected() {
        let dom = geometry_flow::DomainChart::boxed(vec![-1.0, -1.0], vec![1.0, 1.0], 0.5).unwrap();
        let f = VectorField::new("lin", dom, |p| p.clone());
        assert!(matches!(normal_frame(&f, &v(&[0.0, 0.0])), Err(PoincareError::SingularPoint { .. })));
    }
}
