use crate::{FlowError, Vector, VectorField};

/// `[X, Y](p) = DY(p)·X(p) − DX(p)·Y(p)`.
pub fn lie_bracket(x: &VectorField, y: &VectorField, p: &Vector) -> Result<Vector, FlowError> {
    let dx = x.jacobian(p)?;
    let dy = y.jacobian(p)?;
    let out = dy * x.eval(p) - dx * y.eval(p);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(FlowError::JacobianUnavailable { point: p.iter().cloned().collect() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{DomainChart, Matrix};

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn plane() -> DomainChart {
        DomainChart::boxed(vec![-3.0, -3.0], vec![3.0, 3.0], 1.0).unwrap()
    }

    #[test]
    fn self_bracket_vanishes() {
        let x = VectorField::new("nl", plane(), |p| v(&[p[1].sin(), p[0] * p[1]]));
        let b = lie_bracket(&x, &x, &v(&[0.4, -1.2])).unwrap();
        assert!(b.norm() <= 1e-10);
    }

    #[test]
    fn multiples_commute() {
        let x = VectorField::new("nl", plane(), |p| v(&[p[1].sin(), p[0] * p[1]]));
        let y = VectorField::new("3x", plane(), |p| v(&[3.0 * p[1].sin(), 3.0 * p[0] * p[1]]));
        assert!(lie_bracket(&x, &y, &v(&[0.4, -1.2])).unwrap().norm() < 1e-9);
    }

    #[test]
    fn translation_and_shear() {
        let x = VectorField::new("e1", plane(), |_| v(&[1.0, 0.0])).with_jacobian(|_| Matrix::zeros(2, 2));
        let y = VectorField::new("shear", plane(), |p| v(&[0.0, p[0]]))
            .with_jacobian(|_| Matrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]));
        let b = lie_bracket(&x, &y, &v(&[0.7, 2.0])).unwrap();
        assert_eq!(b, v(&[0.0, 1.0]));
    }
}
