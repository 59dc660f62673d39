use geometry_flow::{flow_with_tangent, Matrix, Vector, VectorField};

use crate::{NormalFrame, PoincareError};

/// Matrix of the linear Poincaré flow `P_{p,t}` between the normal frames at `p` and `X_t(p)`.
#[derive(Debug, Clone)]
pub struct LinearPoincareOp {
    pub source: NormalFrame,
    pub target: NormalFrame,
    pub time: f64,
    pub matrix: Matrix,
    pub logabsdet: f64,
}

impl LinearPoincareOp {
    /// Builds the operator from an already integrated tangent map `phi = DX_t(p)`.
    pub fn from_tangent(
        field: &VectorField,
        p: &Vector,
        image: &Vector,
        phi: &Matrix,
        time: f64,
    ) -> Result<Self, PoincareError> {
        let source = NormalFrame::new(field, p)?;
        let target = NormalFrame::new(field, image)?;
        let matrix = target.basis().transpose() * phi * source.basis();
        let logabsdet = logabsdet(&matrix);
        Ok(Self { source, target, time, matrix, logabsdet })
    }

    pub fn apply(&self, xi: &Vector) -> Vector {
        &self.matrix * xi
    }

    pub fn inverse(&self) -> Option<Matrix> {
        self.matrix.clone().try_inverse()
    }
}

/// `log|det m|` from the diagonal of a QR factorisation.
pub fn logabsdet(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let r = m.clone().qr().r();
    r.diagonal().iter().map(|x| x.abs().ln()).sum()
}

pub fn linear_poincare(field: &VectorField, p: &Vector, t: f64, tol: f64) -> Result<LinearPoincareOp, PoincareError> {
    let (q, phi) = flow_with_tangent(field, p, t, tol)?;
    LinearPoincareOp::from_tangent(field, p, &q, &phi, t)
}

/// CSV rows `p_1..p_d, t, logabsdet` for every pair in `points x times`.
pub fn lpf_sweep_csv(field: &VectorField, points: &[Vector], times: &[f64], tol: f64) -> Result<String, PoincareError> {
    let d = field.dim();
    let mut header: Vec<String> = (1..=d).map(|i| format!("p_{i}")).collect();
    header.push("t".into());
    header.push("logabsdet".into());
    let mut out = header.join(",") + "\n";
    for p in points {
        for &t in times {
            let op = linear_poincare(field, p, t, tol)?;
            let mut row: Vec<String> = p.iter().map(|x| format!("{x:.12e}")).collect();
            row.push(format!("{t:.12e}"));
            row.push(format!("{:.12e}", op.logabsdet));
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use geometry_flow::DomainChart;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn shear() -> VectorField {
        VectorField::new("shear", DomainChart::boxed(vec![-50.0, -1e4], vec![50.0, 1e4], 1.0).unwrap(), |p| {
            v(&[1.0, p[1]])
        })
        .with_jacobian(|_| Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]))
    }

    #[test]
    fn logabsdet_matches_determinant() {
        let m = Matrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.5, -3.0, 1.0, 0.0, 1.0, 4.0]);
        assert!((logabsdet(&m) - m.determinant().abs().ln()).abs() < 1e-12);
    }

    #[test]
    fn shear_strip_unit_time() {
        let op = linear_poincare(&shear(), &v(&[0.0, 0.0]), 1.0, 1e-12).unwrap();
        assert!((op.logabsdet - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_field_gives_identity() {
        let f = VectorField::new("c", DomainChart::torus(vec![1.0, 1.0], 0.4).unwrap(), |_| v(&[1.0, 0.5]));
        let op = linear_poincare(&f, &v(&[0.1, 0.2]), 2.5, 1e-12).unwrap();
        assert!((op.matrix.clone() - Matrix::identity(1, 1)).norm() < 1e-12);
        assert!(op.logabsdet.abs() < 1e-12);
    }
}
