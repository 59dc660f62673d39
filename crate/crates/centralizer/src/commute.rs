use geometry_flow::{flow_with_tangent, lie_bracket, Vector, VectorField};
use rayon::prelude::*;
use serde::Serialize;

use crate::CentralizerError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleFailure {
    pub point: Vec<f64>,
    pub t: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutationReport {
    pub grid: String,
    pub points: usize,
    pub t_grid: Vec<f64>,
    pub max_bracket: f64,
    pub max_flow: f64,
    pub tolerance: f64,
    pub verdict: bool,
    pub failures: Vec<SampleFailure>,
}

/// Max of `‖[X,Y]‖` and of `‖Y(X_t x) − DX_t(x)·Y(x)‖` over the grid.
pub fn commutation_residual(
    x: &VectorField,
    y: &VectorField,
    grid: &[Vector],
    t_grid: &[f64],
    tol: f64,
    grid_label: &str,
) -> CommutationReport {
    let per_point: Vec<(f64, f64, Vec<SampleFailure>)> = grid
        .par_iter()
        .map(|p| {
            let mut fails = Vec::new();
            let fail = |t: Option<f64>, e: String| SampleFailure { point: p.iter().cloned().collect(), t, error: e };
            let br = match lie_bracket(x, y, p) {
                Ok(b) => b.norm(),
                Err(e) => {
                    fails.push(fail(None, e.to_string()));
                    0.0
                }
            };
            let yp = y.eval(p);
            let mut fl = 0.0f64;
            for &t in t_grid {
                match flow_with_tangent(x, p, t, 1e-11) {
                    Ok((q, phi)) => fl = fl.max((y.eval(&q) - phi * &yp).norm()),
                    Err(e) => fails.push(fail(Some(t), e.to_string())),
                }
            }
            (br, fl, fails)
        })
        .collect();
    let mut report = CommutationReport {
        grid: grid_label.to_string(),
        points: grid.len(),
        t_grid: t_grid.to_vec(),
        max_bracket: 0.0,
        max_flow: 0.0,
        tolerance: tol,
        verdict: false,
        failures: Vec::new(),
    };
    for (b, f, fails) in per_point {
        report.max_bracket = report.max_bracket.max(b);
        report.max_flow = report.max_flow.max(f);
        report.failures.extend(fails);
    }
    report.verdict = report.max_bracket <= tol && report.max_flow <= tol && report.failures.is_empty();
    report
}

/// `‖Y − π_X(Y) X‖ / (1 + ‖Y‖)`, or `‖Y‖ / (1 + ‖Y‖)` where `X` vanishes.
pub fn collinearity_defect(x: &VectorField, y: &VectorField, p: &Vector) -> f64 {
    let xv = x.eval(p);
    let yv = y.eval(p);
    if xv.norm() > x.zero_tolerance() {
        let c = xv.dot(&yv) / xv.dot(&xv);
        (&yv - xv * c).norm() / (1.0 + yv.norm())
    } else {
        yv.norm() / (1.0 + yv.norm())
    }
}

/// `⟨X, Y⟩ / ⟨X, X⟩`, the `f` in `Y = f X`.
pub fn recover_f(x: &VectorField, y: &VectorField, p: &Vector) -> Result<f64, CentralizerError> {
    let xv = x.eval(p);
    if !(xv.norm() > x.zero_tolerance()) {
        return Err(CentralizerError::SingularPoint { point: p.iter().cloned().collect() });
    }
    Ok(xv.dot(&y.eval(p)) / xv.dot(&xv))
}

/// `max_t |f(X_t p) − f(p)|`.
pub fn invariance_residual(
    f: &dyn Fn(&Vector) -> f64,
    x: &VectorField,
    p: &Vector,
    t_grid: &[f64],
    tol: f64,
) -> Result<f64, CentralizerError> {
    let f0 = f(p);
    let mut worst = 0.0f64;
    for &t in t_grid {
        let q = geometry_flow::flow(x, p, t, tol)?;
        worst = worst.max((f(&q) - f0).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use geometry_flow::DomainChart;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn plane() -> DomainChart {
        DomainChart::boxed(vec![-3.0, -3.0], vec![3.0, 3.0], 1.0).unwrap()
    }

    #[test]
    fn orthogonal_unit_fields_have_half_defect() {
        let x = VectorField::new("e1", plane(), |_| v(&[1.0, 0.0]));
        let y = VectorField::new("e2", plane(), |_| v(&[0.0, 1.0]));
        assert_eq!(collinearity_defect(&x, &y, &v(&[0.3, 0.1])), 0.5);
    }

    #[test]
    fn multiple_is_recovered() {
        let x = VectorField::new("x", plane(), |p| v(&[1.0 + p[1] * p[1], -p[0]]));
        let y = VectorField::new("3x", plane(), |p| v(&[1.0 + p[1] * p[1], -p[0]]) * 3.0);
        assert!((recover_f(&x, &y, &v(&[0.4, -0.2])).unwrap() - 3.0).abs() < 1e-15);
        assert!(collinearity_defect(&x, &y, &v(&[0.4, -0.2])) < 1e-15);
        let r = commutation_residual(&x, &y, &[v(&[0.1, 0.2]), v(&[-0.5, 0.3])], &[0.5, -0.5], 1e-8, "two points");
        assert!(r.verdict, "{r:?}");
    }

    #[test]
    fn singular_recovery_is_an_error() {
        let x = VectorField::new("lin", plane(), |p| p.clone());
        assert!(recover_f(&x, &x, &v(&[0.0, 0.0])).is_err());
        assert_eq!(collinearity_defect(&x, &x, &v(&[0.0, 0.0])), 0.0);
    }

    #[test]
    fn constant_scalar_is_invariant() {
        let x = VectorField::new("rot", plane(), |p| v(&[-p[1], p[0]]));
        let r = invariance_residual(&|_| 4.0, &x, &v(&[0.5, 0.5]), &[1.0, 2.0], 1e-10).unwrap();
        assert_eq!(r, 0.0);
    }
}
