use geometry_flow::{central_gradient, SingularityKind, Vector, VectorField};
use serde::Serialize;

use crate::{invariance_residual, CentralizerError};

/// Residual threshold for the invariance precondition.
pub const INVARIANCE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub saddle: Vec<f64>,
    pub radii: Vec<f64>,
    pub series: Vec<f64>,
    pub monotone: bool,
    pub invariance_residual: f64,
}

fn sphere_points(center: &Vector, r: f64, count: usize) -> Vec<Vector> {
    let d = center.len();
    if d == 2 {
        return (0..count)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / count as f64;
                center + Vector::from_vec(vec![r * th.cos(), r * th.sin()])
            })
            .collect();
    }
    poincare::disk_points(d, 1.0, 4 * count)
        .into_iter()
        .filter(|v| v.norm() > 0.1)
        .take(count)
        .map(|v| center + v.normalize() * r)
        .collect()
}

/// `sup ‖∇f‖` over sampled spheres of shrinking radius around a saddle of `X`,
/// after checking that `f` is `X`-invariant on those spheres.
pub fn gradient_decay_probe(
    f: &(dyn Fn(&Vector) -> f64 + Sync),
    grad: Option<&(dyn Fn(&Vector) -> Vector + Sync)>,
    field: &VectorField,
    saddle: &Vector,
    radii: &[f64],
    samples: usize,
    tol: f64,
) -> Result<DecayReport, CentralizerError> {
    let kind = geometry_flow::classify(&field.jacobian(saddle)?);
    if kind != SingularityKind::Saddle {
        return Err(CentralizerError::InvalidInput(format!(
            "point {:?} is a {kind:?}, not a saddle",
            saddle.as_slice()
        )));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) || radii.iter().any(|r| *r <= 0.0) {
        return Err(CentralizerError::InvalidInput("radii must be positive and strictly decreasing".into()));
    }
    let dom = field.domain();
    let t_grid = [-0.5, -0.25, 0.25, 0.5];
    let mut residual = 0.0f64;
    let mut series = Vec::with_capacity(radii.len());
    for &r in radii {
        let pts: Vec<Vector> = sphere_points(saddle, r, samples).iter().map(|q| dom.reduce(q)).collect();
        for q in &pts {
            residual = residual.max(invariance_residual(f, field, q, &t_grid, tol)?);
        }
        if residual > INVARIANCE_THRESHOLD {
            return Err(CentralizerError::InvarianceViolated { residual, threshold: INVARIANCE_THRESHOLD });
        }
        let sup = pts
            .iter()
            .map(|q| match grad {
                Some(g) => g(q).norm(),
                None => central_gradient(f, q).norm(),
            })
            .fold(0.0, f64::max);
        series.push(sup);
    }
    let monotone = series.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12);
    Ok(DecayReport {
        saddle: saddle.iter().cloned().collect(),
        radii: radii.to_vec(),
        series,
        monotone,
        invariance_residual: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use geometry_flow::{DomainChart, Matrix};

    fn saddle() -> VectorField {
        VectorField::new("saddle", DomainChart::boxed(vec![-1.0, -1.0], vec![1.0, 1.0], 0.5).unwrap(), |p| {
            Vector::from_vec(vec![p[0], -p[1]])
        })
        .with_jacobian(|_| Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]))
    }

    #[test]
    fn product_first_integral_decays_linearly() {
        let radii = [0.1, 0.01, 0.001];
        let r = gradient_decay_probe(&|p| p[0] * p[1], None, &saddle(), &Vector::zeros(2), &radii, 16, 1e-11).unwrap();
        for (s, r) in r.series.iter().zip(radii) {
            assert!((s - r).abs() < 1e-8 * r.max(1e-3));
        }
        assert!(r.monotone);
    }

    #[test]
    fn non_invariant_function_rejected() {
        let e = gradient_decay_probe(&|p| p[0], None, &saddle(), &Vector::zeros(2), &[0.1, 0.01], 16, 1e-11);
        assert!(matches!(e, Err(CentralizerError::InvarianceViolated { .. })));
    }
}
