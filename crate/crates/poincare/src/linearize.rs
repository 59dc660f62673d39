use geometry_flow::{min_singular, spectral_norm, Matrix, Vector, VectorField};
use serde::Serialize;

use crate::{disk_points, linear_poincare, LinearPoincareOp, MapOptions, PoincareError, PoincareMap};

const MAX_CONDITION: f64 = 1e8;

/// Linearizing chart `ψ_{X_t(p),t} = P_{p,t} ∘ (lifted map from X_t(p) back to p)`,
/// living on the normal disk at `X_t(p)`. `t = 0` is the identity.
#[derive(Debug, Clone)]
pub struct LinearizingChart {
    time: f64,
    linear: LinearPoincareOp,
    forward: Option<PoincareMap>,
    backward: Option<PoincareMap>,
}

/// Maxima of `‖Dψ‖, ‖Dψ⁻¹‖, |det Dψ|, |det Dψ⁻¹|` over samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiBounds {
    pub norm: f64,
    pub inverse_norm: f64,
    pub det: f64,
    pub inverse_det: f64,
    pub samples: usize,
}

impl PsiBounds {
    fn identity() -> Self {
        Self { norm: 1.0, inverse_norm: 1.0, det: 1.0, inverse_det: 1.0, samples: 0 }
    }

    pub fn max(&self) -> f64 {
        self.norm.max(self.inverse_norm).max(self.det).max(self.inverse_det)
    }

    fn absorb(&mut self, j: &Matrix) {
        let det = j.determinant().abs();
        self.norm = self.norm.max(spectral_norm(j));
        self.inverse_norm = self.inverse_norm.max(1.0 / min_singular(j));
        self.det = self.det.max(det);
        self.inverse_det = self.inverse_det.max(1.0 / det);
        self.samples += 1;
    }
}

impl LinearizingChart {
    /// `radius` bounds the source disk at `p`; the disk at `X_t(p)` uses the injectivity radius.
    pub fn new(field: &VectorField, p: &Vector, t: f64, radius: f64, opts: MapOptions) -> Result<Self, PoincareError> {
        let linear = linear_poincare(field, p, t, opts.tol)?;
        if t == 0.0 {
            return Ok(Self { time: t, linear, forward: None, backward: None });
        }
        let forward = PoincareMap::new(field, p, t, radius, opts)?;
        let r = field.domain().injectivity_radius();
        let backward =
            PoincareMap::between(field, forward.target().clone(), forward.source().with_radius(r)?, -t, opts);
        Ok(Self { time: t, linear, forward: Some(forward), backward: Some(backward) })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn linear(&self) -> &LinearPoincareOp {
        &self.linear
    }

    pub fn forward_map(&self) -> Option<&PoincareMap> {
        self.forward.as_ref()
    }

    fn condition_check(j: &Matrix) -> Result<(), PoincareError> {
        let cond = spectral_norm(j) / min_singular(j);
        if !(cond <= MAX_CONDITION) {
            return Err(PoincareError::IllConditioned { cond });
        }
        Ok(())
    }

    /// `ψ(ξ)` for normal coordinates `ξ` at `X_t(p)`.
    pub fn psi(&self, xi: &Vector) -> Result<Vector, PoincareError> {
        match &self.backward {
            None => Ok(xi.clone()),
            Some(b) => Ok(self.linear.apply(&b.lifted(xi)?)),
        }
    }

    pub fn psi_jacobian(&self, xi: &Vector) -> Result<(Vector, Matrix), PoincareError> {
        match &self.backward {
            None => Ok((xi.clone(), Matrix::identity(xi.len(), xi.len()))),
            Some(b) => {
                let (w, j) = b.lifted_jacobian(xi)?;
                Self::condition_check(&j)?;
                Ok((self.linear.apply(&w), &self.linear.matrix * j))
            }
        }
    }

    /// `ψ⁻¹(w) = lifted forward map of P⁻¹ w`.
    pub fn psi_inverse(&self, w: &Vector) -> Result<Vector, PoincareError> {
        match &self.forward {
            None => Ok(w.clone()),
            Some(f) => {
                let inv = self.linear.inverse().ok_or(PoincareError::IllConditioned { cond: f64::INFINITY })?;
                f.lifted(&(inv * w))
            }
        }
    }

    /// Bounds over the forward image of the source disk of radius `rho·‖X(p)‖`.
    pub fn bounds_over_disk(&self, rho: f64, count: usize) -> Result<PsiBounds, PoincareError> {
        let (Some(f), Some(_)) = (&self.forward, &self.backward) else {
            return Ok(PsiBounds::identity());
        };
        let k = self.linear.source.dim();
        let r = rho * self.linear.source.speed();
        let mut bounds = PsiBounds { norm: 0.0, inverse_norm: 0.0, det: 0.0, inverse_det: 0.0, samples: 0 };
        for xi in disk_points(k, r, count) {
            let image = f.lifted(&xi)?;
            let (_, j) = self.psi_jacobian(&image)?;
            bounds.absorb(&j);
        }
        Ok(bounds)
    }
}

/// Charts `ψ_{X_i(p),i}` for `i = 0..=n` with their bounds over the source disk of radius `rho·‖X(p)‖`.
pub fn linearizing_coordinates(
    field: &VectorField,
    p: &Vector,
    n: usize,
    rho: f64,
    samples: usize,
    opts: MapOptions,
) -> Result<Vec<(LinearizingChart, PsiBounds)>, PoincareError> {
    let radius = (rho * field.eval(p).norm()).min(field.domain().injectivity_radius());
    (0..=n)
        .map(|i| {
            let chart = LinearizingChart::new(field, p, i as f64, radius, opts)?;
            let b = chart.bounds_over_disk(rho, samples)?;
            Ok((chart, b))
        })
        .collect()
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
    fn zero_time_chart_is_identity() {
        let c = LinearizingChart::new(&shear(), &v(&[0.0, 0.3]), 0.0, 0.01, MapOptions::default()).unwrap();
        assert_eq!(c.psi(&v(&[0.2])).unwrap(), v(&[0.2]));
    }

    #[test]
    fn conjugation_diagram_commutes() {
        let f = shear();
        let p = v(&[0.0, 0.3]);
        let c = LinearizingChart::new(&f, &p, 2.0, 0.01, MapOptions::default()).unwrap();
        let fwd = c.forward_map().unwrap();
        for s in [-0.008, 0.003, 0.009] {
            let xi = v(&[s]);
            let lhs = c.psi(&fwd.lifted(&xi).unwrap()).unwrap();
            let rhs = c.linear().apply(&xi);
            assert!((lhs - rhs).norm() < 1e-8);
            let back = c.psi_inverse(&c.linear().apply(&xi)).unwrap();
            assert!((back - fwd.lifted(&xi).unwrap()).norm() < 1e-8);
        }
    }

    #[test]
    fn linear_base_orbit_has_unit_bounds() {
        let out = linearizing_coordinates(&shear(), &v(&[0.0, 0.0]), 2, 1e-3, 5, MapOptions::default()).unwrap();
        for (_, b) in out {
            assert!((b.max() - 1.0).abs() < 1e-7, "{b:?}");
        }
    }
}
