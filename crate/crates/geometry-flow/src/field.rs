use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::{DomainChart, FlowError, Matrix, Vector};

pub type EvalFn = dyn Fn(&Vector) -> Vector + Send + Sync;
pub type JacobianFn = dyn Fn(&Vector) -> Matrix + Send + Sync;

/// Relative singularity threshold: `‖X(p)‖ < ZERO_REL · fieldscale`.
pub const ZERO_REL: f64 = 1e-9;
/// Central-difference step: `FD_REL · (1 + ‖p‖)`.
pub const FD_REL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularityKind {
    Sink,
    Source,
    Saddle,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Singularity {
    pub point: Vec<f64>,
    pub kind: SingularityKind,
}

impl Singularity {
    pub fn new(point: Vec<f64>, kind: SingularityKind) -> Self {
        Self { point, kind }
    }

    pub fn position(&self) -> Vector {
        Vector::from_column_slice(&self.point)
    }
}

/// Classify a zero from the eigenvalues of its Jacobian (real parts only).
pub fn classify(jacobian: &Matrix) -> SingularityKind {
    let ev = jacobian.clone().complex_eigenvalues();
    let pos = ev.iter().filter(|z| z.re > 0.0).count();
    let neg = ev.iter().filter(|z| z.re < 0.0).count();
    match (pos, neg) {
        (0, n) if n == ev.len() => SingularityKind::Sink,
        (p, 0) if p == ev.len() => SingularityKind::Source,
        (p, n) if p > 0 && n > 0 => SingularityKind::Saddle,
        _ => SingularityKind::None,
    }
}

/// An immutable vector field on a flat chart.
#[derive(Clone)]
pub struct VectorField {
    name: String,
    domain: DomainChart,
    eval: Arc<EvalFn>,
    jacobian: Option<Arc<JacobianFn>>,
    singularities: Vec<Singularity>,
    field_scale: f64,
    fd_cap: Option<f64>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("singularities", &self.singularities)
            .field("field_scale", &self.field_scale)
            .finish()
    }
}

impl VectorField {
    pub fn new<F>(name: impl Into<String>, domain: DomainChart, eval: F) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        let eval: Arc<EvalFn> = Arc::new(eval);
        let field_scale = sampled_scale(&domain, eval.as_ref());
        Self { name: name.into(), domain, eval, jacobian: None, singularities: Vec::new(), field_scale, fd_cap: None }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_singularities(mut self, s: Vec<Singularity>) -> Self {
        self.singularities = s;
        self
    }

    /// Caps the finite-difference step, for fields with structure below the default step.
    pub fn with_fd_step_cap(mut self, cap: f64) -> Self {
        self.fd_cap = Some(cap);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &DomainChart {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn singularities(&self) -> &[Singularity] {
        &self.singularities
    }

    pub fn field_scale(&self) -> f64 {
        self.field_scale
    }

    pub fn zero_tolerance(&self) -> f64 {
        ZERO_REL * self.field_scale
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn eval(&self, p: &Vector) -> Vector {
        (self.eval)(p)
    }

    pub fn is_singular_at(&self, p: &Vector) -> bool {
        self.eval(p).norm() < self.zero_tolerance()
    }

    pub fn fd_step(&self, p: &Vector) -> f64 {
        let h = FD_REL * (1.0 + p.norm());
        match self.fd_cap {
            Some(c) => h.min(c),
            None => h,
        }
    }

    pub fn jacobian(&self, p: &Vector) -> Result<Matrix, FlowError> {
        match &self.jacobian {
            Some(j) => {
                let m = j(p);
                if m.iter().all(|x| x.is_finite()) {
                    Ok(m)
                } else {
                    Err(FlowError::JacobianUnavailable { point: p.iter().cloned().collect() })
                }
            }
            None => self.fd_jacobian(p),
        }
    }

    /// Central-difference Jacobian with the step rule of [`VectorField::fd_step`].
    pub fn fd_jacobian(&self, p: &Vector) -> Result<Matrix, FlowError> {
        let d = p.len();
        let h = self.fd_step(p);
        let mut m = Matrix::zeros(d, d);
        for j in 0..d {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus[j] += h;
            minus[j] -= h;
            let width = plus[j] - minus[j];
            let col = (self.eval(&plus) - self.eval(&minus)) / width;
            m.set_column(j, &col);
        }
        if m.iter().all(|x| x.is_finite()) {
            Ok(m)
        } else {
            Err(FlowError::JacobianUnavailable { point: p.iter().cloned().collect() })
        }
    }

    /// Polynomial field: `terms[k]` lists `(coefficient, exponents)` monomials of component k.
    pub fn polynomial(
        name: impl Into<String>,
        domain: DomainChart,
        terms: Vec<Vec<(f64, Vec<u32>)>>,
    ) -> Result<Self, FlowError> {
        let d = domain.dim();
        if terms.len() != d {
            return Err(FlowError::DimensionMismatch { expected: d, got: terms.len() });
        }
        if let Some(bad) = terms.iter().flatten().find(|(_, e)| e.len() != d) {
            return Err(FlowError::DimensionMismatch { expected: d, got: bad.1.len() });
        }
        let terms = Arc::new(terms);
        let t_eval = terms.clone();
        let t_jac = terms;
        let field = Self::new(name, domain, move |p| {
            Vector::from_iterator(p.len(), t_eval.iter().map(|comp| comp.iter().map(|(c, e)| c * monomial(p, e)).sum()))
        })
        .with_jacobian(move |p| {
            let d = p.len();
            let mut m = Matrix::zeros(d, d);
            for (k, comp) in t_jac.iter().enumerate() {
                for (c, e) in comp {
                    for j in 0..d {
                        if e[j] == 0 {
                            continue;
                        }
                        let mut ej = e.clone();
                        ej[j] -= 1;
                        m[(k, j)] += c * e[j] as f64 * monomial(p, &ej);
                    }
                }
            }
            m
        });
        Ok(field)
    }
}

fn monomial(p: &Vector, e: &[u32]) -> f64 {
    p.iter().zip(e).map(|(x, k)| x.powi(*k as i32)).product()
}

fn sampled_scale(domain: &DomainChart, eval: &EvalFn) -> f64 {
    let d = domain.dim();
    let per_axis = ((4096f64).powf(1.0 / d as f64).floor() as usize).clamp(4, 64);
    let s = domain.sample_grid(per_axis).iter().map(|p| eval(p).norm()).filter(|x| x.is_finite()).fold(0.0, f64::max);
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Central-difference gradient of a scalar field with the geometry step rule.
pub fn central_gradient(f: &dyn Fn(&Vector) -> f64, p: &Vector) -> Vector {
    let h = FD_REL * (1.0 + p.norm());
    let mut g = Vector::zeros(p.len());
    for j in 0..p.len() {
        let mut plus = p.clone();
        let mut minus = p.clone();
        plus[j] += h;
        minus[j] -= h;
        g[j] = (f(&plus) - f(&minus)) / (plus[j] - minus[j]);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane() -> DomainChart {
        DomainChart::boxed(vec![-2.0, -2.0], vec![2.0, 2.0], 1.0).unwrap()
    }

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn fd_jacobian_matches_analytic_to_second_order() {
        let f = VectorField::new("nl", plane(), |p| v(&[p[0] * p[1], p[0].sin() + p[1] * p[1] * p[1]]))
            .with_jacobian(|p| Matrix::from_row_slice(2, 2, &[p[1], p[0], p[0].cos(), 3.0 * p[1] * p[1]]));
        for p in [v(&[0.3, -0.7]), v(&[1.1, 0.4]), v(&[-1.5, 1.9])] {
            let err = (f.fd_jacobian(&p).unwrap() - f.jacobian(&p).unwrap()).norm();
            assert!(err < 1e-8, "err {err}");
        }
    }

    #[test]
    fn polynomial_field_evaluates_and_differentiates() {
        // X = (1 - x^2 y, 3 y)
        let f = VectorField::polynomial(
            "poly",
            plane(),
            vec![vec![(1.0, vec![0, 0]), (-1.0, vec![2, 1])], vec![(3.0, vec![0, 1])]],
        )
        .unwrap();
        let p = v(&[0.5, 2.0]);
        assert!((f.eval(&p) - v(&[0.5, 6.0])).norm() < 1e-15);
        let j = f.jacobian(&p).unwrap();
        assert!((j - Matrix::from_row_slice(2, 2, &[-2.0, -0.25, 0.0, 3.0])).norm() < 1e-15);
    }

    #[test]
    fn polynomial_dimension_checked() {
        let r = VectorField::polynomial("bad", plane(), vec![vec![(1.0, vec![0])], vec![]]);
        assert!(matches!(r, Err(FlowError::DimensionMismatch { .. })));
    }

    #[test]
    fn non_finite_jacobian_reported() {
        let f = VectorField::new("blowup", plane(), |p| v(&[1.0 / p[0], 0.0]));
        assert!(matches!(f.fd_jacobian(&v(&[0.0, 0.0])), Err(FlowError::JacobianUnavailable { .. })));
    }

    #[test]
    fn classification_by_eigenvalues() {
        assert_eq!(classify(&Matrix::from_diagonal_element(2, 2, -1.0)), SingularityKind::Sink);
        assert_eq!(classify(&Matrix::from_diagonal_element(2, 2, 2.0)), SingularityKind::Source);
        assert_eq!(classify(&Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])), SingularityKind::Saddle);
        assert_eq!(classify(&Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])), SingularityKind::None);
    }

    #[test]
    fn zero_tolerance_scales_with_field() {
        let f = VectorField::new("lin", plane(), |p| p * 10.0);
        assert!((f.field_scale() - 10.0 * 8f64.sqrt()).abs() < 1e-9);
        assert!(f.is_singular_at(&v(&[0.0, 0.0])));
        assert!(!f.is_singular_at(&v(&[1e-6, 0.0])));
    }

    #[test]
    fn gradient_of_quadratic() {
        let g = central_gradient(&|p: &Vector| p[0] * p[1], &v(&[0.3, 0.4]));
        assert!((g - v(&[0.4, 0.3])).norm() < 1e-12);
    }
}
