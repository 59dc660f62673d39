use geometry_flow::{min_singular, spectral_norm, Matrix, Vector};
use poincare::{disk_points, logabsdet};
use serde::{Serialize, Serializer};

use crate::{PerturbError, RadialBump};

pub(crate) fn rows<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
    let r: Vec<Vec<f64>> = m.row_iter().map(|row| row.iter().cloned().collect()).collect();
    r.serialize(s)
}

/// Round ball in a normal space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn centered(k: usize, radius: f64) -> Self {
        Self { center: vec![0.0; k], radius }
    }

    pub fn center_vec(&self) -> Vector {
        Vector::from_column_slice(&self.center)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, v: &Vector) -> bool {
        (v - self.center_vec()).norm() < self.radius
    }

    /// Deterministic sample of the closed ball.
    pub fn samples(&self, count: usize) -> Vec<Vector> {
        let c = self.center_vec();
        disk_points(self.dim(), self.radius, count).into_iter().map(|v| &c + v).collect()
    }
}

/// Fiber map `v ↦ A·m(v)` with `m` a radial bump (identity when absent).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberMap {
    #[serde(serialize_with = "rows")]
    pub matrix: Matrix,
    pub bump: Option<RadialBump>,
}

impl FiberMap {
    pub fn linear(matrix: Matrix) -> Self {
        Self { matrix, bump: None }
    }

    pub fn eval(&self, v: &Vector) -> Vector {
        match &self.bump {
            Some(b) => &self.matrix * b.eval(v),
            None => &self.matrix * v,
        }
    }

    pub fn jacobian(&self, v: &Vector) -> Matrix {
        match &self.bump {
            Some(b) => &self.matrix * b.jacobian(v),
            None => self.matrix.clone(),
        }
    }

    /// `m(v)` without the linear factor.
    pub fn shape(&self, v: &Vector) -> Vector {
        self.bump.as_ref().map_or_else(|| v.clone(), |b| b.eval(v))
    }

    pub fn shape_jacobian(&self, v: &Vector) -> Matrix {
        let k = v.len();
        self.bump.as_ref().map_or_else(|| Matrix::identity(k, k), |b| b.jacobian(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CocycleOptions {
    /// Bump supports are cut off at this fraction of the available radius.
    pub support_fraction: f64,
    pub step_cap: usize,
    /// Minimal ratio support / plateau.
    pub margin: f64,
    pub safety: f64,
}

impl Default for CocycleOptions {
    fn default() -> Self {
        Self { support_fraction: 0.9, step_cap: 200, margin: 1.25, safety: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CocyclePerturbation {
    pub maps: Vec<FiberMap>,
    pub n1: usize,
    pub gains: Vec<f64>,
    pub total_gain: f64,
    pub threshold: f64,
    pub epsilon: f64,
    pub eta: Option<f64>,
    pub c1_bounds: Vec<f64>,
    pub c0_bounds: Vec<f64>,
    pub u: Ball,
    pub delta: Ball,
}

/// Spreads radial contractions about the center of `Δ` over the forward images of `U`
/// until the plateau log-det gain exceeds `K`, each step within `ε` in `C¹` (and `η` in `C⁰`).
pub fn cocycle_perturbation(
    matrices: &[Matrix],
    u: &Ball,
    delta: &Ball,
    threshold: f64,
    epsilon: f64,
    eta: Option<f64>,
    opts: CocycleOptions,
) -> Result<CocyclePerturbation, PerturbError> {
    let k = u.dim();
    if delta.dim() != k || matrices.iter().any(|m| m.nrows() != k || m.ncols() != k) {
        return Err(PerturbError::InvalidInput("cocycle dimensions disagree".into()));
    }
    if !(epsilon > 0.0) || eta.is_some_and(|e| !(e > 0.0)) || threshold < 0.0 {
        return Err(PerturbError::InvalidInput("need ε > 0, η > 0 and K ≥ 0".into()));
    }
    let offset = (delta.center_vec() - u.center_vec()).norm();
    let room = u.radius - offset;
    if !(delta.radius > 0.0 && room > delta.radius) {
        return Err(PerturbError::InvalidInput("Δ must lie inside U with a positive margin".into()));
    }
    let mut out = CocyclePerturbation {
        maps: Vec::new(),
        n1: 0,
        gains: Vec::new(),
        total_gain: 0.0,
        threshold,
        epsilon,
        eta,
        c1_bounds: Vec::new(),
        c0_bounds: Vec::new(),
        u: u.clone(),
        delta: delta.clone(),
    };
    if threshold > 0.0 {
        let mut b = Matrix::identity(k, k);
        let mut shrink = 1.0;
        loop {
            let i = out.maps.len() + 1;
            if i > opts.step_cap || i > matrices.len() {
                return Err(PerturbError::InfeasibleBudget(format!(
                    "log-det gain {:.4} after {} steps does not exceed K = {threshold} (cap {}, {} matrices)",
                    out.total_gain,
                    i - 1,
                    opts.step_cap,
                    matrices.len()
                )));
            }
            let a = &matrices[i - 1];
            let plateau = spectral_norm(&b) * shrink * delta.radius;
            let support = opts.support_fraction * min_singular(&b) * room;
            if support < opts.margin * plateau {
                return Err(PerturbError::InfeasibleBudget(format!(
                    "step {i}: support {support:e} leaves no margin around the image of Δ ({plateau:e})"
                )));
            }
            let center: Vec<f64> = (&b * delta.center_vec()).iter().cloned().collect();
            let probe = RadialBump::new(center.clone(), plateau, support, 0.5).expect("valid radii");
            let (kernel, kappa) = probe.shape_constants();
            let na = spectral_norm(a);
            let mut s = epsilon / (na * (kernel + kappa.max(1.0)));
            if let Some(e) = eta {
                s = s.min(e / (na * kernel));
            }
            let s = opts.safety * s.min(0.5);
            let bump = RadialBump::new(center, plateau, support, 1.0 - s).expect("valid radii");
            let gain = bump.plateau_gain();
            out.c1_bounds.push(na * (bump.c0_bound() + bump.c1_bound()));
            out.c0_bounds.push(na * bump.c0_bound());
            out.maps.push(FiberMap { matrix: a.clone(), bump: Some(bump) });
            out.gains.push(gain);
            out.total_gain += gain;
            shrink *= 1.0 - s;
            b = a * b;
            if out.total_gain > threshold {
                break;
            }
        }
    }
    out.n1 = out.maps.len();
    for a in &matrices[out.n1..] {
        out.maps.push(FiberMap::linear(a.clone()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CocycleCheck {
    pub c1_distance: f64,
    pub c0_distance: f64,
    pub grid_points: usize,
    pub support_checked: usize,
    pub support_steps: usize,
    pub support_exact: bool,
    /// Per sample of `Δ`, the first `n ≤ n1` with distortion above `K`.
    pub reached: Vec<Option<usize>>,
    pub min_distortion: f64,
    pub bullets: [bool; 4],
}

impl CocycleCheck {
    pub fn passed(&self) -> bool {
        self.bullets.iter().all(|b| *b)
    }
}

fn fd_jacobian(f: &dyn Fn(&Vector) -> Vector, v: &Vector, h: f64) -> Matrix {
    let k = v.len();
    let mut m = Matrix::zeros(k, k);
    for j in 0..k {
        let mut a = v.clone();
        let mut b = v.clone();
        a[j] += h;
        b[j] -= h;
        m.set_column(j, &((f(&a) - f(&b)) / (a[j] - b[j])));
    }
    m
}

/// Checks the four bullets by direct composition: `C¹` and `C⁰` distances on sampled grids
/// (finite-difference Jacobians), exact agreement outside the images of `U` for `n ≤ 2n₁`,
/// and distortion above `K` at every sample of `Δ`.
pub fn verify_cocycle(matrices: &[Matrix], pert: &CocyclePerturbation, samples: usize) -> CocycleCheck {
    let k = pert.u.dim();
    let grid = match k {
        1 => 65,
        2 => 1089,
        _ => 2000,
    };
    let mut c1 = 0.0f64;
    let mut c0 = 0.0f64;
    for (i, map) in pert.maps.iter().enumerate().take(pert.n1) {
        let Some(b) = &map.bump else { continue };
        let a = &matrices[i];
        let around = Ball::new(b.center.clone(), 1.05 * b.support);
        let h = 1e-6 * b.support;
        let (mut v0, mut v1) = (0.0f64, 0.0f64);
        for v in around.samples(grid) {
            v0 = v0.max((map.eval(&v) - a * &v).norm());
            let j = fd_jacobian(&|w| map.eval(w), &v, h);
            v1 = v1.max(spectral_norm(&(j - a)));
        }
        c1 = c1.max(v0 + v1);
        c0 = c0.max(v0);
    }

    let steps = (2 * pert.n1).min(pert.maps.len()).max(pert.n1);
    let c = pert.u.center_vec();
    let mut outside = Vec::new();
    for scale in [1.01, 1.5, 3.0] {
        for e in disk_points(k, 1.0, 16) {
            if e.norm() > 1e-9 {
                outside.push(&c + e.normalize() * (scale * pert.u.radius));
            }
        }
    }
    let mut exact = true;
    for y in &outside {
        let (mut gv, mut fv) = (y.clone(), y.clone());
        let (mut gj, mut fj) = (Matrix::identity(k, k), Matrix::identity(k, k));
        for (i, map) in pert.maps.iter().enumerate().take(steps) {
            gj = map.jacobian(&gv) * gj;
            fj = &matrices[i] * fj;
            gv = map.eval(&gv);
            fv = &matrices[i] * fv;
            exact &= gv == fv && gj == fj;
        }
    }

    let mut reached = Vec::new();
    let mut min_best = f64::INFINITY;
    for y in pert.delta.samples(samples) {
        let mut v = y.clone();
        let (mut gj, mut fj) = (Matrix::identity(k, k), Matrix::identity(k, k));
        let mut first = None;
        let mut best = 0.0f64;
        for (i, map) in pert.maps.iter().enumerate().take(pert.n1) {
            gj = map.jacobian(&v) * gj;
            fj = &matrices[i] * fj;
            v = map.eval(&v);
            let d = (logabsdet(&fj) - logabsdet(&gj)).abs();
            best = best.max(d);
            if first.is_none() && d > pert.threshold {
                first = Some(i + 1);
            }
        }
        min_best = min_best.min(best);
        reached.push(if pert.threshold == 0.0 { Some(0) } else { first });
    }
    let distortion_ok = pert.threshold == 0.0 || reached.iter().all(|r| r.is_some());
    let bullets = [c1 < pert.epsilon, pert.eta.is_none_or(|e| c0 < e), exact, distortion_ok];
    CocycleCheck {
        c1_distance: c1,
        c0_distance: c0,
        grid_points: grid,
        support_checked: outside.len(),
        support_steps: steps,
        support_exact: exact,
        reached,
        min_distortion: if min_best.is_finite() { min_best } else { 0.0 },
        bullets,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_threshold_changes_nothing() {
        let a = vec![Matrix::identity(1, 1); 4];
        let p = cocycle_perturbation(
            &a,
            &Ball::centered(1, 1.0),
            &Ball::centered(1, 0.5),
            0.0,
            0.2,
            None,
            Default::default(),
        )
        .unwrap();
        assert_eq!(p.n1, 0);
        assert!(p.maps.iter().all(|m| m.bump.is_none() && m.matrix == a[0]));
    }

    #[test]
    fn identity_cocycle_reaches_threshold() {
        let a = vec![Matrix::identity(1, 1); 200];
        let p = cocycle_perturbation(
            &a,
            &Ball::centered(1, 1.0),
            &Ball::centered(1, 0.5),
            1.0,
            0.2,
            None,
            Default::default(),
        )
        .unwrap();
        assert!(p.total_gain > 1.0 && p.n1 > 1);
        let check = verify_cocycle(&a, &p, 41);
        assert!(check.passed(), "{check:?}");
    }

    #[test]
    fn tiny_budget_is_infeasible() {
        let a = vec![Matrix::identity(1, 1); 10];
        let e = cocycle_perturbation(
            &a,
            &Ball::centered(1, 1.0),
            &Ball::centered(1, 0.5),
            1.0,
            1e-3,
            None,
            Default::default(),
        );
        assert!(matches!(e, Err(PerturbError::InfeasibleBudget(_))));
    }
}
