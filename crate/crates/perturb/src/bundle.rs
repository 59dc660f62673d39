use geometry_flow::{spectral_norm, Matrix, Vector, VectorField};
use poincare::{LinearizingChart, MapOptions, PoincareMap, SectionDisk};
use rayon::prelude::*;
use serde::Serialize;

use crate::{Ball, BaseOrbit, CocyclePerturbation, FiberMap, PerturbError};

/// Perturbed transverse maps `g̃_1..g̃_n` along the orbit of `p`, in the frames of the
/// linear Poincaré flow. `U` is a ball in normal coordinates at `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationBundle {
    pub base: Vec<f64>,
    pub u: Ball,
    pub steps: usize,
    pub maps: Vec<FiberMap>,
    pub delta1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundleCheck {
    pub support_checked: usize,
    pub support_max: f64,
    pub c1_distances: Vec<f64>,
    pub delta1: f64,
    pub passed: bool,
}

fn fd_columns(f: &dyn Fn(&Vector) -> Vector, v: &Vector, h: f64) -> Matrix {
    let k = v.len();
    let mut m = Matrix::zeros(f(v).len(), k);
    for j in 0..k {
        let mut a = v.clone();
        let mut b = v.clone();
        a[j] += h;
        b[j] -= h;
        m.set_column(j, &((f(&a) - f(&b)) / (a[j] - b[j])));
    }
    m
}

impl PerturbationBundle {
    /// `g̃_i = P_{X_{i−1}(p),1}` for every step.
    pub fn identity(orbit: &BaseOrbit, u: Ball) -> Result<Self, PerturbError> {
        let maps = orbit.cocycle()?.into_iter().map(FiberMap::linear).collect();
        Ok(Self { base: orbit.base().iter().cloned().collect(), u, steps: orbit.steps(), maps, delta1: 0.0 })
    }

    /// First `n` maps of a cocycle perturbation built on the cocycle of `orbit`.
    pub fn from_cocycle(orbit: &BaseOrbit, pert: &CocyclePerturbation, delta1: f64) -> Result<Self, PerturbError> {
        let n = orbit.steps();
        if pert.maps.len() < n {
            return Err(PerturbError::InvalidInput(format!("cocycle has {} maps, need {n}", pert.maps.len())));
        }
        Ok(Self {
            base: orbit.base().iter().cloned().collect(),
            u: pert.u.clone(),
            steps: n,
            maps: pert.maps[..n].to_vec(),
            delta1,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.maps.iter().all(|m| m.bump.is_none())
    }

    /// Sampled check of the two invariants: `P⁻¹ ∘ g̃_i` is the identity outside
    /// `P_{p,i−1}(Ũ)`, and `d_{C¹}(g̃_i, P) ≤ δ₁` on a grid with difference Jacobians.
    pub fn check(&self, orbit: &BaseOrbit, samples: usize) -> Result<BundleCheck, PerturbError> {
        let cocycle = orbit.cocycle()?;
        let c = self.u.center_vec();
        let k = self.u.dim();
        let mut support_checked = 0;
        let mut support_max: f64 = 0.0;
        let mut c1_distances = Vec::with_capacity(self.steps);
        for (i, g) in self.maps.iter().enumerate() {
            let l = &orbit.lpf(i).matrix;
            let p = &cocycle[i];
            let pinv = p.clone().try_inverse().ok_or_else(|| PerturbError::InvalidInput("singular step".into()))?;
            for scale in [1.01, 1.5, 3.0] {
                for dir in Ball::centered(k, 1.0).samples(samples.max(2)) {
                    let norm = dir.norm();
                    if norm == 0.0 {
                        continue;
                    }
                    let w = l * (&c + dir * (scale * self.u.radius / norm));
                    let back = &pinv * g.eval(&w);
                    support_max = support_max.max((back - &w).norm() / (1.0 + w.norm()));
                    support_checked += 1;
                }
            }
            let grid = Ball::new(c.iter().cloned().collect(), 1.05 * self.u.radius).samples(samples);
            let h = 1e-6 * self.u.radius * spectral_norm(l).max(1e-300);
            let dist = grid
                .par_iter()
                .map(|xi| {
                    let w = l * xi;
                    let value = (g.eval(&w) - p * &w).norm();
                    let jac = fd_columns(&|v| g.eval(v), &w, h);
                    value + spectral_norm(&(jac - p))
                })
                .reduce(|| 0.0, f64::max);
            c1_distances.push(dist);
        }
        let max_c1 = c1_distances.iter().cloned().fold(0.0, f64::max);
        let passed = support_max <= 1e-12 && max_c1 <= self.delta1 * (1.0 + 1e-6) + 1e-9;
        Ok(BundleCheck { support_checked, support_max, c1_distances, delta1: self.delta1, passed })
    }
}

/// Disk maps `g_i = Ψ⁻¹_{X_i(p),i} ∘ g̃_i ∘ Ψ_{X_{i−1}(p),i−1}` between the sections at
/// `X_{i−1}(p)` and `X_i(p)`, next to the unperturbed Poincaré maps.
#[derive(Debug, Clone)]
pub struct LiftedPerturbation {
    field: VectorField,
    bundle: PerturbationBundle,
    charts: Vec<LinearizingChart>,
    disks: Vec<SectionDisk>,
    unperturbed: Vec<PoincareMap>,
    frame_inverses: Vec<Matrix>,
    opts: MapOptions,
}

/// Lifts a bundle through the linearizing charts at `X_i(p)`, `i = 0..=n`.
pub fn lift_perturbation(
    field: &VectorField,
    bundle: &PerturbationBundle,
    opts: MapOptions,
) -> Result<LiftedPerturbation, PerturbError> {
    let p = Vector::from_column_slice(&bundle.base);
    let r = field.domain().injectivity_radius();
    let charts: Vec<LinearizingChart> = (0..=bundle.steps)
        .into_par_iter()
        .map(|i| LinearizingChart::new(field, &p, i as f64, r, opts))
        .collect::<Result<_, _>>()?;
    let mut disks = vec![SectionDisk::new(field, &p, r)?];
    for chart in &charts[1..] {
        disks.push(chart.forward_map().expect("positive time").target().clone());
    }
    let unperturbed = (1..=bundle.steps)
        .map(|i| PoincareMap::between(field, disks[i - 1].clone(), disks[i].clone(), 1.0, opts))
        .collect();
    let frame_inverses = charts
        .iter()
        .map(|c| {
            c.linear()
                .inverse()
                .ok_or(PerturbError::Poincare(poincare::PoincareError::IllConditioned { cond: f64::INFINITY }))
        })
        .collect::<Result<_, _>>()?;
    Ok(LiftedPerturbation {
        field: field.clone(),
        bundle: bundle.clone(),
        charts,
        disks,
        unperturbed,
        frame_inverses,
        opts,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LiftDistance {
    pub step: usize,
    pub c0: f64,
    pub c1: f64,
    pub samples: usize,
}

impl LiftedPerturbation {
    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn bundle(&self) -> &PerturbationBundle {
        &self.bundle
    }

    pub fn steps(&self) -> usize {
        self.bundle.steps
    }

    pub fn options(&self) -> MapOptions {
        self.opts
    }

    /// Section disk at `X_i(p)`.
    pub fn disk(&self, i: usize) -> &SectionDisk {
        &self.disks[i]
    }

    pub fn chart(&self, i: usize) -> &LinearizingChart {
        &self.charts[i]
    }

    /// `𝒫_{X_{i−1}(p),1}`.
    pub fn unperturbed(&self, i: usize) -> &PoincareMap {
        &self.unperturbed[i - 1]
    }

    /// Point of section `i` whose chart preimage at `p` has coordinates `ξ`.
    pub fn section_point(&self, i: usize, xi: &Vector) -> Result<Vector, PerturbError> {
        let w = &self.charts[i].linear().matrix * xi;
        Ok(self.disks[i].point(&self.charts[i].psi_inverse(&w)?))
    }

    /// `g_i(q)` through the charts, for `q` on section `i−1`, without the support branch.
    pub fn conjugated(&self, i: usize, q: &Vector) -> Result<Vector, PerturbError> {
        let w = self.charts[i - 1].psi(&self.disks[i - 1].coords(q))?;
        let image = self.bundle.maps[i - 1].eval(&w);
        Ok(self.disks[i].point(&self.charts[i].psi_inverse(&image)?))
    }

    /// `g_i(q)`: the unperturbed map outside `𝒫_{p,i−1}(U)` and outside the bump support.
    pub fn eval(&self, i: usize, q: &Vector) -> Result<Vector, PerturbError> {
        let g = &self.bundle.maps[i - 1];
        let w = self.charts[i - 1].psi(&self.disks[i - 1].coords(q))?;
        let xi = &self.frame_inverses[i - 1] * &w;
        let active = g.bump.as_ref().is_some_and(|b| b.contains_support(&w));
        if !self.bundle.u.contains(&xi) || !active {
            return Ok(self.unperturbed[i - 1].evaluate(q)?.0);
        }
        Ok(self.disks[i].point(&self.charts[i].psi_inverse(&g.eval(&w))?))
    }

    /// Sampled `d_{C¹}(g_i, 𝒫_{X_{i−1}(p),1})` in section coordinates over the image of a
    /// slightly enlarged `U`, with difference Jacobians of step `h`.
    pub fn distance(&self, i: usize, samples: usize) -> Result<LiftDistance, PerturbError> {
        let u = &self.bundle.u;
        let grid = Ball::new(u.center.clone(), 1.1 * u.radius).samples(samples);
        let h = 1e-3 * u.radius * spectral_norm(&self.charts[i - 1].linear().matrix);
        let src = &self.disks[i - 1];
        let dst = &self.disks[i];
        let rows: Vec<(f64, f64)> = grid
            .par_iter()
            .map(|xi| -> Result<(f64, f64), PerturbError> {
                let a = src.coords(&self.section_point(i - 1, xi)?);
                let g = |a: &Vector| self.eval(i, &src.point(a)).map(|q| dst.coords(&q));
                let f = |a: &Vector| self.unperturbed[i - 1].lifted(a).map_err(PerturbError::from);
                let c0 = (g(&a)? - f(&a)?).norm();
                let k = a.len();
                let mut diff = Matrix::zeros(k, k);
                for j in 0..k {
                    let mut plus = a.clone();
                    let mut minus = a.clone();
                    plus[j] += h;
                    minus[j] -= h;
                    let col = (g(&plus)? - f(&plus)? - g(&minus)? + f(&minus)?) / (plus[j] - minus[j]);
                    diff.set_column(j, &col);
                }
                Ok((c0, spectral_norm(&diff)))
            })
            .collect::<Result<_, _>>()?;
        let c0 = rows.iter().map(|r| r.0).fold(0.0, f64::max);
        let c1 = c0 + rows.iter().map(|r| r.1).fold(0.0, f64::max);
        Ok(LiftDistance { step: i, c0, c1, samples: rows.len() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use geometry_flow::DomainChart;

    #[test]
    fn identity_bundle_has_zero_distance() {
        let x = VectorField::new("shear", DomainChart::boxed(vec![-50.0, -1e4], vec![50.0, 1e4], 1.0).unwrap(), |p| {
            Vector::from_column_slice(&[1.0, p[1]])
        });
        let orbit = BaseOrbit::new(&x, &Vector::zeros(2), 2, MapOptions::default()).unwrap();
        let bundle = PerturbationBundle::identity(&orbit, Ball::centered(1, 0.01)).unwrap();
        assert!(bundle.is_identity());
        let check = bundle.check(&orbit, 9).unwrap();
        assert!(check.passed && check.c1_distances.iter().all(|d| *d < 1e-6), "{check:?}");
    }
}
