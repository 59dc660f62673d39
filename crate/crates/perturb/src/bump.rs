use std::sync::LazyLock;

use geometry_flow::{Matrix, Vector};
use serde::Serialize;

/// Quintic smoothstep `6x⁵ − 15x⁴ + 10x³`.
const STEP: [f64; 6] = [0.0, 0.0, 0.0, 10.0, -15.0, 6.0];

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

fn antiderivative(a: &[f64]) -> Vec<f64> {
    std::iter::once(0.0).chain(a.iter().enumerate().map(|(i, x)| x / (i + 1) as f64)).collect()
}

/// `C¹` profile `χ: ℝ → [0, 1]`, `0` below `low`, `1` above `high`, quintic smoothstep in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BumpProfile {
    pub low: f64,
    pub high: f64,
}

impl Default for BumpProfile {
    fn default() -> Self {
        Self { low: 0.1, high: 0.9 }
    }
}

impl BumpProfile {
    fn local(&self, t: f64) -> Option<f64> {
        if t <= self.low || t >= self.high {
            None
        } else {
            Some((t - self.low) / (self.high - self.low))
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.local(t) {
            Some(x) => horner(&STEP, x),
            None if t <= self.low => 0.0,
            None => 1.0,
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self.local(t) {
            Some(x) => 30.0 * x * x * (x - 1.0) * (x - 1.0) / (self.high - self.low),
            None => 0.0,
        }
    }

    /// `max(sup χ, sup |χ'|)`.
    pub fn c1_norm(&self) -> f64 {
        (1.875 / (self.high - self.low)).max(1.0)
    }
}

/// Radial map about `center`: scales by `λ` on the ball of radius `plateau`,
/// is the identity outside `support`, and has radial profile
/// `ρ(r) = r − (1 − λ)∫₀ʳ κ` with `∫₀^support κ = 0`.
///
/// On the transition `κ` drops from `1` to `−depth` over the first fifth, stays there,
/// and returns to `0` over the last fifth, so `sup |κ| = max(1, depth)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialBump {
    pub center: Vec<f64>,
    pub plateau: f64,
    pub support: f64,
    pub lambda: f64,
    depth: f64,
    kappa_sup: f64,
    kernel_sup: f64,
}

/// Width of each ramp of `κ`, as a fraction of the transition.
const RAMP: f64 = 0.2;

static STEP_INT: LazyLock<Vec<f64>> = LazyLock::new(|| antiderivative(&STEP));

fn ramp(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        horner(&STEP, x)
    }
}

/// `∫₀ˣ ramp`.
fn ramp_int(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        x - 0.5
    } else {
        horner(&STEP_INT, x)
    }
}

impl RadialBump {
    pub fn new(center: Vec<f64>, plateau: f64, support: f64, lambda: f64) -> Option<Self> {
        if !(plateau > 0.0 && support > plateau && lambda > 0.0 && lambda.is_finite()) {
            return None;
        }
        let depth = (plateau / (support - plateau) + RAMP / 2.0) / (1.0 - RAMP);
        let mut b = Self { center, plateau, support, lambda, depth, kappa_sup: depth.max(1.0), kernel_sup: plateau };
        let mut kk = plateau;
        for i in 0..=4000 {
            let r = plateau + (support - plateau) * i as f64 / 4000.0;
            kk = kk.max(b.kernel(r));
        }
        b.kernel_sup = kk;
        Some(b)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn kappa(&self, r: f64) -> f64 {
        if r <= self.plateau {
            return 1.0;
        }
        if r >= self.support {
            return 0.0;
        }
        let u = (r - self.plateau) / (self.support - self.plateau);
        1.0 - (1.0 + self.depth) * ramp(u / RAMP) + self.depth * ramp((u - 1.0 + RAMP) / RAMP)
    }

    /// `∫₀ʳ κ`.
    fn kernel(&self, r: f64) -> f64 {
        if r <= self.plateau {
            return r;
        }
        if r >= self.support {
            return 0.0;
        }
        let u = (r - self.plateau) / (self.support - self.plateau);
        let g = u - RAMP * ((1.0 + self.depth) * ramp_int(u / RAMP) - self.depth * ramp_int((u - 1.0 + RAMP) / RAMP));
        self.plateau + (self.support - self.plateau) * g
    }

    fn radial(&self, r: f64) -> (f64, f64) {
        let s = 1.0 - self.lambda;
        (r - s * self.kernel(r), 1.0 - s * self.kappa(r))
    }

    pub fn eval(&self, w: &Vector) -> Vector {
        let c = Vector::from_column_slice(&self.center);
        let d = w - &c;
        let r = d.norm();
        if r >= self.support {
            return w.clone();
        }
        if r == 0.0 {
            return w.clone();
        }
        let (rho, _) = self.radial(r);
        c + d * (rho / r)
    }

    pub fn jacobian(&self, w: &Vector) -> Matrix {
        let k = w.len();
        let c = Vector::from_column_slice(&self.center);
        let d = w - &c;
        let r = d.norm();
        if r >= self.support {
            return Matrix::identity(k, k);
        }
        if r == 0.0 {
            return Matrix::identity(k, k) * self.lambda;
        }
        let (rho, drho) = self.radial(r);
        let e = d / r;
        Matrix::identity(k, k) * (rho / r) + &e * e.transpose() * (drho - rho / r)
    }

    /// `|log det Dm|` on the plateau.
    pub fn plateau_gain(&self) -> f64 {
        -(self.dim() as f64) * self.lambda.ln()
    }

    /// Bound on `sup |m − id|`.
    pub fn c0_bound(&self) -> f64 {
        (1.0 - self.lambda).abs() * self.kernel_sup
    }

    /// Bound on `sup ‖Dm − I‖`.
    pub fn c1_bound(&self) -> f64 {
        (1.0 - self.lambda).abs() * self.kappa_sup.max(1.0)
    }

    /// `(sup ∫κ, sup |κ|)` for the shape, independent of `λ`.
    pub fn shape_constants(&self) -> (f64, f64) {
        (self.kernel_sup, self.kappa_sup)
    }

    pub fn contains_support(&self, w: &Vector) -> bool {
        (w - Vector::from_column_slice(&self.center)).norm() < self.support
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_endpoints_and_slope() {
        let chi = BumpProfile::default();
        assert_eq!(chi.value(0.05), 0.0);
        assert_eq!(chi.value(0.95), 1.0);
        assert!((chi.value(0.5) - 0.5).abs() < 1e-15);
        assert!((chi.derivative(0.5) - chi.c1_norm()).abs() < 1e-12);
        let h = 1e-6;
        for t in [0.2, 0.37, 0.8] {
            let fd = (chi.value(t + h) - chi.value(t - h)) / (2.0 * h);
            assert!((fd - chi.derivative(t)).abs() < 1e-8);
        }
    }

    #[test]
    fn radial_bump_is_identity_outside_support_and_scales_plateau() {
        let b = RadialBump::new(vec![0.1, -0.2], 0.1, 0.5, 0.8).unwrap();
        let far = Vector::from_vec(vec![0.7, 0.0]);
        assert_eq!(b.eval(&far), far);
        let near = Vector::from_vec(vec![0.15, -0.2]);
        let img = b.eval(&near);
        assert!((img - Vector::from_vec(vec![0.14, -0.2])).norm() < 1e-15);
        assert!((b.jacobian(&near).determinant() - 0.64).abs() < 1e-14);
        assert!(b.kernel(0.5 - 1e-12).abs() < 1e-10);
    }

    #[test]
    fn radial_bump_jacobian_matches_differences() {
        let b = RadialBump::new(vec![0.0, 0.0], 0.1, 0.4, 0.7).unwrap();
        let h = 1e-7;
        for w in [[0.2, 0.05], [0.05, 0.3], [-0.25, -0.2]] {
            let w = Vector::from_column_slice(&w);
            let j = b.jacobian(&w);
            for i in 0..2 {
                let mut a = w.clone();
                let mut c = w.clone();
                a[i] += h;
                c[i] -= h;
                let col = (b.eval(&a) - b.eval(&c)) / (2.0 * h);
                assert!((col - j.column(i)).norm() < 1e-6);
            }
            assert!((j - Matrix::identity(2, 2)).norm() <= b.c1_bound() * 2f64.sqrt() + 1e-12);
        }
    }
}
