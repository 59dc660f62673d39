use std::f64::consts::PI;

/// Closed forms `f = (1 − 2s)⁻²`, `g = (1 − 4s²)⁻²` on the arc `|s − 1/2| < 1/4` of `ℝ/ℤ`,
/// continued over the complementary arc by first-order Taylor pieces at both seams that are
/// cosine-blended into the constant `floor` within `width` (in units of the arc length).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeamProfile {
    pub width: f64,
    pub floor: f64,
}

struct Jet {
    value: f64,
    slope: f64,
}

fn f_jet(s: f64) -> Jet {
    let u = 1.0 - 2.0 * s;
    Jet { value: 1.0 / (u * u), slope: 4.0 / (u * u * u) }
}

fn g_jet(s: f64) -> Jet {
    let u = 1.0 - 4.0 * s * s;
    Jet { value: 1.0 / (u * u), slope: 16.0 * s / (u * u * u) }
}

fn reduce(s: f64) -> f64 {
    s - s.floor()
}

fn inner(s: f64) -> bool {
    (s - 0.5).abs() < 0.25
}

impl SeamProfile {
    pub fn example() -> Self {
        Self { width: 0.1, floor: 1.0 }
    }

    pub fn describe(&self) -> String {
        format!(
            "c + (A − c)φ(σ) + (B − c)φ(1 − σ) with σ = 2((s − 3/4) mod 1), A and B the first-order Taylor \
             pieces at s = 3/4 and s = 1/4, φ(σ) = cos²(πσ/(2w)) for σ < w, c = {}, w = {} (C¹ at both seams)",
            self.floor, self.width
        )
    }

    fn blend_weight(&self, sigma: f64) -> (f64, f64) {
        if sigma >= self.width {
            return (0.0, 0.0);
        }
        let u = PI * sigma / (2.0 * self.width);
        (u.cos().powi(2), -(PI / (2.0 * self.width)) * (2.0 * u).sin())
    }

    /// Value and `d/ds` of the continuation of `jet` at `s` on the outer arc.
    fn outer(&self, jet: fn(f64) -> Jet, s: f64) -> (f64, f64) {
        let sigma = 2.0 * reduce(s - 0.75);
        let (j0, j1) = (jet(0.75), jet(0.25));
        let c = self.floor;
        let a = j0.value + 0.5 * j0.slope * sigma;
        let b = j1.value - 0.5 * j1.slope * (1.0 - sigma);
        let (wa, dwa) = self.blend_weight(sigma);
        let (wb, dwb) = self.blend_weight(1.0 - sigma);
        let value = c + (a - c) * wa + (b - c) * wb;
        let dsigma = 0.5 * j0.slope * wa + (a - c) * dwa + 0.5 * j1.slope * wb - (b - c) * dwb;
        (value, 2.0 * dsigma)
    }

    pub fn f(&self, s: f64) -> f64 {
        let s = reduce(s);
        if inner(s) {
            f_jet(s).value
        } else {
            self.outer(f_jet, s).0
        }
    }

    pub fn g(&self, s: f64) -> f64 {
        let s = reduce(s);
        if inner(s) {
            g_jet(s).value
        } else {
            self.outer(g_jet, s).0
        }
    }

    /// `1/g` and its derivative; vanishes to second order at `s = 1/2`.
    pub fn inv_g(&self, s: f64) -> (f64, f64) {
        let s = reduce(s);
        if inner(s) {
            let u = 1.0 - 4.0 * s * s;
            (u * u, -16.0 * s * u)
        } else {
            let (g, dg) = self.outer(g_jet, s);
            (1.0 / g, -dg / (g * g))
        }
    }

    /// `f/g` and its derivative; equals `(1 + 2s)²` on the inner arc.
    pub fn ratio(&self, s: f64) -> (f64, f64) {
        let s = reduce(s);
        if inner(s) {
            let u = 1.0 + 2.0 * s;
            (u * u, 4.0 * u)
        } else {
            let (f, df) = self.outer(f_jet, s);
            let (g, dg) = self.outer(g_jet, s);
            (f / g, (df * g - f * dg) / (g * g))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_on_the_inner_arc() {
        let p = SeamProfile::example();
        assert!((p.f(0.499) - 250000.0).abs() < 1e-4);
        assert!((p.ratio(0.3).0 - 2.56).abs() < 1e-12);
        assert!((p.f(0.3) / p.g(0.3) - 2.56).abs() < 1e-12);
    }

    #[test]
    fn continuation_is_c1_and_positive() {
        let p = SeamProfile::example();
        let h = 1e-9;
        for seam in [0.25, 0.75] {
            for (name, fun) in
                [("inv_g", SeamProfile::inv_g as fn(&SeamProfile, f64) -> (f64, f64)), ("ratio", SeamProfile::ratio)]
            {
                let (l, dl) = fun(&p, seam - h);
                let (r, dr) = fun(&p, seam + h);
                assert!((l - r).abs() < 1e-5, "{name} value jump at {seam}");
                assert!((dl - dr).abs() < 1e-4, "{name} slope jump at {seam}: {dl} vs {dr}");
            }
        }
        for k in 0..1000 {
            let s = k as f64 / 1000.0;
            if (s - 0.5).abs() > 1e-9 {
                assert!(p.f(s) > 0.0 && p.g(s) > 0.0, "s = {s}");
            }
            let (r, dr) = p.ratio(s);
            let fd = (p.ratio(s + 1e-8).0 - p.ratio(s - 1e-8).0) / 2e-8;
            assert!(r > 0.0 && (dr - fd).abs() < 1e-4 * (1.0 + dr.abs()), "s = {s}");
        }
    }
}
