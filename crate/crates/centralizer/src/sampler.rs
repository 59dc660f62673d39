use geometry_flow::{ChartKind, Vector, VectorField};
use poincare::NormalFrame;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// User-declared sampling region in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// The whole chart (fundamental domain on tori).
    Domain,
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Annulus {
        inner: f64,
        outer: f64,
    },
}

impl Region {
    fn sample(&self, field: &VectorField, rng: &mut ChaCha8Rng) -> Vector {
        let region = match self {
            Region::Domain => match field.domain().kind() {
                ChartKind::Torus { periods } => Region::Box { lower: vec![0.0; periods.len()], upper: periods.clone() },
                ChartKind::Box { lower, upper } => Region::Box { lower: lower.clone(), upper: upper.clone() },
                ChartKind::Annulus { inner, outer } => Region::Annulus { inner: *inner, outer: *outer },
            },
            r => r.clone(),
        };
        match region {
            Region::Box { lower, upper } => {
                Vector::from_iterator(lower.len(), lower.iter().zip(&upper).map(|(a, b)| rng.random_range(*a..*b)))
            }
            Region::Annulus { inner, outer } => {
                let r = (rng.random_range(inner * inner..outer * outer)).sqrt();
                let th = rng.random_range(0.0..std::f64::consts::TAU);
                Vector::from_vec(vec![r * th.cos(), r * th.sin()])
            }
            Region::Domain => unreachable!(),
        }
    }
}

/// Seeded pairs `(x, y)`: `x` uniform in the region, `y` displaced from `x` normally to `X(x)`
/// by a length uniform in `[min_offset, max_offset]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSampler {
    pub region: Region,
    pub seed: u64,
    pub min_offset: f64,
    pub max_offset: f64,
}

impl PairSampler {
    pub fn new(region: Region, seed: u64, min_offset: f64, max_offset: f64) -> Self {
        Self { region, seed, min_offset, max_offset }
    }

    pub fn pairs(&self, field: &VectorField, count: usize) -> Vec<(Vector, Vector)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let dom = field.domain();
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0usize;
        while out.len() < count && attempts < 1000 * count.max(1) {
            attempts += 1;
            let x = self.region.sample(field, &mut rng);
            let Ok(frame) = NormalFrame::new(field, &x) else { continue };
            let k = frame.dim();
            let raw = Vector::from_iterator(k, (0..k).map(|_| rng.random_range(-1.0..1.0)));
            let len = rng.random_range(self.min_offset..=self.max_offset);
            if raw.norm() < 1e-3 {
                continue;
            }
            let dir = frame.embed(&(raw.normalize()));
            let y = dom.exp(&x, &(dir * len));
            if !dom.contains(&y) || field.is_singular_at(&y) {
                continue;
            }
            out.push((dom.reduce(&x), y));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use geometry_flow::DomainChart;

    #[test]
    fn pairs_are_reproducible_and_offset_normally() {
        let f = VectorField::new("rot", DomainChart::annulus(1.0, 2.0, 0.5).unwrap(), |p| {
            Vector::from_vec(vec![-p[1], p[0]])
        });
        let s = PairSampler::new(Region::Annulus { inner: 1.1, outer: 1.9 }, 3, 0.01, 0.02);
        let a = s.pairs(&f, 10);
        assert_eq!(a, s.pairs(&f, 10));
        for (x, y) in &a {
            let d = y - x;
            assert!(d.norm() >= 0.01 - 1e-12 && d.norm() <= 0.02 + 1e-12);
            assert!(d.dot(&f.eval(x)).abs() < 1e-12);
        }
    }
}
