use serde::Serialize;

use crate::CentralizerError;

/// Grid size for the sampled supremum and the equidistributed mean.
pub const DEFAULT_GRID: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BirkhoffReport {
    pub theta: f64,
    pub mean: f64,
    pub denominators: Vec<u64>,
    pub deviations: Vec<f64>,
    pub decreasing: bool,
}

/// First `count` distinct continued-fraction denominators of `theta`.
pub fn convergent_denominators(theta: f64, count: usize) -> Result<Vec<u64>, CentralizerError> {
    if !theta.is_finite() {
        return Err(CentralizerError::InvalidInput(format!("rotation number {theta} is not finite")));
    }
    let mut x = theta - theta.floor();
    let (mut q_prev, mut q) = (0u64, 1u64);
    let mut out = vec![1u64];
    while out.len() < count {
        if x < 1e-12 {
            return Err(CentralizerError::RationalRotation { theta });
        }
        let inv = 1.0 / x;
        let a = inv.floor();
        x = inv - a;
        let next = (a as u64).checked_mul(q).and_then(|v| v.checked_add(q_prev));
        let Some(next) = next else {
            return Err(CentralizerError::InvalidInput("continued fraction overflow".into()));
        };
        q_prev = q;
        q = next;
        if out.last() != Some(&q) {
            out.push(q);
        }
    }
    Ok(out)
}

/// `sup_x |Σ_{l<q} τ(x + lθ) − T q|` over `x_j = j/M` for the first `count` denominators `q`.
pub fn birkhoff_deviation(
    tau: &(dyn Fn(f64) -> f64 + Sync),
    theta: f64,
    count: usize,
    grid: usize,
) -> Result<BirkhoffReport, CentralizerError> {
    if grid == 0 {
        return Err(CentralizerError::InvalidInput("grid must be positive".into()));
    }
    let denominators = convergent_denominators(theta, count)?;
    let m = grid as f64;
    let mean = (0..grid).map(|j| tau((j as f64 + 0.5) / m)).sum::<f64>() / m;
    let rot = theta - theta.floor();
    let deviations: Vec<f64> = denominators
        .iter()
        .map(|&q| {
            (0..grid)
                .map(|j| {
                    let x = j as f64 / m;
                    let s: f64 = (0..q).map(|l| tau((x + l as f64 * rot).fract())).sum();
                    (s - mean * q as f64).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let decreasing = deviations.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    Ok(BirkhoffReport { theta, mean, denominators, deviations, decreasing })
}
