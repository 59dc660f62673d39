use std::f64::consts::TAU;
use std::time::Instant;

use centralizer::{
    birkhoff_deviation, collinearity_defect, commutation_residual, gradient_decay_probe, invariance_residual,
    recover_f, separating_probe, PairSampler,
};
use geometry_flow::{classify, flow, flow_unwrapped, SingularityKind, Vector};
use poincare::linear_poincare;
use serde::Serialize;

use crate::catalog::{roof, CatalogEntry};
use crate::profile::SeamProfile;
use crate::CliError;

pub const COMMUTE_TIMES: [f64; 6] = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
const TOL: f64 = 1e-11;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub entry: String,
    pub check: String,
    pub passed: bool,
    pub detail: String,
    #[serde(skip)]
    pub seconds: f64,
}

type CheckFn<'a> = Box<dyn Fn() -> Result<(bool, String), CliError> + 'a>;

fn v(x: &[f64]) -> Vector {
    Vector::from_column_slice(x)
}

/// Runs every check backing the entry's tags and closed forms.
pub fn verify_entry(e: &CatalogEntry) -> Vec<Check> {
    let mut checks: Vec<(&str, CheckFn)> = vec![("lpf_composition", Box::new(|| lpf_composition(e)))];
    if e.tags.commuting {
        checks.push(("commuting", Box::new(|| commuting(e))));
    }
    if e.tags.collinear {
        checks.push(("collinear", Box::new(|| collinear(e))));
    }
    if e.invariant.is_some() {
        checks.push(("first_integral", Box::new(|| first_integral(e))));
    }
    if let Some(expected) = e.tags.separating {
        checks.push(("separating", Box::new(move || separating(e, expected))));
    }
    if !e.singular_set.is_empty() {
        checks.push(("singular_set", Box::new(|| singular_set(e))));
    }
    match e.name.as_str() {
        "rigid_rotation" | "torus_linear" => checks.push(("volume_preserving", Box::new(|| volume_preserving(e)))),
        "shear_strip" => checks.push(("logdet_closed_form", Box::new(|| shear_logdet(e)))),
        "linear_saddle" => checks.push(("gradient_decay", Box::new(|| saddle_decay(e)))),
        "t3_collinear_not_qt" => checks.push(("ratio_continuity", Box::new(t3_ratio))),
        "suspension_rotation" => {
            checks.push(("return_time", Box::new(|| return_time(e))));
            checks.push(("birkhoff_deviation", Box::new(|| deviation(e))));
        }
        _ => {}
    }
    checks
        .into_iter()
        .map(|(name, run)| {
            let start = Instant::now();
            let (passed, detail) = run().unwrap_or_else(|err| (false, format!("error: {err}")));
            Check {
                entry: e.name.clone(),
                check: name.to_string(),
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn lpf_composition(e: &CatalogEntry) -> Result<(bool, String), CliError> {
    let (s, t) = if e.name == "morse_gradient_torus" { (0.05, 0.07) } else { (0.5, 0.7) };
    let p = &e.base_point;
    let whole = linear_poincare(&e.x, p, s + t, TOL)?.logabsdet;
    let first = linear_poincare(&e.x, p, s, TOL)?.logabsdet;
    let xs = flow(&e.x, p, s, TOL)?;
    let second = linear_poincare(&e.x, &xs, t, TOL)?.logabsdet;
    let gap = (whole - first - second).abs();
    Ok((gap <= 1e-6, format!("|logdet P(s+t) − logdet P(t)∘P(s)| = {gap:.3e} at s = {s}, t = {t}")))
}

fn commuting(e: &CatalogEntry) -> Result<(bool, String), CliError> {
    let rep = commutation_residual(&e.x, e.companion()?, &e.grid, &COMMUTE_TIMES, 1e-6, "declared");
    Ok((rep.verdict, format!("bracket {:.3e}, flow {:.3e} over {} points", rep.max_bracket, rep.max_flow, rep.points)))
}

fn collinear(e: &CatalogEntry) -> Result<(bool, String), CliError> {
    let y = e.companion()?;
    let worst = e.grid.iter().map(|p| collinearity_defect(&e.x, y, p)).fold(0.0, f64::max);
    Ok((worst <= 1e-9, format!("max defect {worst:.3e}")))
}

fn first_integral(e: &CatalogEntry) -> Result<(bool, String), CliError> {
    let f = e.invariant.as_ref().expect("checked by caller");
    let drift = invariance_residual(&|q| f(q), &e.x, &e.base_point, &[0.5, 1.0, 2.0], TOL)?;
    let mut recovered = 0.0f64;
    if let Some(y) = &e.y {
        for p in &e.grid {
            recovered = recovered.max((recover_f(&e.x, y, p)? - f(p)).abs());
        }
    }
    Ok((drift <= 1e-6 && recovered <= 1e-8, format!("drift along the flow {drift:.3e}, max |Y/X − f| {recovered:.3e}")))
}

fn separating(e: &CatalogEntry, expected: bool) -> Result<(bool, String), CliError> {
    let (eps, horizon, pairs) = if e.tags.singular_fibers {
        let s = &e.singular_set;
        (0.1, 20.0, vec![(s[0].clone(), s[0].clone() + v(&[0.0, 0.03, 0.0]))])
    } else if expected {
        (0.05, 100.0, PairSampler::new(e.region.clone(), 7, 0.0125, 0.025).pairs(&e.x, 8))
    } else {
        (0.1, 50.0, PairSampler::new(e.region.clone(), 7, 0.025, 0.05).pairs(&e.x, 12))
    };
    let rep = separating_probe(&e.x, eps, horizon, &pairs, Some(7), 1e-10);
    let errors = rep.records.iter().filter(|r| r.error.is_some()).count();
    let ok = errors == 0 && (rep.witnesses == 0) == expected;
    Ok((
        ok,
        format!(
            "{} witnesses among {} pairs (eps {eps}, T {horizon}), expected separating = {expected}",
            rep.witnesses,
            pairs.len()
        ),
    ))
}

fn singular_set(e: &CatalogEntry) -> Result<(bool, String), CliError> {
    let mut ok = true;
    let mut notes = Vec::new();
    for p in &e.singular_set {
        let speed = e.x.eval(p).norm();
        ok &= speed <= 1e-12;
        if e.x.dim() == 2 {
            let kind = classify(&e.x.jacobian(p)?);
            // X = ∇f with f = cos 2πx + cos 2πy: the Hessian is diagonal with entries −4π² cos 2πxᵢ
            let hessian_signs: Vec<f64> = p.iter().map(|c| -(TAU * c).cos()).collect();
            let expected = if e.name == "morse_gradient_torus" {
                match (hessian_signs[0] > 0.0, hessian_signs[1] > 0.0) {
                    (true, true) => SingularityKind::Source,
                    (false, false) => SingularityKind::Sink,
                    _ => SingularityKind::Saddle,
                }
            } else {
                SingularityKind::Saddle
            };
            let declared = e.x.singularities().iter().find(|s| (s.position() - p).norm() < 1e-12).map(|s| s.kind);
            ok &= kind == expected && declared == Some(expected);
            notes.push(format!("{:?}: {kind:?}", p.as_slice()));
        }
    }
    if let Some(y) = &e.y {
        let companion_speed = e.singular_set.iter().map(|p| y.eval(p).norm()).fold(f64::INFINITY, f64::min);
        ok &= companion_speed > 1e-3;
        notes.push(format!("companion speed on the zero set ≥ {companion_speed:.3e}"));
    }
    Ok((ok, format!("X vanishes at {} points; {}", e.singular_set.len(), notes.join(", "))))
}

fn volume_preserving(e: &CatalogEntry) -> Result<(bool, String), CliError> {
    let mut worst = 0.0f64;
    for p in e.grid.iter().step_by(9) {
        for t in [0.5, 1.0, 2.0] {
            worst = worst.max(linear_poincare(&e.x, p, t, TOL)?.logabsdet.abs());
        }
    }
    Ok((worst <= 1e-8, format!("max |logdet P| = {worst:.3e}")))
}

fn shear_logdet(e: &CatalogEntry) -> Result<(bool, String), CliError> {
    let x = v(&[0.0, 0.1]);
    let speed = |y: f64| (1.0 + y * y).sqrt();
    let mut worst = 0.0f64;
    for n in 1..=5 {
        let expected = n as f64 + (speed(0.1) / speed(0.1 * (n as f64).exp())).ln();
        worst = worst.max((linear_poincare(&e.x, &x, n as f64, TOL)?.logabsdet - expected).abs());
    }
    Ok((worst <= 1e-6, format!("max deviation from n + log(|X(x)|/|X(X_n x)|) = {worst:.3e}")))
}

fn saddle_decay(e: &CatalogEntry) -> Result<(bool, String), CliError> {
    let f = e.invariant.as_ref().expect("saddle has a first integral");
    let radii = [0.1, 0.01, 0.001];
    let rep = gradient_decay_probe(&|q| f(q), None, &e.x, &Vector::zeros(2), &radii, 32, TOL)?;
    let worst = rep.series.iter().zip(radii).map(|(s, r)| (s - r).abs()).fold(0.0, f64::max);
    Ok((worst <= 1e-9 && rep.monotone, format!("max |sup|∇f| − r| = {worst:.3e}")))
}

fn t3_ratio() -> Result<(bool, String), CliError> {
    let prof = SeamProfile::example();
    let h = 1e-3;
    let jump = (prof.ratio(0.5 + h).0 - prof.ratio(0.5 - h).0).abs();
    let lipschitz = 2.0 * h * (0..=20).map(|k| prof.ratio(0.5 - h + 0.1 * h * k as f64).1.abs()).fold(0.0, f64::max);
    let f_near = prof.f(0.5 - h);
    let ok = jump <= lipschitz * 1.01 && (f_near - 250000.0).abs() <= 1e-6 * 250000.0;
    Ok((ok, format!("f/g(1/2 ± 1e-3) differ by {jump:.4e} (slope bound {lipschitz:.4e}), f(0.499) = {f_near:.6}")))
}

fn return_time(e: &CatalogEntry) -> Result<(bool, String), CliError> {
    let (theta, amp) = (e.params[0], e.params[1]);
    let tau = roof(amp);
    let mut worst = 0.0f64;
    for k in 0..5 {
        let x0 = 0.13 + 0.19 * k as f64;
        let end = flow_unwrapped(&e.x, &v(&[x0, 0.0]), tau(x0), TOL)?;
        worst = worst.max((end[0] - x0 - theta).abs()).max((end[1] - 1.0).abs());
    }
    Ok((worst <= 1e-8, format!("max |X_τ(x)(x, 0) − (x + θ, 1)| = {worst:.3e}")))
}

fn deviation(e: &CatalogEntry) -> Result<(bool, String), CliError> {
    let tau = roof(e.params[1]);
    let rep = birkhoff_deviation(&tau, e.params[0], 6, 1000)?;
    let (first, last) = (rep.deviations[0], *rep.deviations.last().expect("six denominators"));
    Ok((
        last < first,
        format!("deviation {first:.4e} at q = {} and {last:.4e} at q = {}", rep.denominators[0], rep.denominators[5]),
    ))
}
