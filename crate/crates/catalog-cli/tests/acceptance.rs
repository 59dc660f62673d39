use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use catalog_cli::catalog::{catalog_get, CatalogEntry, GOLDEN};
use catalog_cli::verify::COMMUTE_TIMES;
use centralizer::{
    birkhoff_deviation, collinearity_defect, commutation_residual, gradient_decay_probe, invariance_residual,
    recover_f, separating_probe, PairSampler,
};
use geometry_flow::{flow, Matrix, Vector};
use perturb::{
    cocycle_perturbation, distort_pair, lift_perturbation, realize, verify_cocycle, Ball, BumpProfile, Certified,
    CocycleOptions, DistortSpec, PerturbationBundle, PipelineOptions, RealizeOptions, TubeRegion,
};
use poincare::{
    boundedness_certificate, calibrate, hitting_time_bounds_check, linear_poincare, linearizing_coordinates,
    CertificateOptions, MapOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome, Option<u64>);

const TOL: f64 = 1e-10;

fn v(x: &[f64]) -> Vector {
    Vector::from_column_slice(x)
}

fn entry(name: &str) -> Result<CatalogEntry, String> {
    catalog_get(name).map_err(|e| e.to_string())
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn shear_certificate(n_max: usize) -> Result<Certified, String> {
    let e = entry("shear_strip")?;
    let t_grid: Vec<f64> = (-4..=4).filter(|&k| k != 0).map(|k| k as f64 / 4.0).collect();
    let cert =
        boundedness_certificate(&e.x, &e.certify_samples, &t_grid, CertificateOptions::default()).map_err(err)?;
    let cal = calibrate(&e.x, cert.c, &e.certify_samples, n_max, 8, 1e-11).map_err(err)?;
    Ok(Certified { c: cert.c, alpha: cal.alpha, beta: cal.beta })
}

fn commutation() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut names = Vec::new();
    for name in ["annulus_unit_speed", "rigid_rotation", "torus_linear", "t3_collinear_not_qt"] {
        let e = entry(name)?;
        if !e.tags.commuting {
            continue;
        }
        let grid = if e.x.dim() == 2 { e.domain().sample_grid(10) } else { e.grid.clone() };
        let grid: Vec<Vector> = grid.into_iter().filter(|p| e.domain().contains(p)).collect();
        let rep = commutation_residual(&e.x, e.companion().map_err(err)?, &grid, &COMMUTE_TIMES, 1e-6, "10x10");
        ok &= rep.verdict && rep.failures.is_empty();
        worst = worst.max(rep.max_bracket).max(rep.max_flow);
        names.push(format!("{name} ({} points)", rep.points));
    }
    Ok((ok && worst <= 1e-6, format!("max residual {worst:.3e} over {}", names.join(", "))))
}

fn recovery() -> Outcome {
    let e = entry("annulus_unit_speed")?;
    let y = e.companion().map_err(err)?;
    let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
    let (mut gap, mut drift) = (0.0f64, 0.0f64);
    for k in 0..20 {
        let r = 1.05 + 0.9 * k as f64 / 19.0;
        let a = 2.0 * PI * k as f64 / 20.0 + 0.1;
        let p = v(&[r * a.cos(), r * a.sin()]);
        gap = gap.max((recover_f(&e.x, y, &p).map_err(err)? - r).abs());
        let f = |q: &Vector| recover_f(&e.x, y, q).unwrap_or(f64::NAN);
        drift = drift.max(invariance_residual(&f, &e.x, &p, &times, TOL).map_err(err)?);
    }
    Ok((gap <= 1e-8 && drift <= 1e-6, format!("max |f − r| = {gap:.3e}, invariance over t ∈ [0, 10] {drift:.3e}")))
}

fn lpf() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for name in ["rigid_rotation", "shear_strip", "t3_collinear_not_qt"] {
        let e = entry(name)?;
        for _ in 0..20 {
            let p = loop {
                let pick = e.grid[rng.random_range(0..e.grid.len())].clone();
                if e.domain().contains(&pick) {
                    break pick;
                }
            };
            let (s, t) = (rng.random_range(0.1..1.5), rng.random_range(0.1..1.5));
            let whole = linear_poincare(&e.x, &p, s + t, TOL).map_err(err)?.logabsdet;
            let first = linear_poincare(&e.x, &p, s, TOL).map_err(err)?.logabsdet;
            let mid = flow(&e.x, &p, s, TOL).map_err(err)?;
            let second = linear_poincare(&e.x, &mid, t, TOL).map_err(err)?.logabsdet;
            worst = worst.max((whole - first - second).abs());
        }
    }
    let mut volume: f64 = 0.0;
    for name in ["rigid_rotation", "torus_linear"] {
        let e = entry(name)?;
        for p in e.grid.iter().step_by(5) {
            for t in [0.5, 1.0, 3.0] {
                volume = volume.max(linear_poincare(&e.x, p, t, TOL).map_err(err)?.logabsdet.abs());
            }
        }
    }
    Ok((
        worst <= 1e-6 && volume <= 1e-8,
        format!("composition gap {worst:.3e} over 60 triples, |logdet| {volume:.3e} on rotation and torus"),
    ))
}

fn hitting_band() -> Outcome {
    let e = entry("shear_strip")?;
    let c = shear_certificate(5)?;
    let p = v(&[0.0, 0.05]);
    let (mut total, mut inside) = (0, 0);
    for n in 1..=5 {
        let rep = hitting_time_bounds_check(&e.x, &p, n, 40, c.alpha, c.beta, c.c, 1e-11).map_err(err)?;
        total += rep.rows.len();
        inside += rep.rows.len() - rep.violations;
    }
    Ok((
        total == 200 && inside == total,
        format!("{inside}/{total} hitting times in [n − α, n + α], α = {}, β = {:.4e}", c.alpha, c.beta),
    ))
}

fn psi_bounds() -> Outcome {
    let e = entry("shear_strip")?;
    let c = shear_certificate(3)?;
    let p = v(&[0.0, 0.3]);
    let rho = c.rho(3);
    let mut sweep = Vec::new();
    let mut below_two = true;
    for r in [rho, rho / 2.0, rho / 4.0] {
        let charts = linearizing_coordinates(&e.x, &p, 3, r, 50, MapOptions::default()).map_err(err)?;
        below_two &=
            charts.iter().all(|(_, b)| b.norm < 2.0 && b.inverse_norm < 2.0 && b.det < 2.0 && b.inverse_det < 2.0);
        sweep.push(charts.iter().map(|(_, b)| b.max()).fold(0.0, f64::max) - 1.0);
    }
    let decreasing = sweep.windows(2).all(|w| w[1] < w[0]);
    let sweep: Vec<String> = sweep.iter().map(|s| format!("{s:.3e}")).collect();
    Ok((below_two && decreasing, format!("ρ = {rho:.4e}, max Ψ − 1 over ρ, ρ/2, ρ/4: {}", sweep.join(", "))))
}

fn realization() -> Outcome {
    let e = entry("shear_strip")?;
    let p = v(&[0.0, 0.0]);
    let opts = MapOptions::default();
    let r = 1e-3;
    let u = Ball::centered(1, r);
    let tube = TubeRegion::new(&e.x, &p, u.clone(), 2, opts).map_err(err)?;
    let identity = PerturbationBundle::identity(tube.orbit(), u.clone()).map_err(err)?;
    let lifted = lift_perturbation(&e.x, &identity, opts).map_err(err)?;
    let same = realize(&lifted, &tube, BumpProfile::default(), 0.1, RealizeOptions::new(0.25, 2.0 * r)).map_err(err)?;
    let gap = tube
        .sample_points(9, 16)
        .map_err(err)?
        .iter()
        .map(|(_, _, q)| (same.field.eval(q) - e.x.eval(q)).norm())
        .fold(0.0, f64::max);

    let a = tube.orbit().cocycle().map_err(err)?;
    let pert = cocycle_perturbation(&a, &u, &Ball::centered(1, r / 4.0), 0.01, 0.5, None, CocycleOptions::default())
        .map_err(err)?;
    let bundle = PerturbationBundle::from_cocycle(tube.orbit(), &pert, 0.5).map_err(err)?;
    let lifted = lift_perturbation(&e.x, &bundle, opts).map_err(err)?;
    let real = realize(&lifted, &tube, BumpProfile::default(), 1.0, RealizeOptions::new(0.25, 2.0 * r)).map_err(err)?;
    let rep = &real.report;
    let fidelity = rep.fidelity.iter().all(|f| f.samples == 50 && f.max_error <= 1e-6);
    let band = rep.hitting_times.0 >= 2.0 - 0.25 && rep.hitting_times.1 <= 2.0 + 0.25;
    Ok((
        gap <= 1e-9 && fidelity && rep.support_exact && band && rep.passed(),
        format!(
            "identity |X − Y| = {gap:.2e}; det-bump fidelity {:.2e}, support exact {}, τ ∈ [{:.5}, {:.5}], d_C1 {:.3e}",
            rep.fidelity_max, rep.support_exact, rep.hitting_times.0, rep.hitting_times.1, rep.c1_distance
        ),
    ))
}

fn cocycle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut notes = Vec::new();
    let mut ok = true;
    for k in [1usize, 2] {
        let matrices: Vec<Matrix> = (0..120)
            .map(|_| Matrix::identity(k, k) + Matrix::from_fn(k, k, |_, _| rng.random_range(-0.05..0.05)))
            .collect();
        let delta = Ball::centered(k, 0.5);
        let pert =
            cocycle_perturbation(&matrices, &Ball::centered(k, 1.0), &delta, 1.0, 0.2, None, CocycleOptions::default())
                .map_err(err)?;
        let check = verify_cocycle(&matrices, &pert, 40);
        ok &= check.passed() && check.reached.iter().all(|r| r.is_some());
        notes.push(format!(
            "k={k}: n1 = {}, d_C1 = {:.3}, min distortion {:.3}, bullets {:?}",
            pert.n1, check.c1_distance, check.min_distortion, check.bullets
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn pipeline() -> Outcome {
    let e = entry("shear_strip")?;
    let r = 5e-5;
    let spec = DistortSpec {
        p: v(&[0.0, 0.0]),
        u: Ball::centered(1, r),
        delta: Ball::centered(1, r / 4.0),
        x: v(&[0.0, -1.5e-4]),
        threshold: 0.5,
        epsilon: 2.0,
        eta: 0.1,
        horizon: 20.0,
        certified: shear_certificate(3)?,
    };
    let (_, rep) = distort_pair(&e.x, &spec, PipelineOptions::default()).map_err(err)?;
    let above = rep.pairs.iter().filter(|p| p.first_above.is_some()).count();
    Ok((
        rep.passed() && rep.pairs.len() == 25 && above == 25,
        format!(
            "ε = 2: branch {}, n0 = {}, conclusions {:?}, {above}/{} sampled y above K",
            rep.branch,
            rep.n0,
            rep.conclusions,
            rep.pairs.len()
        ),
    ))
}

fn expansivity() -> Outcome {
    let morse = entry("morse_gradient_torus")?;
    let pairs = PairSampler::new(morse.region.clone(), 7, 0.025, 0.05).pairs(&morse.x, 100);
    let m = separating_probe(&morse.x, 0.1, 50.0, &pairs, Some(7), TOL);
    let ann = entry("annulus_unit_speed")?;
    let pairs = PairSampler::new(ann.region.clone(), 7, 0.0125, 0.025).pairs(&ann.x, 100);
    let a = separating_probe(&ann.x, 0.05, 200.0, &pairs, Some(7), TOL);
    let errors = a.records.iter().filter(|r| r.error.is_some()).count();
    Ok((
        m.witnesses >= 1 && a.witnesses == 0 && errors == 0,
        format!("morse {} witnesses / 100, annulus {} witnesses / 100", m.witnesses, a.witnesses),
    ))
}

fn saddle_decay() -> Outcome {
    let e = entry("linear_saddle")?;
    let f = e.invariant.clone().ok_or("saddle has no first integral")?;
    let radii = [0.1, 0.01, 0.001];
    let rep = gradient_decay_probe(&|q| f(q), None, &e.x, &Vector::zeros(2), &radii, 32, TOL).map_err(err)?;
    let worst = rep.series.iter().zip(radii).map(|(s, r)| (s - r).abs()).fold(0.0, f64::max);
    Ok((worst <= 1e-9, format!("series {:?}, max |s_k − r_k| = {worst:.2e}", rep.series)))
}

fn denjoy_koksma() -> Outcome {
    let oracle = [
        0.10000000000000009,
        0.07247497760292632,
        0.04747377453309909,
        0.029988627936898382,
        0.018688395089341725,
        0.011586632930852048,
    ];
    let rep = birkhoff_deviation(&|x| 1.0 + 0.1 * (2.0 * PI * x).cos(), GOLDEN, 6, 1000).map_err(err)?;
    let gap = rep.deviations.iter().zip(oracle).map(|(d, o)| (d - o).abs()).fold(0.0, f64::max);
    let ok = rep.denominators == [1, 2, 3, 5, 8, 13] && rep.deviations[5] < rep.deviations[0] && gap <= 1e-10;
    Ok((ok, format!("D(13) = {:.6e} < D(1) = {:.6e}, oracle gap {gap:.1e}", rep.deviations[5], rep.deviations[0])))
}

fn t3() -> Outcome {
    let e = entry("t3_collinear_not_qt")?;
    let y = e.companion().map_err(err)?;
    let rep = commutation_residual(&e.x, y, &e.grid, &COMMUTE_TIMES, 1e-6, "off the singular fiber");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut defect: f64 = 0.0;
    for _ in 0..50 {
        let p = v(&[rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]);
        defect = defect.max(collinearity_defect(&e.x, y, &p));
    }
    let base = e.base.as_ref().ok_or("no base field")?;
    let f = recover_f(base, y, &v(&[0.25, 0.2, 0.3])).map_err(err)?;
    Ok((
        rep.verdict && rep.max_bracket.max(rep.max_flow) <= 1e-6 && defect <= 1e-9 && (f - 2.25).abs() <= 1e-6,
        format!(
            "commutation {:.3e}, collinearity defect {defect:.3e} at 50 points, recovered f(0.25) = {f:.9}",
            rep.max_bracket.max(rep.max_flow)
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("commutation of catalog pairs", commutation, Some(30)),
        ("collinearity function recovery", recovery, None),
        ("linear Poincaré flow composition", lpf, None),
        ("hitting-time band on the shear", hitting_band, Some(60)),
        ("linearizing chart bounds", psi_bounds, None),
        ("realization of perturbation bundles", realization, Some(300)),
        ("cocycle perturbation bullets", cocycle, Some(60)),
        ("distort_pair pipeline", pipeline, Some(600)),
        ("separation witnesses", expansivity, None),
        ("saddle gradient decay", saddle_decay, None),
        ("Birkhoff deviation at convergents", denjoy_koksma, None),
        ("T3 collinear example", t3, None),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let took = start.elapsed();
        let in_time = budget.is_none_or(|s| took <= Duration::from_secs(s));
        let (ok, detail) = match result {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = budget.map(|s| format!(" of {s} s")).unwrap_or_default();
        println!(
            "criterion {} {name}: {} ({detail}; {:.2} s{budget})",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
        failed += usize::from(!ok);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
