use geometry_flow::{flow, DomainChart, Matrix, Vector, VectorField};
use perturb::*;
use poincare::{MapOptions, PoincareError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn v(x: &[f64]) -> Vector {
    Vector::from_column_slice(x)
}

fn shear() -> VectorField {
    VectorField::new("shear_strip", DomainChart::boxed(vec![-100.0, -1e6], vec![100.0, 1e6], 1.0).unwrap(), |p| {
        v(&[1.0, p[1]])
    })
    .with_jacobian(|_| Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]))
}

fn rotation() -> VectorField {
    VectorField::new("rigid_rotation", DomainChart::annulus(1.0, 2.0, 0.5).unwrap(), |p| v(&[-p[1], p[0]]))
        .with_jacobian(|_| Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]))
}

fn constant3() -> VectorField {
    VectorField::new("e1", DomainChart::boxed(vec![-5.0, -5.0, -5.0], vec![20.0, 5.0, 5.0], 1.0).unwrap(), |_| {
        v(&[1.0, 0.0, 0.0])
    })
    .with_jacobian(|_| Matrix::zeros(3, 3))
}

/// Direct chain-rule composition of the generated fiber maps.
fn composed_logdet(maps: &[FiberMap], y: &Vector, n: usize) -> f64 {
    let mut w = y.clone();
    let mut total = 0.0;
    for m in &maps[..n] {
        total += m.jacobian(&w).determinant().abs().ln();
        w = m.eval(&w);
    }
    total
}

#[test]
fn cocycle_instances_one_and_two_dimensional() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in [1usize, 2] {
        let matrices: Vec<Matrix> = (0..120)
            .map(|_| {
                let mut m = Matrix::identity(k, k);
                for i in 0..k {
                    for j in 0..k {
                        m[(i, j)] += rng.random_range(-0.05..0.05);
                    }
                }
                m
            })
            .collect();
        let u = Ball::centered(k, 1.0);
        let delta = Ball::centered(k, 0.5);
        let pert = cocycle_perturbation(&matrices, &u, &delta, 1.0, 0.2, None, CocycleOptions::default()).unwrap();
        let check = verify_cocycle(&matrices, &pert, 40);
        assert!(check.passed(), "k={k}: {check:?}");
        assert!(check.c1_distance < 0.2 && check.support_exact);
        for y in delta.samples(40) {
            let unperturbed: f64 = matrices[..pert.n1].iter().map(|m| m.determinant().abs().ln()).sum();
            assert!((composed_logdet(&pert.maps, &y, pert.n1) - unperturbed).abs() > 1.0, "k={k} y={y:?}");
        }
    }
}

#[test]
fn cocycle_zero_threshold_and_outside_points() {
    let a = vec![Matrix::from_element(1, 1, 2.0); 10];
    let pert = cocycle_perturbation(
        &a,
        &Ball::centered(1, 1.0),
        &Ball::centered(1, 0.5),
        0.0,
        0.2,
        None,
        CocycleOptions::default(),
    )
    .unwrap();
    assert_eq!(pert.n1, 0);
    assert!(pert.maps.iter().all(|m| m.bump.is_none() && m.matrix == a[0]));

    let id = vec![Matrix::identity(1, 1); 60];
    let pert = cocycle_perturbation(
        &id,
        &Ball::centered(1, 1.0),
        &Ball::centered(1, 0.5),
        1.0,
        0.2,
        None,
        CocycleOptions::default(),
    )
    .unwrap();
    let y = v(&[1.3]);
    for n in 1..=(2 * pert.n1).min(60) {
        assert_eq!(composed_logdet(&pert.maps, &y, n), 0.0);
    }
}

#[test]
fn eta_cap_spreads_the_distortion() {
    let id = vec![Matrix::identity(1, 1); 400];
    let (u, d) = (Ball::centered(1, 1.0), Ball::centered(1, 0.5));
    let free = cocycle_perturbation(&id, &u, &d, 1.0, 0.2, None, CocycleOptions::default()).unwrap();
    let capped = cocycle_perturbation(&id, &u, &d, 1.0, 0.2, Some(0.02), CocycleOptions::default()).unwrap();
    assert!(capped.n1 > free.n1);
    assert!(verify_cocycle(&id, &capped, 40).c0_distance <= 0.02);
}

#[test]
fn tube_membership_maps_back_to_the_flow() {
    let x = shear();
    let tube = TubeRegion::new(&x, &v(&[0.0, 0.0]), Ball::new(vec![0.0], 1e-3), 4, MapOptions::default()).unwrap();
    let mid = flow(&x, &v(&[0.0, 0.0]), 2.0, 1e-12).unwrap();
    let c = tube.chart(&mid, false).unwrap();
    assert!(c.xi.norm() < 1e-12 && (c.slice - 2.0).abs() < 1e-12);
    for (xi, t) in [(3e-4, 0.7), (-9e-4, 3.2), (5e-4, 4.0)] {
        let q = tube.orbit().forward(&v(&[xi]), t).unwrap();
        let c = tube.chart(&q, false).unwrap();
        let back = flow(&x, &c.source, c.flow_time, 1e-12).unwrap();
        assert!((back - &q).norm() <= 1e-8);
        assert!((c.xi[0] - xi).abs() < 1e-10, "{} vs {xi}", c.xi[0]);
    }
    let reach = tube.reach();
    assert!(!tube.contains(&v(&[2.0, 2.0 * reach])));
    assert!(matches!(tube.chart(&v(&[2.0, 0.5]), false), Err(PerturbError::Poincare(PoincareError::NoHit { .. }))));
}

#[test]
fn constant_field_tube_matches_box_test_in_3d() {
    let u = Ball::new(vec![0.1, -0.05], 0.05);
    let tube = TubeRegion::new(&constant3(), &v(&[0.0, 0.0, 0.0]), u.clone(), 3, MapOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..60 {
        let q = v(&[rng.random_range(-0.5..3.5), rng.random_range(0.0..0.2), rng.random_range(-0.12..0.02)]);
        let closed = q[0] >= 0.0 && q[0] <= 3.0 && u.contains(&v(&[q[1], q[2]]));
        assert_eq!(tube.contains(&q), closed, "{q:?}");
    }
    let cert = tube.injectivity_certificate(0.25, 8, 6).unwrap();
    assert!(cert.passed, "{cert:?}");
}

#[test]
fn identity_bundle_lifts_to_the_poincare_maps() {
    let x = rotation();
    let p = v(&[1.5, 0.0]);
    let orbit = BaseOrbit::new(&x, &p, 2, MapOptions::default()).unwrap();
    let bundle = PerturbationBundle::identity(&orbit, Ball::centered(1, 0.01)).unwrap();
    assert!(bundle.check(&orbit, 16).unwrap().passed);
    let lifted = lift_perturbation(&x, &bundle, MapOptions::default()).unwrap();
    for i in 1..=2 {
        for xi in [-0.008, 0.0, 0.005] {
            let q = lifted.section_point(i - 1, &v(&[xi])).unwrap();
            let (expected, _) = lifted.unperturbed(i).evaluate(&q).unwrap();
            assert!((lifted.conjugated(i, &q).unwrap() - &expected).norm() < 1e-9);
            assert_eq!(lifted.eval(i, &q).unwrap(), expected);
        }
    }
}

#[test]
fn lifted_bump_distance_on_the_rotation() {
    let x = rotation();
    let p = v(&[1.5, 0.0]);
    let mut previous = f64::INFINITY;
    for r in [0.02, 0.01, 0.005] {
        let orbit = BaseOrbit::new(&x, &p, 1, MapOptions::default()).unwrap();
        let a = orbit.cocycle().unwrap();
        let pert = cocycle_perturbation(
            &a,
            &Ball::centered(1, r),
            &Ball::centered(1, r / 4.0),
            0.01,
            0.2,
            None,
            CocycleOptions::default(),
        )
        .unwrap();
        assert_eq!(pert.n1, 1);
        let bundle = PerturbationBundle::from_cocycle(&orbit, &pert, 0.2).unwrap();
        let check = bundle.check(&orbit, 33).unwrap();
        assert!(check.passed, "{check:?}");
        let lifted = lift_perturbation(&x, &bundle, MapOptions::default()).unwrap();
        let d = lifted.distance(1, 33).unwrap();
        let slack = d.c1 - 2.0 * check.c1_distances[0];
        assert!(slack < 0.0 || slack < previous, "r={r}: {d:?} vs {:?}", check.c1_distances);
        previous = slack.max(0.0);
        let outside = lifted.section_point(0, &v(&[1.5 * r])).unwrap();
        assert_eq!(lifted.eval(1, &outside).unwrap(), lifted.unperturbed(1).evaluate(&outside).unwrap().0);
    }
}

fn shear_realization(r: f64, epsilon: f64) -> Result<Realization, PerturbError> {
    let x = shear();
    let p = v(&[0.0, 0.0]);
    let opts = MapOptions::default();
    let u = Ball::centered(1, r);
    let tube = TubeRegion::new(&x, &p, u.clone(), 2, opts)?;
    let a = tube.orbit().cocycle()?;
    let pert = cocycle_perturbation(&a, &u, &Ball::centered(1, r / 4.0), 0.01, 0.5, None, CocycleOptions::default())?;
    let bundle = PerturbationBundle::from_cocycle(tube.orbit(), &pert, 0.5)?;
    let lifted = lift_perturbation(&x, &bundle, opts)?;
    realize(&lifted, &tube, BumpProfile::default(), epsilon, RealizeOptions::new(0.25, 2.0 * r))
}

#[test]
fn identity_bundle_realizes_the_same_field() {
    let x = shear();
    let p = v(&[0.0, 0.0]);
    let tube = TubeRegion::new(&x, &p, Ball::centered(1, 1e-3), 2, MapOptions::default()).unwrap();
    let bundle = PerturbationBundle::identity(tube.orbit(), Ball::centered(1, 1e-3)).unwrap();
    let lifted = lift_perturbation(&x, &bundle, MapOptions::default()).unwrap();
    let real = realize(&lifted, &tube, BumpProfile::default(), 0.1, RealizeOptions::new(0.25, 2e-3)).unwrap();
    let pts = tube.sample_points(9, 16).unwrap();
    let worst = pts.iter().map(|(_, _, q)| (real.field.eval(q) - x.eval(q)).norm()).fold(0.0, f64::max);
    assert!(worst <= 1e-9);
    assert!(real.report.passed());
}

#[test]
fn det_bump_on_the_shear_is_realized() {
    let real = shear_realization(1e-3, 1.0).unwrap();
    let rep = &real.report;
    assert!(rep.passed(), "{rep:?}");
    assert!(rep.support_exact && rep.support_samples > 100);
    assert!(rep.fidelity.iter().all(|f| f.samples == 50 && f.max_error <= 1e-6));
    assert!(rep.hitting_times.0 >= 1.75 && rep.hitting_times.1 <= 2.25);
    let csv = real.to_csv(3, 4).unwrap();
    assert!(csv.starts_with("slice,xi_1,q_1,q_2,dy_1,dy_2"));
    assert_eq!(csv.lines().count(), 1 + 3 * 5);
}

#[test]
fn attained_distance_shrinks_with_the_tube() {
    let d: Vec<f64> =
        [1e-3, 5e-4, 2.5e-4].iter().map(|r| shear_realization(*r, 1.0).unwrap().report.c1_distance).collect();
    assert!(d[1] <= d[0] && d[2] <= d[1], "{d:?}");
}

#[test]
fn small_budget_reports_the_attained_distance() {
    match shear_realization(1e-3, 0.05) {
        Err(PerturbError::EpsilonExceeded { attained, budget }) => {
            assert_eq!(budget, 0.05);
            assert!(attained > 0.05 && attained < 1.0);
        }
        other => panic!("expected EpsilonExceeded, got {other:?}"),
    }
}

fn shear_spec(epsilon: f64, threshold: f64, x: Vector) -> DistortSpec {
    DistortSpec {
        p: v(&[0.0, 0.0]),
        u: Ball::centered(1, 5e-5),
        delta: Ball::centered(1, 1.25e-5),
        x,
        threshold,
        epsilon,
        eta: 0.1,
        horizon: 20.0,
        certified: Certified { c: 2.9231634732395237, alpha: 0.25, beta: 0.17104756698601167 },
    }
}

#[test]
fn zero_threshold_leaves_the_field_alone() {
    let x = shear();
    let (y, rep) = distort_pair(&x, &shear_spec(0.1, 0.0, v(&[0.0, -1.5e-4])), PipelineOptions::default()).unwrap();
    assert_eq!(rep.branch, "trivial");
    assert!(rep.passed());
    let q = v(&[1.0, 2e-5]);
    assert_eq!(y.eval(&q), x.eval(&q));
}

#[test]
fn tight_budget_on_the_shear_is_infeasible() {
    let r = distort_pair(&shear(), &shear_spec(0.1, 0.5, v(&[0.0, -1.5e-4])), PipelineOptions::default());
    assert!(matches!(r, Err(PerturbError::InfeasibleBudget(_))), "{r:?}");
}

#[test]
fn point_on_the_tube_fails_avoidance() {
    let r = distort_pair(&shear(), &shear_spec(2.0, 0.5, v(&[3.0, 2e-5 * 3f64.exp()])), PipelineOptions::default());
    assert!(matches!(r, Err(PerturbError::HypothesisUnverified(_))), "{r:?}");
}
