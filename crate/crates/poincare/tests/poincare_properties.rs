use std::f64::consts::{E, PI};

use geometry_flow::{flow, DomainChart, Matrix, Vector, VectorField};
use poincare::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn v(x: &[f64]) -> Vector {
    Vector::from_column_slice(x)
}

fn rotation() -> VectorField {
    VectorField::new("rigid_rotation", DomainChart::annulus(1.0, 2.0, 0.5).unwrap(), |p| v(&[-p[1], p[0]]))
        .with_jacobian(|_| Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]))
}

fn unit_speed() -> VectorField {
    VectorField::new("annulus_unit_speed", DomainChart::annulus(0.5, 2.5, 0.5).unwrap(), |p| {
        let r = p.norm();
        v(&[-p[1] / r, p[0] / r])
    })
}

fn shear() -> VectorField {
    VectorField::new("shear_strip", DomainChart::boxed(vec![-100.0, -1e6], vec![100.0, 1e6], 1.0).unwrap(), |p| {
        v(&[1.0, p[1]])
    })
    .with_jacobian(|_| Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]))
}

fn torus_linear() -> VectorField {
    let theta = (5f64.sqrt() - 1.0) / 2.0;
    VectorField::new("torus_linear", DomainChart::torus(vec![1.0, 1.0], 0.4).unwrap(), move |_| v(&[1.0, theta]))
}

fn nonlinear_torus() -> VectorField {
    VectorField::new("wavy", DomainChart::torus(vec![1.0, 1.0], 0.4).unwrap(), |p| {
        v(&[1.0 + 0.3 * (2.0 * PI * p[1]).sin(), 0.7 + 0.2 * (2.0 * PI * p[0]).cos()])
    })
}

#[test]
fn isometric_flows_preserve_normal_volume() {
    for t in [0.3, 1.0, 2.5, -1.7, 7.0] {
        let op = linear_poincare(&rotation(), &v(&[1.3, 0.4]), t, 1e-12).unwrap();
        assert!(op.logabsdet.abs() < 1e-8, "t={t}");
        let op = linear_poincare(&torus_linear(), &v(&[0.1, 0.7]), t, 1e-12).unwrap();
        assert!((op.matrix - Matrix::identity(1, 1)).norm() < 1e-12);
    }
}

#[test]
fn shear_strip_logdet_matches_oracle() {
    // scipy DOP853 variational integration plus explicit projection
    let op = linear_poincare(&shear(), &v(&[0.0, 0.0]), 1.0, 1e-12).unwrap();
    assert!((op.logabsdet - 0.9999999999999734).abs() < 1e-8);
}

#[test]
fn composition_law_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tol = 1e-11;
    let fields: Vec<(VectorField, Box<dyn Fn(&mut ChaCha8Rng) -> Vector>)> = vec![
        (shear(), Box::new(|r: &mut ChaCha8Rng| v(&[r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]))),
        (
            unit_speed(),
            Box::new(|r: &mut ChaCha8Rng| {
                let (rad, th) = (r.random_range(1.0..2.0), r.random_range(0.0..2.0 * PI));
                v(&[rad * th.cos(), rad * th.sin()])
            }),
        ),
        (nonlinear_torus(), Box::new(|r: &mut ChaCha8Rng| v(&[r.random(), r.random()]))),
    ];
    for (f, sample) in &fields {
        for _ in 0..7 {
            let p = sample(&mut rng);
            let s = rng.random_range(-2.0..2.0);
            let t = rng.random_range(-2.0..2.0);
            let whole = linear_poincare(f, &p, s + t, tol).unwrap().logabsdet;
            let first = linear_poincare(f, &p, s, tol).unwrap().logabsdet;
            let ps = flow(f, &p, s, tol).unwrap();
            let second = linear_poincare(f, &ps, t, tol).unwrap().logabsdet;
            assert!((whole - first - second).abs() < 1e-6, "{} s={s} t={t}", f.name());
        }
    }
}

#[test]
fn logabsdet_is_frame_independent() {
    let f = VectorField::new("vortex3", DomainChart::boxed(vec![-5.0; 3], vec![5.0; 3], 1.0).unwrap(), |p| {
        v(&[1.0 + 0.2 * p[1], -0.3 * p[0] + 0.1 * p[2], 0.5 + 0.1 * p[0] * p[1]])
    });
    let op = linear_poincare(&f, &v(&[0.2, -0.1, 0.3]), 1.3, 1e-12).unwrap();
    let rot = |a: f64| Matrix::from_row_slice(2, 2, &[a.cos(), -a.sin(), a.sin(), a.cos()]);
    let flip = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let other = rot(0.7).transpose() * &op.matrix * (rot(-1.9) * flip);
    assert!((logabsdet(&other) - op.logabsdet).abs() < 1e-12);
}

#[test]
fn unit_speed_annulus_hitting_times_match_oracle() {
    let f = unit_speed();
    let m = PoincareMap::new(&f, &v(&[1.0, 0.0]), 1.0, 0.3, MapOptions::default()).unwrap();
    // scipy event detection: 0.8999999999997553, 0.999999999999674, 1.1999999999996505
    for r in [0.9, 1.0, 1.2] {
        let (q, tau) = m.evaluate(&v(&[r, 0.0])).unwrap();
        assert!((tau - r).abs() < 1e-9, "r={r} tau={tau}");
        assert!((q - v(&[r * 1f64.cos(), r * 1f64.sin()])).norm() < 1e-9);
    }
}

#[test]
fn rigid_rotation_section_at_one_radian() {
    let f = rotation();
    let m = PoincareMap::new(&f, &v(&[1.0, 0.0]), 1.0, 0.4, MapOptions::default()).unwrap();
    for r in [1.0, 1.25, 1.4] {
        let (q, tau) = m.evaluate(&v(&[r, 0.0])).unwrap();
        assert!((tau - 1.0).abs() < 1e-10);
        assert!((q - v(&[r * 1f64.cos(), r * 1f64.sin()])).norm() < 1e-9);
    }
}

#[test]
fn base_point_hits_at_nominal_time_on_every_field() {
    for (f, p) in [(shear(), v(&[0.0, 0.4])), (unit_speed(), v(&[1.5, 0.2])), (nonlinear_torus(), v(&[0.3, 0.6]))] {
        let m = PoincareMap::new(&f, &p, 2.0, 0.05, MapOptions::default()).unwrap();
        let (q, tau) = m.evaluate(&p).unwrap();
        assert!((tau - 2.0).abs() < 1e-9, "{}", f.name());
        assert!(f.domain().distance(&q, m.target().base()) < 1e-8);
    }
}

#[test]
fn poincare_derivative_at_base_is_linear_poincare_flow() {
    let f = nonlinear_torus();
    let p = v(&[0.3, 0.6]);
    let m = PoincareMap::new(&f, &p, 1.0, 0.05, MapOptions::default()).unwrap();
    let h = 1e-5;
    let fd = (m.lifted(&v(&[h])).unwrap() - m.lifted(&v(&[-h])).unwrap()) / (2.0 * h);
    let (_, analytic) = m.lifted_jacobian(&v(&[0.0])).unwrap();
    let lpf = linear_poincare(&f, &p, 1.0, 1e-12).unwrap();
    assert!((fd[0] - lpf.matrix[(0, 0)]).abs() < 1e-6);
    assert!((analytic[(0, 0)] - lpf.matrix[(0, 0)]).abs() < 1e-8);
}

#[test]
fn rotation_band_check_hits_exactly() {
    let r = hitting_time_bounds_check(&rotation(), &v(&[1.5, 0.0]), 2, 12, 0.25, 0.1, 2.1, 1e-11).unwrap();
    assert!(r.passed());
    assert!(r.rows.iter().all(|h| (h.tau.unwrap() - 2.0).abs() < 1e-9));
    assert!(r.to_csv().starts_with("q_1,q_2,tau,band_low,band_high,pass"));
}

fn shear_samples() -> Vec<Vector> {
    let mut pts = Vec::new();
    for y in [-1.0, -0.5, -0.05, 0.0, 0.05, 0.5, 1.0] {
        pts.push(v(&[0.0, y]));
    }
    pts
}

#[test]
fn shear_calibration_and_inflated_radius() {
    let f = shear();
    let t_grid: Vec<f64> = (-4..=4).filter(|&k| k != 0).map(|k| k as f64 / 4.0).collect();
    let cert = boundedness_certificate(&f, &shear_samples(), &t_grid, CertificateOptions::default()).unwrap();
    assert!((cert.c - 1.05 * E).abs() < 0.05 * E, "{cert:?}");
    let cal = calibrate(&f, cert.c, &shear_samples(), 3, 8, 1e-11).unwrap();
    assert_eq!(cal.alpha, 0.25);
    let p = v(&[0.0, 0.05]);
    let ok = hitting_time_bounds_check(&f, &p, 3, 20, cal.alpha, cal.beta, cert.c, 1e-11).unwrap();
    assert!(ok.passed());
    let bad = hitting_time_bounds_check(&f, &p, 3, 20, cal.alpha, 10.0 * cal.beta, cert.c, 1e-11).unwrap();
    assert!(bad.violations >= 1, "{bad:?}");
}

#[test]
fn certificates_of_linear_examples() {
    let c = VectorField::new("c", DomainChart::torus(vec![1.0, 1.0], 0.4).unwrap(), |_| v(&[1.0, 0.0]));
    let t_grid = [-1.0, -0.5, 0.5, 1.0];
    let cert = boundedness_certificate(&c, &c.domain().sample_grid(4), &t_grid, CertificateOptions::default()).unwrap();
    assert!((cert.c - 1.05).abs() < 1e-9);

    let rot = rotation();
    let cert =
        boundedness_certificate(&rot, &rot.domain().sample_grid(4), &t_grid, CertificateOptions::default()).unwrap();
    assert!((cert.c - 2.1).abs() < 1e-6, "{cert:?}");

    let saddle = VectorField::new("saddle", DomainChart::boxed(vec![-5.0, -5.0], vec![5.0, 5.0], 1.0).unwrap(), |p| {
        v(&[p[0], -p[1]])
    })
    .with_jacobian(|_| Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
    let pts = geometry_flow::lattice(&[vec![0.2, 0.6, 1.0], vec![0.2, 0.6, 1.0]]);
    let cert = boundedness_certificate(&saddle, &pts, &t_grid, CertificateOptions::default()).unwrap();
    assert!((cert.conditions.c - E).abs() < 1e-8);
    assert!((cert.c - 1.05 * E).abs() < 0.02 * E, "{cert:?}");
}

#[test]
fn psi_bounds_shrink_towards_one() {
    let f = shear();
    let p = v(&[0.0, 0.3]);
    let mut last = f64::INFINITY;
    for rho in [1e-2, 1e-3, 1e-4] {
        let charts = linearizing_coordinates(&f, &p, 2, rho, 9, MapOptions::default()).unwrap();
        let worst = charts.iter().map(|(_, b)| b.max()).fold(0.0, f64::max);
        assert!(worst < 2.0);
        assert!(worst - 1.0 <= last + 1e-9, "rho={rho}");
        last = worst - 1.0;
    }
    assert!(last < 1e-3);
}
