//! Reference values from independent, deliberately naive computations.

mod common;

use common::*;
use linkcert::generators::{generate, Scenario};
use linkcert::kernels::{link_direct, segment_pair_lambda, DirectVariant};
use linkcert::{compute_linking_matrix, KernelChoice, KernelMethod, Mat3, PolylineLoop, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Midpoint rule for the Gauss integral over two straight segments, `2^levels`
/// cells per segment.
fn gauss_quadrature(a0: Vec3, a1: Vec3, b0: Vec3, b1: Vec3, levels: u32) -> f64 {
    let n = 1usize << levels;
    let (da, db) = (a1 - a0, b1 - b0);
    let cross = da.cross(db);
    let mut sum = 0.0;
    for i in 0..n {
        let r1 = a0 + da * ((i as f64 + 0.5) / n as f64);
        for j in 0..n {
            let r2 = b0 + db * ((j as f64 + 0.5) / n as f64);
            let d = r1 - r2;
            let r = d.norm();
            sum += d.dot(cross) / (r * r * r);
        }
    }
    sum / (4.0 * PI * (n * n) as f64)
}

/// Brute-force crossing count along z after a fixed rotation: every crossing
/// where the first loop passes over the second contributes the sign of the
/// projected tangent cross product.
fn naive_crossings(a: &PolylineLoop, b: &PolylineLoop) -> i64 {
    let rot = Mat3::rotation_axis(Vec3::new(0.31, 0.52, 0.79).normalized(), 0.377);
    let pa: Vec<Vec3> = a.vertices().iter().map(|&p| rot.mul_vec(p)).collect();
    let pb: Vec<Vec3> = b.vertices().iter().map(|&p| rot.mul_vec(p)).collect();
    let cross2 = |u: Vec3, v: Vec3| u.x * v.y - u.y * v.x;
    let mut total = 0;
    for i in 0..pa.len() {
        let (p, p1) = (pa[i], pa[(i + 1) % pa.len()]);
        for j in 0..pb.len() {
            let (q, q1) = (pb[j], pb[(j + 1) % pb.len()]);
            let (d1, d2) = (p1 - p, q1 - q);
            let den = cross2(d1, d2);
            if den == 0.0 {
                continue;
            }
            let s = cross2(q - p, d2) / den;
            let t = cross2(q - p, d1) / den;
            if !(0.0..1.0).contains(&s) || !(0.0..1.0).contains(&t) {
                continue;
            }
            let (za, zb) = ((p + d1 * s).z, (q + d2 * t).z);
            if za > zb {
                total += den.signum() as i64;
            }
        }
    }
    total
}

#[test]
fn segment_pair_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pt = |s: f64| Vec3::new(rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s));
    let mut checked = 0;
    while checked < 12 {
        let (a0, a1, b0, b1) = (pt(1.0), pt(1.0), pt(1.0), pt(1.0));
        let shift = Vec3::new(0.0, 0.0, 1.5);
        let (b0, b1) = (b0 + shift, b1 + shift);
        if (a0 - b0).norm().min((a1 - b1).norm()) < 0.5 {
            continue;
        }
        let want = gauss_quadrature(a0, a1, b0, b1, 10);
        // the loop segment comes first, the partner segment second
        let got = segment_pair_lambda(b0, b1, a0, a1);
        assert!((got - want).abs() < 1e-6, "{got} vs quadrature {want}");
        checked += 1;
    }
}

#[test]
fn direct_sum_matches_quadrature_on_a_coarse_hopf_link() {
    let a = polyline(circle(Vec3::ZERO, 1.0, 7, 0));
    let b = polyline(circle(Vec3::new(1.0, 0.0, 0.0), 1.0, 5, 2));
    let mut want = 0.0;
    for (a0, a1) in a.segments() {
        for (b0, b1) in b.segments() {
            want += gauss_quadrature(a0, a1, b0, b1, 9);
        }
    }
    let got = link_direct(&a, &b, DirectVariant::AngleSum);
    assert!((got - want).abs() < 1e-3, "{got} vs quadrature {want}");
    assert_eq!(naive_crossings(&a, &b), got.round() as i64);
}

#[test]
fn torus_link_product_rule() {
    for (t, p) in [(1, 1), (1, 2), (2, 1), (2, 3)] {
        let (model, expected) = generate(&Scenario::TorusLink { t, p, n: 256 }).unwrap();
        let loops: Vec<PolylineLoop> = model
            .loops()
            .iter()
            .map(|l| PolylineLoop::new(l.segments.iter().map(|s| s.start()).collect()).unwrap())
            .collect();
        assert_eq!(naive_crossings(&loops[0], &loops[1]), (t * p) as i64, "torus ({t}, {p})");
        assert_eq!(expected.entries, vec![(0, 1, (t * p) as i64)]);
    }
}

#[test]
fn hopf_and_ribbon_orientations() {
    for sc in [Scenario::Hopf { n: 64 }, Scenario::DoubleHelixRibbon { lambda: 4, n: 800 }] {
        let (model, expected) = generate(&sc).unwrap();
        let loops: Vec<PolylineLoop> = model
            .loops()
            .iter()
            .map(|l| PolylineLoop::new(l.segments.iter().map(|s| s.start()).collect()).unwrap())
            .collect();
        assert_eq!(naive_crossings(&loops[0], &loops[1]), expected.get(0, 1), "{sc}");
    }
}

#[test]
fn grid_and_woundball_expectations() {
    let (model, expected) = generate(&Scenario::SquareLinkGrid { l: 10, n: 64 }).unwrap();
    assert_eq!(expected.entries.len(), 25);
    assert!(expected.entries.iter().all(|e| e.2.abs() == 1));
    let m = compute_linking_matrix(&model, &Default::default(), &Default::default()).unwrap();
    assert_eq!(m.entries, expected.entries);

    let (model, expected) = generate(&Scenario::Woundball { nu: 100, n: 4000 }).unwrap();
    assert!(expected.entries.is_empty());
    let opts = linkcert::CertifyOptions::with_kernel(KernelChoice::new(KernelMethod::CountCrossings));
    assert!(compute_linking_matrix(&model, &opts, &Default::default()).unwrap().entries.is_empty());
}
