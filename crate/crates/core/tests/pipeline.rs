mod common;

use common::*;
use linkcert::braid::{close_braid, reclose_braid, BraidError};
use linkcert::certify::Status;
use linkcert::discretize::{discretize, uniform_discretize, DiscretizationErrorKind, DiscretizationParams};
use linkcert::generators::{generate, Scenario};
use linkcert::io::{parse_model, ModelFormat};
use linkcert::kernels::{link_direct, DirectVariant};
use linkcert::model::LoopGeometry;
use linkcert::pls::{potential_link_search, PairSet};
use linkcert::spline::catmull_rom_to_cubics;
use linkcert::{
    compute_linking_matrix, parse_matrix, serialize_matrix, verify, CertifyError, CertifyOptions, CurveModel,
    KernelChoice, KernelMethod, Mat3, Vec3,
};

fn opts(method: KernelMethod) -> CertifyOptions {
    CertifyOptions::with_kernel(KernelChoice::new(method))
}

fn none() -> PairSet {
    PairSet::new()
}

#[test]
fn generators_are_self_consistent_for_every_kernel() {
    let mut scenarios = small_scenarios();
    scenarios.push(Scenario::SquareLinkGrid { l: 10, n: 64 });
    scenarios.push(Scenario::TorusLink { t: 3, p: 5, n: 800 });
    for sc in scenarios {
        let (model, expected) = generate(&sc).unwrap();
        for method in KERNELS {
            let m = compute_linking_matrix(&model, &opts(method), &none()).unwrap();
            assert_eq!(m.entries, expected.entries, "{sc} with {method}");
            assert_eq!(m.digest, expected.digest);
        }
    }
}

#[test]
fn disjoint_circles_certify_empty() {
    let (model, _) = generate(&Scenario::UnlinkedCircles { count: 1024, n: 16 }).unwrap();
    let m = compute_linking_matrix(&model, &CertifyOptions::default(), &none()).unwrap();
    assert_eq!(m.num_loops, 1024);
    assert!(m.entries.is_empty());
}

#[test]
fn hopf_certificate() {
    let (model, _) = generate(&Scenario::Hopf { n: 64 }).unwrap();
    let m = compute_linking_matrix(&model, &CertifyOptions::default(), &none()).unwrap();
    assert_eq!(m.entries, vec![(0, 1, 1)]);
}

#[test]
fn certificate_bytes_round_trip() {
    let (model, _) = generate(&Scenario::SquareLinkGrid { l: 10, n: 64 }).unwrap();
    let m = compute_linking_matrix(&model, &CertifyOptions::default(), &none()).unwrap();
    let bytes = serialize_matrix(&m);
    assert_eq!(serialize_matrix(&parse_matrix(&bytes).unwrap()), bytes);
    assert!(bytes.ends_with(b"\n"));

    let text = String::from_utf8(bytes).unwrap();
    let empty = text.replace(&format!("\"num_loops\":{}", m.num_loops), "\"num_loops\":2");
    let empty = empty.split("\"entries\":").next().unwrap().to_string()
        + "\"entries\":[],"
        + empty.split(",\"kernel\"").nth(1).map(|r| format!("\"kernel\"{r}")).unwrap().as_str();
    let parsed = parse_matrix(empty.as_bytes()).unwrap();
    assert_eq!(parsed.num_loops, 2);
    let out = String::from_utf8(serialize_matrix(&parsed)).unwrap();
    assert!(out.contains("\"entries\":[]") && out.contains("\"num_loops\":2"), "{out}");

    let bad = text.replacen("[0,1,1]", "[1,0,1]", 1);
    assert!(parse_matrix(bad.as_bytes()).is_err());
}

#[test]
fn verify_reports_a_pulled_ring() {
    let (model, _) = generate(&Scenario::SquareLinkGrid { l: 10, n: 64 }).unwrap();
    let reference = compute_linking_matrix(&model, &CertifyOptions::default(), &none()).unwrap();
    let own = verify(&model, &reference, &CertifyOptions::default(), false, &none()).unwrap();
    assert!(own.is_pass() && own.failing_pairs().is_empty() && own.digest_matches);

    // ring 2 sits between rings 1 and 3 of the first chain
    let mut loops = model.into_loops();
    loops[2] = loops[2].transformed(&Mat3::IDENTITY, Vec3::new(0.0, 0.0, 10.0));
    let edited = CurveModel::new(loops).unwrap();
    let full = verify(&edited, &reference, &CertifyOptions::default(), false, &none()).unwrap();
    assert_eq!(full.status, Status::Fail);
    assert!(!full.digest_matches);
    assert_eq!(full.failing_pairs(), [(1, 2), (2, 3)].into_iter().collect());
    assert_eq!(full.destroyed.len(), 2);

    let early = verify(&edited, &reference, &CertifyOptions::default(), true, &none()).unwrap();
    assert_eq!(early.status, Status::Aborted);
    let f = early.first_failure.expect("first failure");
    assert!(full.failing_pairs().contains(&(f.i, f.j)));
}

#[test]
fn verify_rejects_a_different_loop_count() {
    let (model, _) = generate(&Scenario::Hopf { n: 32 }).unwrap();
    let (other, _) = generate(&Scenario::UnlinkedCircles { count: 3, n: 32 }).unwrap();
    let reference = compute_linking_matrix(&model, &CertifyOptions::default(), &none()).unwrap();
    let r = verify(&other, &reference, &CertifyOptions::default(), false, &none()).unwrap();
    assert_eq!(r.status, Status::Fail);
    assert!(r.message.unwrap().contains("loop count"));
}

#[test]
fn separated_polylines_are_not_refined() {
    let (model, _) = generate(&Scenario::UnlinkedCircles { count: 5, n: 40 }).unwrap();
    let pairs = potential_link_search(&model, &none());
    let disc = discretize(&model, &pairs, &DiscretizationParams::default()).unwrap();
    for (l, p) in model.loops().iter().zip(&disc.loops) {
        let input: Vec<Vec3> = l.segments.iter().map(|s| s.start()).collect();
        assert_eq!(p.vertices(), input.as_slice());
    }
}

#[test]
fn interlocked_splines_match_dense_uniform_chords() {
    let a = catmull_rom_to_cubics(&circle(Vec3::ZERO, 1.0, 8, 0)).unwrap();
    let b = catmull_rom_to_cubics(&circle(Vec3::new(0.5, 0.0, 0.0), 1.0, 8, 2)).unwrap();
    let model = CurveModel::new(vec![LoopGeometry::closed_cubics(a), LoopGeometry::closed_cubics(b)]).unwrap();
    let m = compute_linking_matrix(&model, &CertifyOptions::default(), &none()).unwrap();
    let dense = uniform_discretize(&model, 64);
    let reference = link_direct(&dense[0], &dense[1], DirectVariant::AngleSum).round() as i64;
    assert_eq!(m.get(0, 1).abs(), 1);
    assert_eq!(m.get(0, 1), reference);
}

#[test]
fn touching_loops_are_reported() {
    let a = circle(Vec3::ZERO, 1.0, 8, 0);
    let b = circle(Vec3::new(2.0, 0.0, 0.0), 1.0, 8, 2);
    let third = circle(Vec3::new(20.0, 0.0, 0.0), 1.0, 8, 0);
    let model = CurveModel::new([third, a, b].iter().map(|p| LoopGeometry::closed_polyline(p)).collect()).unwrap();
    match compute_linking_matrix(&model, &CertifyOptions::default(), &none()) {
        Err(CertifyError::Discretization(e)) => {
            assert_eq!(e.kind, DiscretizationErrorKind::CurvesIntersect);
            assert_eq!(e.loops, vec![1, 2]);
            assert_eq!(e.to_string(), "Curves 1 and 2 intersect.");
        }
        other => panic!("expected an intersection, got {other:?}"),
    }
}

#[test]
fn json_models_load() {
    let text = r#"{"loops":[
        {"type":"polyline","closed":true,"points":[[0,0,0],[1,0,0],[1,1,0],[0,1,0]]},
        {"type":"polyline","closed":true,"points":[[5,0,0],[6,0,0],[6,1,0],[5,1,0]]}]}"#;
    let m = parse_model(text, ModelFormat::JsonCurves).unwrap();
    assert_eq!(m.len(), 2);
    assert!(m.loops().iter().all(|l| l.segments.len() == 4));
    assert!(parse_model(&text.replace("[6,1,0]", "[6,NaN,0]"), ModelFormat::JsonCurves).is_err());
}

#[test]
fn trivial_braid_certifies_empty() {
    for strands in [4, 6] {
        let c = close_braid(&hexagon_braid(strands, None)).unwrap();
        let m = compute_linking_matrix(&c.model, &CertifyOptions::default(), &c.excluded).unwrap();
        assert!(m.entries.is_empty(), "{strands} strands: {:?}", m.entries);
    }
    assert_eq!(close_braid(&hexagon_braid(3, None)).unwrap_err(), BraidError::TooFewStrands(3));
}

#[test]
fn wrapped_strands_link_their_loops() {
    let c = close_braid(&hexagon_braid(6, Some((2, 5)))).unwrap();
    let m = compute_linking_matrix(&c.model, &CertifyOptions::default(), &c.excluded).unwrap();
    // loop k holds strands k and k + 1
    let holds = |k: usize, s: usize| k == s || (k + 1) % 6 == s;
    assert!(!m.entries.is_empty());
    for &(i, j, _) in &m.entries {
        let crosses = (holds(i, 2) && holds(j, 5)) || (holds(i, 5) && holds(j, 2));
        assert!(crosses, "unexpected link between loops {i} and {j}");
    }
}

#[test]
fn reclosing_after_rigid_end_motion_verifies() {
    let braid = hexagon_braid(6, Some((0, 3)));
    let closed = close_braid(&braid).unwrap();
    let reference = compute_linking_matrix(&closed.model, &CertifyOptions::default(), &closed.excluded).unwrap();

    // Right block moves by +1 in x and the strands stretch to follow it.
    let mut moved = braid.clone();
    moved.right.center += Vec3::new(1.0, 0.0, 0.0);
    for c in &mut moved.curves {
        let pts: Vec<Vec3> = c.segments.iter().map(|s| s.start()).chain([c.end()]).collect();
        let stretched: Vec<Vec3> = pts.iter().map(|p| Vec3::new(p.x * 1.1, p.y, p.z)).collect();
        *c = LoopGeometry::open_polyline(&stretched);
    }
    let again = reclose_braid(&moved, &closed.template).unwrap();
    let r = verify(&again.model, &reference, &CertifyOptions::default(), false, &again.excluded).unwrap();
    assert!(r.is_pass(), "{r:?}");

    // Both blocks turned about their own centers by the same rotation.
    let rot = Mat3::rotation_axis(Vec3::new(1.0, 0.0, 0.0), 0.2);
    let mut turned = braid.clone();
    for v in [&mut turned.left, &mut turned.right] {
        v.basis = v.basis.mul_mat(&rot.transpose());
        v.outward = rot.mul_vec(v.outward);
    }
    let again = reclose_braid(&turned, &closed.template).unwrap();
    let r = verify(&again.model, &reference, &CertifyOptions::default(), false, &again.excluded).unwrap();
    assert!(r.is_pass(), "{r:?}");

    let mut scaled = braid;
    scaled.left.half_extents = scaled.left.half_extents * 1.5;
    assert!(matches!(reclose_braid(&scaled, &closed.template), Err(BraidError::NonRigid(_))));
}
