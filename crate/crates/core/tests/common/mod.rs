//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use linkcert::braid::{BraidModel, EndVolume};
use linkcert::bvh::{intersecting_pairs, BvhTree};
use linkcert::discretize::{discretize, DiscretizationParams};
use linkcert::generators::{generate, Scenario};
use linkcert::kernels::barnes_hut::{barnes_hut_pass, build_moment_tree, Order};
use linkcert::kernels::crossings::{count_in_frame, random_rotation, FrameCount};
use linkcert::kernels::direct::{link_direct, DirectVariant};
use linkcert::kernels::{compute_link, KernelChoice, KernelMethod};
use linkcert::pls::{loop_boxes, potential_link_search, PairSet};
use linkcert::{Aabb, CurveModel, LoopGeometry, Mat3, PolylineLoop, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

pub const KERNELS: [KernelMethod; 3] = [KernelMethod::CountCrossings, KernelMethod::DirectSum, KernelMethod::BarnesHut];

pub fn circle(center: Vec3, radius: f64, n: usize, plane: usize) -> Vec<Vec3> {
    (0..n)
        .map(|k| {
            let t = TAU * k as f64 / n as f64;
            let (a, b) = (radius * t.cos(), radius * t.sin());
            center
                + match plane {
                    0 => Vec3::new(a, b, 0.0),
                    1 => Vec3::new(0.0, a, b),
                    _ => Vec3::new(a, 0.0, b),
                }
        })
        .collect()
}

pub fn polyline(pts: Vec<Vec3>) -> PolylineLoop {
    PolylineLoop::new(pts).expect("valid loop")
}

/// Small instances of every generator, cheap enough for exhaustive checks.
pub fn small_scenarios() -> Vec<Scenario> {
    vec![
        Scenario::Hopf { n: 48 },
        Scenario::UnlinkedCircles { count: 4, n: 32 },
        Scenario::TorusLink { t: 2, p: 3, n: 256 },
        Scenario::DoubleHelixRibbon { lambda: 3, n: 600 },
        Scenario::SquareLinkGrid { l: 4, n: 32 },
        Scenario::Woundball { nu: 4, n: 400 },
        Scenario::PerturbedRandomLink { t: 1, p: 2, n: 64, seed: 3, amplitude: 0.9, catmull_rom: true },
    ]
}

/// Linked-candidate loops of a scenario after the adaptive discretization.
pub fn discretized(sc: &Scenario) -> (CurveModel, Vec<PolylineLoop>, Vec<(usize, usize)>) {
    let (model, _) = generate(sc).expect("scenario");
    let pairs = potential_link_search(&model, &PairSet::new());
    let disc = discretize(&model, &pairs, &DiscretizationParams::default()).expect("discretization");
    (model, disc.loops, pairs.pairs().to_vec())
}

pub fn link(a: &PolylineLoop, b: &PolylineLoop, method: KernelMethod) -> i64 {
    compute_link(a, b, &KernelChoice::new(method)).expect("kernel").value
}

pub fn random_rigid(rng: &mut impl Rng) -> (Mat3, Vec3) {
    let rot = random_rotation(rng);
    let shift = Vec3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
    (rot, shift)
}

/// Kernel invariants on one loop pair. Returns a description of the first
/// violation.
pub fn check_pair_invariants(a: &PolylineLoop, b: &PolylineLoop, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ds = link_direct(a, b, DirectVariant::AngleSum);
    let atan = link_direct(a, b, DirectVariant::PerPairAtan);
    if (ds - atan).abs() > 1e-9 {
        return Err(format!("ds variants differ: {ds} vs {atan}"));
    }
    let (ta, tb) = (build_moment_tree(a), build_moment_tree(b));
    let exact = barnes_hut_pass(&ta, &tb, 1e6, Order::Quadrupole, 1.0 / (4.0 * PI)).value;
    if (exact - ds).abs() > 1e-12 {
        return Err(format!("bh at huge beta {exact} vs ds {ds}"));
    }
    for (name, t, lp) in [("a", &ta, a), ("b", &tb, b)] {
        let cm = t.root().c_m.norm();
        if cm >= 1e-9 * lp.length() {
            return Err(format!("root monopole of {name} is {cm}"));
        }
    }
    let frame = random_rotation(&mut rng);
    if let FrameCount::Signed(s) = count_in_frame(a, b, &frame, 750) {
        if s % 2 != 0 {
            return Err(format!("odd crossing sum {s}"));
        }
    }

    let (rot, shift) = random_rigid(&mut rng);
    let (ma, mb) = (a.transformed(&rot, shift), b.transformed(&rot, shift));
    let (ra, fa) = (a.midpoint_refined(), a.reversed());
    for method in KERNELS {
        let v = link(a, b, method);
        let checks = [
            ("symmetry", link(b, a, method), v),
            ("orientation flip", link(&fa, b, method), -v),
            ("rigid motion", link(&ma, &mb, method), v),
            ("refinement", link(&ra, b, method), v),
        ];
        for (what, got, want) in checks {
            if got != want {
                return Err(format!("{method}: {what} gives {got}, expected {want}"));
            }
        }
    }
    Ok(())
}

pub fn brute_force_pairs(boxes: &[Aabb], other: &[Aabb]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, a) in boxes.iter().enumerate() {
        for (j, b) in other.iter().enumerate() {
            if a.overlaps(b) {
                out.push((i, j));
            }
        }
    }
    out
}

pub fn bvh_matches_brute_force(a: &[Aabb], b: &[Aabb], leaf: usize) -> bool {
    let (ta, tb) = (BvhTree::build(a.to_vec(), leaf), BvhTree::build(b.to_vec(), leaf));
    let mut got = intersecting_pairs(&ta, &tb);
    got.sort_unstable();
    got == brute_force_pairs(a, b)
}

/// PLS returns exactly the overlapping loop-box pairs, and contains every
/// linked pair of the expected matrix.
pub fn pls_exact(sc: &Scenario) -> Result<(), String> {
    let (model, expected) = generate(sc).map_err(|e| e.to_string())?;
    let boxes = loop_boxes(&model);
    let brute: Vec<(usize, usize)> = brute_force_pairs(&boxes, &boxes).into_iter().filter(|&(i, j)| i < j).collect();
    let pairs = potential_link_search(&model, &PairSet::new());
    if pairs.pairs() != brute.as_slice() {
        return Err(format!("{sc}: pls {:?} vs brute force {:?}", pairs.pairs(), brute));
    }
    match expected.entries.iter().find(|&&(i, j, _)| !pairs.contains(i, j)) {
        Some(e) => Err(format!("{sc}: linked pair {e:?} missing from pls")),
        None => Ok(()),
    }
}

pub fn random_boxes(rng: &mut impl Rng, n: usize) -> Vec<Aabb> {
    (0..n)
        .map(|_| {
            let c = Vec3::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
            let h = Vec3::new(rng.gen_range(0.0..0.6), rng.gen_range(0.0..0.6), rng.gen_range(0.0..0.6));
            Aabb::new(c - h, c + h)
        })
        .collect()
}

/// Strand position in the yz plane: a regular polygon of radius 1.
pub fn strand_anchor(k: usize, strands: usize) -> Vec3 {
    let a = TAU * k as f64 / strands as f64;
    Vec3::new(0.0, a.cos(), a.sin())
}

/// Braid of straight strands along x from 0 to 10. With `pull = Some((i, j))`,
/// strand `i` leaves its lane over x in [3, 7] and circles strand `j` once.
pub fn hexagon_braid(strands: usize, pull: Option<(usize, usize)>) -> BraidModel {
    let curves = (0..strands)
        .map(|k| {
            let home = strand_anchor(k, strands);
            let pts: Vec<Vec3> = (0..=200)
                .map(|s| {
                    let x = s as f64 * 0.05;
                    let yz = match pull {
                        Some((i, j)) if i == k && (3.0..=7.0).contains(&x) => {
                            let c = strand_anchor(j, strands);
                            let e1 = (home - c).normalized();
                            let e2 = Vec3::new(1.0, 0.0, 0.0).cross(e1);
                            let q = c + e1 * 0.3;
                            if x < 4.0 {
                                home.lerp(q, x - 3.0)
                            } else if x <= 6.0 {
                                let t = PI * (x - 4.0);
                                c + e1 * (0.3 * t.cos()) + e2 * (0.3 * t.sin())
                            } else {
                                q.lerp(home, x - 6.0)
                            }
                        }
                        _ => home,
                    };
                    Vec3::new(x, yz.y, yz.z)
                })
                .collect();
            LoopGeometry::open_polyline(&pts)
        })
        .collect();
    let x = Vec3::new(1.0, 0.0, 0.0);
    BraidModel {
        curves,
        left: EndVolume::from_aabb(Aabb::new(Vec3::new(-3.0, -2.0, -2.0), Vec3::new(0.5, 2.0, 2.0)), -x),
        right: EndVolume::from_aabb(Aabb::new(Vec3::new(9.5, -2.0, -2.0), Vec3::new(13.0, 2.0, 2.0)), x),
    }
}
