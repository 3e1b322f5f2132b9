//! Linking number by counting signed crossings in a regular projection.
//!
//! The projection frame starts random, is then rotated about its z axis so
//! projected segment directions sit as far as possible from the x and y axes,
//! and then about its y axis so no segment is close to parallel with the
//! viewing direction. Crossings are found with exact orientation predicates;
//! any touching, collinear overlap or equal-depth crossing makes the frame
//! irregular and triggers a retry with a fresh random frame.

use crate::bvh::BvhTree;
use crate::geom::{Aabb, Mat3, Vec3};
use crate::model::PolylineLoop;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust::{orient2d, Coord};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use super::KernelError;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossingParams {
    pub seed: u64,
    pub max_retries: u32,
    /// Mean loop size above which loop-1 segments go into a 2D BVH.
    pub bvh_threshold: usize,
}

impl Default for CrossingParams {
    fn default() -> Self {
        CrossingParams { seed: 0x5eed, max_retries: 16, bvh_threshold: 750 }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct CrossingOutcome {
    pub linking: i64,
    /// Frames rejected as irregular before the accepted one.
    pub retries: u32,
}

/// Outcome of counting in one fixed frame.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum FrameCount {
    /// Sum of crossing signs (twice the linking number).
    Signed(i64),
    Degenerate,
}

/// SplitMix64 finalizer; decorrelates nearby seeds.
pub fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-pair seed derived from a global seed and the loop indices.
pub fn pair_seed(seed: u64, i: usize, j: usize) -> u64 {
    mix_seed(mix_seed(seed ^ mix_seed(i as u64)) ^ (j as u64).rotate_left(32))
}

/// Uniformly distributed rotation (Shoemake's quaternion sampling).
pub fn random_rotation<R: Rng>(rng: &mut R) -> Mat3 {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (x, y) = (a * (TAU * u2).sin(), a * (TAU * u2).cos());
    let (z, w) = (b * (TAU * u3).sin(), b * (TAU * u3).cos());
    Mat3([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ])
}

/// Midpoint of the widest empty arc among `angles` on a circle of the given
/// period. Sorts a copy; O(n log n).
fn widest_gap_midpoint(mut angles: Vec<f64>, period: f64) -> f64 {
    if angles.is_empty() {
        return 0.0;
    }
    for a in angles.iter_mut() {
        *a = a.rem_euclid(period);
    }
    angles.sort_by(|a, b| a.total_cmp(b));
    let n = angles.len();
    let mut best = (angles[0] + period - angles[n - 1], angles[n - 1]);
    for w in angles.windows(2) {
        let gap = w[1] - w[0];
        if gap > best.0 {
            best = (gap, w[0]);
        }
    }
    (best.1 + 0.5 * best.0).rem_euclid(period)
}

fn directions<'a>(loops: &'a [&'a PolylineLoop], rot: &'a Mat3) -> impl Iterator<Item = Vec3> + 'a {
    loops.iter().flat_map(move |l| l.segments().map(move |(a, b)| rot.mul_vec(b - a)))
}

/// Projection frame as a rotation taking model coordinates to frame
/// coordinates; project by dropping the third component.
pub fn regular_projection_frame<R: Rng>(loop1: &PolylineLoop, loop2: &PolylineLoop, rng: &mut R) -> Mat3 {
    let both = [loop1, loop2];
    let base = random_rotation(rng);

    // keep projected directions away from multiples of a quarter turn
    let angles: Vec<f64> =
        directions(&both, &base).filter(|d| d.x != 0.0 || d.y != 0.0).map(|d| d.y.atan2(d.x)).collect();
    let about_z = Mat3::rotation_z(-widest_gap_midpoint(angles, FRAC_PI_2));
    let frame = about_z.mul_mat(&base);

    // keep directions away from the viewing axis: the angle from +z within
    // the xz plane must avoid multiples of a half turn
    let angles: Vec<f64> =
        directions(&both, &frame).filter(|d| d.x != 0.0 || d.z != 0.0).map(|d| d.x.atan2(d.z)).collect();
    let about_y = Mat3::rotation_y(-widest_gap_midpoint(angles, PI));
    about_y.mul_mat(&frame)
}

#[inline]
fn c2(p: Vec3) -> Coord<f64> {
    Coord { x: p.x, y: p.y }
}

#[inline]
fn sgn(v: f64) -> i32 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

enum Cross {
    None,
    Sign(i64),
    Degenerate,
}

/// Classify projected segment `l0 -> l1` (first loop) against `k0 -> k1`.
#[inline]
fn classify(l0: Vec3, l1: Vec3, k0: Vec3, k1: Vec3) -> Cross {
    let o1 = orient2d(c2(l0), c2(l1), c2(k0));
    let o2 = orient2d(c2(l0), c2(l1), c2(k1));
    let (s1, s2) = (sgn(o1), sgn(o2));
    if s1 * s2 > 0 {
        return Cross::None;
    }
    let o3 = orient2d(c2(k0), c2(k1), c2(l0));
    let o4 = orient2d(c2(k0), c2(k1), c2(l1));
    let (s3, s4) = (sgn(o3), sgn(o4));
    if s3 * s4 > 0 {
        return Cross::None;
    }
    if s1 == 0 && s2 == 0 {
        // collinear: touching iff the 1D extents overlap
        let bl = Aabb::from_point(Vec3::new(l0.x, l0.y, 0.0)).include(Vec3::new(l1.x, l1.y, 0.0));
        let bk = Aabb::from_point(Vec3::new(k0.x, k0.y, 0.0)).include(Vec3::new(k1.x, k1.y, 0.0));
        return if bl.overlaps(&bk) { Cross::Degenerate } else { Cross::None };
    }
    if s1 == 0 || s2 == 0 || s3 == 0 || s4 == 0 {
        return Cross::Degenerate;
    }
    // proper crossing; depth of each strand at the crossing point
    let t = o1 / (o1 - o2);
    let s = o3 / (o3 - o4);
    let zl = l0.z + s * (l1.z - l0.z);
    let zk = k0.z + t * (k1.z - k0.z);
    if zl == zk || !zl.is_finite() || !zk.is_finite() {
        return Cross::Degenerate;
    }
    // sign of dl x dk equals the side of k1 relative to line l
    let turn = s2 as i64;
    Cross::Sign(if zl > zk { turn } else { -turn })
}

/// Signed crossing sum of the two loops after rotating into `frame`.
pub fn count_in_frame(loop1: &PolylineLoop, loop2: &PolylineLoop, frame: &Mat3, bvh_threshold: usize) -> FrameCount {
    let l: Vec<Vec3> = loop1.vertices().iter().map(|&p| frame.mul_vec(p)).collect();
    let k: Vec<Vec3> = loop2.vertices().iter().map(|&p| frame.mul_vec(p)).collect();
    let (nl, nk) = (l.len(), k.len());
    let seg = |v: &[Vec3], i: usize| (v[i], v[if i + 1 == v.len() { 0 } else { i + 1 }]);
    let flat_box = |a: Vec3, b: Vec3| {
        Aabb::new(Vec3::new(a.x.min(b.x), a.y.min(b.y), 0.0), Vec3::new(a.x.max(b.x), a.y.max(b.y), 0.0))
    };

    let mut sum = 0i64;
    let mut degenerate = false;
    let mut visit = |j: usize, k0: Vec3, k1: Vec3, sum: &mut i64| {
        let (l0, l1) = seg(&l, j);
        match classify(l0, l1, k0, k1) {
            Cross::None => {}
            Cross::Sign(s) => *sum += s,
            Cross::Degenerate => degenerate = true,
        }
    };

    if (nl + nk) / 2 > bvh_threshold {
        let boxes: Vec<Aabb> = (0..nl)
            .map(|j| {
                let (a, b) = seg(&l, j);
                flat_box(a, b)
            })
            .collect();
        let tree = BvhTree::build(boxes, 4);
        for i in 0..nk {
            let (k0, k1) = seg(&k, i);
            tree.query(&flat_box(k0, k1), |j| visit(j, k0, k1, &mut sum));
        }
    } else {
        let lboxes: Vec<Aabb> = (0..nl)
            .map(|j| {
                let (a, b) = seg(&l, j);
                flat_box(a, b)
            })
            .collect();
        for i in 0..nk {
            let (k0, k1) = seg(&k, i);
            let kb = flat_box(k0, k1);
            for (j, lb) in lboxes.iter().enumerate() {
                if lb.overlaps(&kb) {
                    visit(j, k0, k1, &mut sum);
                }
            }
        }
    }
    if degenerate {
        FrameCount::Degenerate
    } else {
        FrameCount::Signed(sum)
    }
}

pub fn link_count_crossings(
    loop1: &PolylineLoop,
    loop2: &PolylineLoop,
    params: &CrossingParams,
) -> Result<CrossingOutcome, KernelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let attempts = params.max_retries.max(1);
    for attempt in 0..attempts {
        let frame = regular_projection_frame(loop1, loop2, &mut rng);
        match count_in_frame(loop1, loop2, &frame, params.bvh_threshold) {
            FrameCount::Signed(sum) => {
                if sum % 2 != 0 {
                    return Err(KernelError::OddCrossingSum(sum));
                }
                return Ok(CrossingOutcome { linking: sum / 2, retries: attempt });
            }
            FrameCount::Degenerate => continue,
        }
    }
    Err(KernelError::DegenerateProjection { attempts })
}
