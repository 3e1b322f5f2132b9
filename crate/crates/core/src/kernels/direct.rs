//! Exact linking number of two closed polylines by direct summation of the
//! per-segment-pair signed solid angle.

use crate::geom::Vec3;
use crate::model::PolylineLoop;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectVariant {
    /// Two `atan2` per segment pair.
    PerPairAtan,
    /// Complex-phase accumulation with one `atan2` per outer segment.
    #[default]
    AngleSum,
}

/// Outer segments per parallel work item. Fixed so the summation order, and
/// therefore the result, does not depend on the thread count.
const CHUNK: usize = 64;

#[inline(always)]
fn pair_terms(lj: Vec3, lj1: Vec3, ki: Vec3, ki1: Vec3) -> (f64, f64, f64) {
    let a = lj - ki;
    let b = lj - ki1;
    let c = lj1 - ki1;
    let d = lj1 - ki;
    let (na, nb, nc, nd) = (a.norm(), b.norm(), c.norm(), d.norm());
    // a . (b x c) == c . (d x a), so one triple product serves both angles
    let p = a.dot(b.cross(c));
    let ac = c.dot(a);
    let d1 = na * nb * nc + a.dot(b) * nc + b.dot(c) * na + ac * nb;
    let d2 = na * nd * nc + a.dot(d) * nc + d.dot(c) * na + ac * nd;
    (p, d1, d2)
}

/// Contribution of segment `l_j -> l_j1` (first loop) against `k_i -> k_i1`
/// (second loop). NaN only for intersecting or degenerate segments.
#[inline]
pub fn segment_pair_lambda(lj: Vec3, lj1: Vec3, ki: Vec3, ki1: Vec3) -> f64 {
    let (p, d1, d2) = pair_terms(lj, lj1, ki, ki1);
    (p.atan2(d1) + p.atan2(d2)) / TAU
}

/// Real-valued linking number; rounds to the integer invariant.
pub fn link_direct(loop1: &PolylineLoop, loop2: &PolylineLoop, variant: DirectVariant) -> f64 {
    let l = loop1.vertices();
    let k = loop2.vertices();
    let nk = k.len();
    let partials: Vec<f64> = (0..nk.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let range = c * CHUNK..((c + 1) * CHUNK).min(nk);
            range
                .map(|i| {
                    let (ki, ki1) = loop2.segment(i);
                    match variant {
                        DirectVariant::PerPairAtan => per_pair_row(l, ki, ki1),
                        DirectVariant::AngleSum => angle_sum_row(l, ki, ki1),
                    }
                })
                .sum::<f64>()
        })
        .collect();
    partials.iter().sum()
}

/// Streams `(p, d1, d2)` for every segment of `l` against `ki -> ki1`.
///
/// Consecutive pairs share two of their four difference vectors, so each
/// step computes only the two new ones.
#[inline(always)]
fn for_each_pair_terms<F: FnMut(f64, f64, f64)>(l: &[Vec3], ki: Vec3, ki1: Vec3, mut f: F) {
    let n = l.len();
    let mut u = l[0] - ki;
    let mut w = l[0] - ki1;
    let (mut nu, mut nw) = (u.norm(), w.norm());
    let mut uw = u.dot(w);
    for j in 0..n {
        let next = l[if j + 1 == n { 0 } else { j + 1 }];
        // a = u, b = w, c = w', d = u'
        let u1 = next - ki;
        let w1 = next - ki1;
        let (nu1, nw1) = (u1.norm(), w1.norm());
        let uw1 = u1.dot(w1);
        let p = u.dot(w.cross(w1));
        let ac = w1.dot(u);
        let d1 = nu * nw * nw1 + uw * nw1 + w.dot(w1) * nu + ac * nw;
        let d2 = nu * nu1 * nw1 + u.dot(u1) * nw1 + uw1 * nu + ac * nu1;
        f(p, d1, d2);
        (u, w, nu, nw, uw) = (u1, w1, nu1, nw1, uw1);
    }
}

fn per_pair_row(l: &[Vec3], ki: Vec3, ki1: Vec3) -> f64 {
    let mut acc = 0.0;
    for_each_pair_terms(l, ki, ki1, |p, d1, d2| acc += (p.atan2(d1) + p.atan2(d2)) / TAU);
    acc
}

/// +1 in the closed upper half plane minus the non-negative x axis.
#[inline(always)]
fn half_plane(x: f64, y: f64) -> f64 {
    if y > 0.0 || (y == 0.0 && x < 0.0) {
        1.0
    } else {
        -1.0
    }
}

/// Sum over `j` of the pair angles for one outer segment, counted in turns.
///
/// Each pair's angle is the argument of `(d1 + i p)(d2 + i p)`. The running
/// product is kept normalized, and every time it (or a pair factor) wraps past
/// the negative real axis a whole turn is added explicitly, so only the final
/// residual angle needs an `atan2`.
fn angle_sum_row(l: &[Vec3], ki: Vec3, ki1: Vec3) -> f64 {
    let (mut xs, mut ys) = (1.0f64, 0.0f64);
    let mut s_run = -1.0f64;
    let mut turns = 0.0f64;
    for_each_pair_terms(l, ki, ki1, |p, d1, d2| {
        let x1 = d1 * d2 - p * p;
        let y1 = p * (d1 + d2);
        let s1 = half_plane(d1, p);
        let s2 = half_plane(d2, p);
        let s12 = half_plane(x1, y1);
        if s1 * s2 > 0.0 && s1 * s12 < 0.0 {
            turns += s1;
        }
        let x2 = xs * x1 - ys * y1;
        let y2 = xs * y1 + ys * x1;
        let s_new = half_plane(x2, y2);
        if s12 * s_run > 0.0 && s_new * s_run < 0.0 {
            turns += s_run;
        }
        s_run = s_new;
        let scale = x2.abs().max(y2.abs());
        xs = x2 / scale;
        ys = y2 / scale;
    });
    turns + ys.atan2(xs) / TAU
}
