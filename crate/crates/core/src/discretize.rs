//! Adaptive, link-homotopy-preserving conversion of spline loops to polylines.
//!
//! Each pass builds a BVH over every loop's unprocessed pieces, marks pieces
//! whose tight boxes overlap a piece of a paired loop, halves the marked
//! pieces for the next pass and replaces every unmarked piece by its chord.
//! A chord and its arc both lie in the arc's box, and that box touches no box
//! of any partner loop, so the straightening never moves one loop through
//! another.

use crate::bvh::BvhTree;
use crate::geom::Aabb;
use crate::model::{CurveModel, PolylineLoop, Segment};
use crate::pls::PairList;
use rayon::prelude::*;
use std::fmt;

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct DiscretizationParams {
    /// Relative length threshold; boxes smaller than `epsilon * xi` abort.
    pub epsilon: f64,
    pub max_passes: usize,
}

impl Default for DiscretizationParams {
    fn default() -> Self {
        DiscretizationParams { epsilon: f64::EPSILON, max_passes: 64 }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DiscretizationErrorKind {
    ZeroLengthInput,
    CurvesIntersect,
    PassLimitExceeded,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscretizationError {
    pub kind: DiscretizationErrorKind,
    /// Offending loops; exactly two (ascending) for `CurvesIntersect`.
    pub loops: Vec<usize>,
    /// Passes started before the error was raised.
    pub passes: usize,
}

impl fmt::Display for DiscretizationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DiscretizationErrorKind::ZeroLengthInput => {
                write!(f, "Input has zero-length segments (loop {:?}).", self.loops)
            }
            DiscretizationErrorKind::CurvesIntersect => {
                write!(f, "Curves {} and {} intersect.", self.loops[0], self.loops[1])
            }
            DiscretizationErrorKind::PassLimitExceeded => {
                write!(f, "discretization did not converge within {} passes (loops {:?})", self.passes, self.loops)
            }
        }
    }
}

impl std::error::Error for DiscretizationError {}

#[derive(Clone, Debug)]
pub struct Discretization {
    pub loops: Vec<PolylineLoop>,
    /// Refinement passes run; zero when no loop needed any.
    pub passes: usize,
}

impl Discretization {
    pub fn segment_count(&self) -> usize {
        self.loops.iter().map(PolylineLoop::len).sum()
    }
}

#[derive(Clone, Debug)]
struct Piece {
    source: usize,
    u_lo: f64,
    u_hi: f64,
    seg: Segment,
    bounds: Aabb,
}

impl Piece {
    fn halves(&self) -> (Piece, Piece) {
        let (a, b) = self.seg.split();
        let mid = 0.5 * (self.u_lo + self.u_hi);
        (
            Piece { source: self.source, u_lo: self.u_lo, u_hi: mid, seg: a, bounds: a.tight_aabb() },
            Piece { source: self.source, u_lo: mid, u_hi: self.u_hi, seg: b, bounds: b.tight_aabb() },
        )
    }
}

enum LoopStep {
    Ok { pending: Vec<Piece>, done: Vec<Piece> },
    Intersect(usize),
}

pub fn discretize(
    model: &CurveModel,
    pairs: &PairList,
    params: &DiscretizationParams,
) -> Result<Discretization, DiscretizationError> {
    let n = model.len();
    let min_diameter = params.epsilon * model.xi();

    let initial: Vec<Result<Vec<Piece>, usize>> = model
        .loops()
        .par_iter()
        .enumerate()
        .map(|(i, l)| {
            l.segments
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let bounds = s.tight_aabb();
                    if bounds.diameter() < min_diameter {
                        Err(i)
                    } else {
                        Ok(Piece { source: k, u_lo: 0.0, u_hi: 1.0, seg: *s, bounds })
                    }
                })
                .collect()
        })
        .collect();

    let mut partners: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j) in pairs.iter() {
        partners[i].push(j);
        partners[j].push(i);
    }
    for p in &mut partners {
        p.sort_unstable();
        p.dedup();
    }

    let mut pending: Vec<Vec<Piece>> = Vec::with_capacity(n);
    let mut done: Vec<Vec<Piece>> = Vec::with_capacity(n);
    for (i, r) in initial.into_iter().enumerate() {
        let pieces = r.map_err(|i| DiscretizationError {
            kind: DiscretizationErrorKind::ZeroLengthInput,
            loops: vec![i],
            passes: 0,
        })?;
        if partners[i].is_empty() {
            pending.push(Vec::new());
            done.push(pieces);
        } else {
            pending.push(pieces);
            done.push(Vec::new());
        }
    }

    let mut passes = 0;
    while pending.iter().any(|p| !p.is_empty()) {
        if passes == params.max_passes {
            return Err(DiscretizationError {
                kind: DiscretizationErrorKind::PassLimitExceeded,
                loops: (0..n).filter(|&i| !pending[i].is_empty()).collect(),
                passes,
            });
        }
        passes += 1;

        let trees: Vec<Option<BvhTree>> = pending
            .par_iter()
            .map(|p| (!p.is_empty()).then(|| BvhTree::build(p.iter().map(|q| q.bounds).collect(), 4)))
            .collect();

        let steps: Vec<LoopStep> = pending
            .par_iter()
            .enumerate()
            .map(|(i, current)| {
                let Some(tree) = trees[i].as_ref() else {
                    return LoopStep::Ok { pending: Vec::new(), done: Vec::new() };
                };
                let mut marked: Vec<Option<usize>> = vec![None; current.len()];
                for &j in &partners[i] {
                    if let Some(other) = trees[j].as_ref() {
                        tree.for_each_intersecting_pair(other, |a, _| {
                            marked[a].get_or_insert(j);
                        });
                    }
                }
                let mut next = Vec::new();
                let mut finished = Vec::new();
                for (piece, mark) in current.iter().zip(&marked) {
                    match *mark {
                        Some(j) => {
                            if !piece.seg.splittable() {
                                return LoopStep::Intersect(j);
                            }
                            let (a, b) = piece.halves();
                            if a.bounds.diameter() < min_diameter || b.bounds.diameter() < min_diameter {
                                return LoopStep::Intersect(j);
                            }
                            next.push(a);
                            next.push(b);
                        }
                        None => finished.push(piece.clone()),
                    }
                }
                LoopStep::Ok { pending: next, done: finished }
            })
            .collect();

        for (i, step) in steps.into_iter().enumerate() {
            match step {
                LoopStep::Ok { pending: p, done: d } => {
                    pending[i] = p;
                    done[i].extend(d);
                }
                LoopStep::Intersect(j) => {
                    return Err(DiscretizationError {
                        kind: DiscretizationErrorKind::CurvesIntersect,
                        loops: vec![i.min(j), i.max(j)],
                        passes,
                    });
                }
            }
        }
    }

    let loops = done
        .into_par_iter()
        .map(|mut pieces| {
            pieces.sort_by(|a, b| (a.source, a.u_lo).partial_cmp(&(b.source, b.u_lo)).unwrap());
            PolylineLoop::from_vertices_unchecked(pieces.iter().map(|p| p.seg.start()).collect())
        })
        .collect();
    Ok(Discretization { loops, passes })
}

/// Chord discretization with `per_segment` equal parameter steps per input
/// segment, ignoring proximity. Used as a reference discretization.
pub fn uniform_discretize(model: &CurveModel, per_segment: usize) -> Vec<PolylineLoop> {
    let per_segment = per_segment.max(1);
    model
        .loops()
        .iter()
        .map(|l| {
            let vertices = l
                .segments
                .iter()
                .flat_map(|s| (0..per_segment).map(move |k| s.point_at(k as f64 / per_segment as f64)))
                .collect();
            PolylineLoop::from_vertices_unchecked(vertices)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::model::LoopGeometry;
    use crate::pls::{potential_link_search, PairSet};
    use crate::spline::catmull_rom_to_cubics;
    use std::f64::consts::TAU;

    fn ring(center: Vec3, u: Vec3, v: Vec3, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|k| {
                let a = TAU * k as f64 / n as f64;
                center + u * a.cos() + v * a.sin()
            })
            .collect()
    }

    #[test]
    fn separated_polylines_pass_through_unchanged() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.0);
        let a = ring(Vec3::ZERO, x, y, 12);
        let b = ring(Vec3::new(10.0, 0.0, 0.0), x, y, 12);
        let m = CurveModel::new(vec![LoopGeometry::closed_polyline(&a), LoopGeometry::closed_polyline(&b)]).unwrap();
        // force the pair so the refinement loop actually runs
        let pairs = PairList::from_pairs([(0, 1)]);
        let d = discretize(&m, &pairs, &DiscretizationParams::default()).unwrap();
        assert_eq!(d.loops[0].vertices(), &a[..]);
        assert_eq!(d.loops[1].vertices(), &b[..]);
        assert_eq!(d.passes, 1);
    }

    #[test]
    fn touching_loops_report_intersection() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.0);
        let z = Vec3::new(0.0, 0.0, 1.0);
        // second circle passes through (1, 0, 0), a point of the first
        let a = catmull_rom_to_cubics(&ring(Vec3::ZERO, x, y, 8)).unwrap();
        let b = catmull_rom_to_cubics(&ring(Vec3::new(2.0, 0.0, 0.0), x, z, 8)).unwrap();
        let m = CurveModel::new(vec![LoopGeometry::closed_cubics(a), LoopGeometry::closed_cubics(b)]).unwrap();
        let pairs = potential_link_search(&m, &PairSet::new());
        let err = discretize(&m, &pairs, &DiscretizationParams::default()).unwrap_err();
        assert_eq!(err.kind, DiscretizationErrorKind::CurvesIntersect);
        assert_eq!(err.loops, vec![0, 1]);
        assert!(err.passes <= 64);
        assert_eq!(err.to_string(), "Curves 0 and 1 intersect.");
    }

    #[test]
    fn zero_length_segment_rejected() {
        let pts =
            [Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)];
        let m = CurveModel::new(vec![LoopGeometry::closed_polyline(&pts)]).unwrap();
        let err = discretize(&m, &PairList::default(), &DiscretizationParams::default()).unwrap_err();
        assert_eq!(err.kind, DiscretizationErrorKind::ZeroLengthInput);
    }

    #[test]
    fn pass_limit_reported() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.0);
        let z = Vec3::new(0.0, 0.0, 1.0);
        let a = catmull_rom_to_cubics(&ring(Vec3::ZERO, x, y, 8)).unwrap();
        // a small ring threaded tightly around one strand of the other
        let b = catmull_rom_to_cubics(&ring(x, x * 0.1, z * 0.1, 8)).unwrap();
        let m = CurveModel::new(vec![LoopGeometry::closed_cubics(a), LoopGeometry::closed_cubics(b)]).unwrap();
        let params = DiscretizationParams { max_passes: 1, ..Default::default() };
        let err = discretize(&m, &PairList::from_pairs([(0, 1)]), &params).unwrap_err();
        assert_eq!(err.kind, DiscretizationErrorKind::PassLimitExceeded);
    }

    #[test]
    fn unpaired_loops_are_chord_converted() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.0);
        let pts = ring(Vec3::ZERO, x, y, 8);
        let m = CurveModel::new(vec![LoopGeometry::closed_cubics(catmull_rom_to_cubics(&pts).unwrap())]).unwrap();
        let d = discretize(&m, &PairList::default(), &DiscretizationParams::default()).unwrap();
        assert_eq!(d.passes, 0);
        assert_eq!(d.loops[0].vertices(), &pts[..]);
    }
}
