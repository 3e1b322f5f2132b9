//! Curve and loop representations.
//!
//! A [`CurveModel`] is an ordered list of closed loops, each a chain of
//! straight or cubic segments. A [`PolylineLoop`] is the straight-segment
//! form the linking kernels consume.

use crate::geom::{Aabb, Mat3, Vec3};
use thiserror::Error;

/// Absolute endpoint-continuity tolerance, in units of the model scale `xi`.
pub const CONTINUITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("loop {loop_index}: {reason}")]
    InvalidLoop { loop_index: usize, reason: String },
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
    #[error("non-finite coordinate in loop {0}")]
    NonFinite(usize),
    #[error("invalid polyline: {0}")]
    InvalidPolyline(String),
    #[error("catmull-rom: {0}")]
    CatmullRom(String),
}

/// A cubic `p(t) = a0 + a1 t + a2 t^2 + a3 t^3` restricted to `[t_lo, t_hi]`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CubicSegment {
    pub coeffs: [Vec3; 4],
    pub t_lo: f64,
    pub t_hi: f64,
}

impl CubicSegment {
    pub fn new(coeffs: [Vec3; 4], t_lo: f64, t_hi: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&t_lo) || !(0.0..=1.0).contains(&t_hi) || t_lo >= t_hi {
            return Err(ModelError::InvalidSegment(format!(
                "parameter domain [{t_lo}, {t_hi}] must satisfy 0 <= lo < hi <= 1"
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(ModelError::InvalidSegment("non-finite coefficient".into()));
        }
        Ok(CubicSegment { coeffs, t_lo, t_hi })
    }

    /// The straight segment `a -> b` written as a cubic on `[0, 1]`.
    pub fn from_line(a: Vec3, b: Vec3) -> Self {
        CubicSegment { coeffs: [a, b - a, Vec3::ZERO, Vec3::ZERO], t_lo: 0.0, t_hi: 1.0 }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> Vec3 {
        let [a0, a1, a2, a3] = self.coeffs;
        a0 + (a1 + (a2 + a3 * t) * t) * t
    }

    #[inline]
    pub fn derivative(&self, t: f64) -> Vec3 {
        let [_, a1, a2, a3] = self.coeffs;
        a1 + (a2 * 2.0 + a3 * (3.0 * t)) * t
    }

    pub fn start(&self) -> Vec3 {
        self.eval(self.t_lo)
    }

    pub fn end(&self) -> Vec3 {
        self.eval(self.t_hi)
    }

    /// Upper bound on `|p'(t)|` over `[0, 1]`.
    pub fn speed_bound(&self) -> f64 {
        let [_, a1, a2, a3] = self.coeffs;
        a1.norm() + 2.0 * a2.norm() + 3.0 * a3.norm()
    }

    /// Exact per-axis extent of the curve over its domain: the endpoints plus
    /// every interior critical point of each coordinate polynomial.
    pub fn tight_aabb(&self) -> Aabb {
        let mut b = Aabb::from_point(self.eval(self.t_lo)).include(self.eval(self.t_hi));
        for axis in 0..3 {
            // d/dt of the axis coordinate: a1 + 2 a2 t + 3 a3 t^2
            let c1 = self.coeffs[1][axis];
            let c2 = 2.0 * self.coeffs[2][axis];
            let c3 = 3.0 * self.coeffs[3][axis];
            for t in quadratic_roots(c3, c2, c1) {
                if t > self.t_lo && t < self.t_hi {
                    b = b.include(self.eval(t));
                }
            }
        }
        b
    }

    /// Halve the parameter domain; coefficients are shared.
    pub fn split(&self) -> (CubicSegment, CubicSegment) {
        let mid = 0.5 * (self.t_lo + self.t_hi);
        (
            CubicSegment { coeffs: self.coeffs, t_lo: self.t_lo, t_hi: mid },
            CubicSegment { coeffs: self.coeffs, t_lo: mid, t_hi: self.t_hi },
        )
    }

    /// Same point set traversed backwards, over the same domain.
    pub fn reversed(&self) -> CubicSegment {
        let [a0, a1, a2, a3] = self.coeffs;
        let c = self.t_lo + self.t_hi;
        CubicSegment {
            coeffs: [
                a0 + a1 * c + a2 * (c * c) + a3 * (c * c * c),
                -(a1 + a2 * (2.0 * c) + a3 * (3.0 * c * c)),
                a2 + a3 * (3.0 * c),
                -a3,
            ],
            t_lo: self.t_lo,
            t_hi: self.t_hi,
        }
    }

    pub fn transformed(&self, rot: &Mat3, shift: Vec3) -> CubicSegment {
        let [a0, a1, a2, a3] = self.coeffs;
        CubicSegment {
            coeffs: [rot.mul_vec(a0) + shift, rot.mul_vec(a1), rot.mul_vec(a2), rot.mul_vec(a3)],
            t_lo: self.t_lo,
            t_hi: self.t_hi,
        }
    }
}

/// Real roots of `a t^2 + b t + c`, degenerating gracefully to the linear case.
fn quadratic_roots(a: f64, b: f64, c: f64) -> impl Iterator<Item = f64> {
    let mut out = [f64::NAN; 2];
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        // constant coordinate
    } else if a.abs() <= 1e-14 * scale {
        if b != 0.0 {
            out[0] = -c / b;
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            // numerically stable form
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            out[0] = q / a;
            if q != 0.0 {
                out[1] = c / q;
            }
        }
    }
    out.into_iter().filter(|t| t.is_finite())
}

/// One piece of a loop: a straight chord or a cubic arc.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Segment {
    Line { start: Vec3, end: Vec3 },
    Cubic(CubicSegment),
}

impl Segment {
    pub fn start(&self) -> Vec3 {
        match self {
            Segment::Line { start, .. } => *start,
            Segment::Cubic(c) => c.start(),
        }
    }

    pub fn end(&self) -> Vec3 {
        match self {
            Segment::Line { end, .. } => *end,
            Segment::Cubic(c) => c.end(),
        }
    }

    pub fn tight_aabb(&self) -> Aabb {
        match self {
            Segment::Line { start, end } => Aabb::from_point(*start).include(*end),
            Segment::Cubic(c) => c.tight_aabb(),
        }
    }

    /// Split in half: cubics by parameter domain, lines at the midpoint.
    pub fn split(&self) -> (Segment, Segment) {
        match self {
            Segment::Line { start, end } => {
                let mid = start.lerp(*end, 0.5);
                (Segment::Line { start: *start, end: mid }, Segment::Line { start: mid, end: *end })
            }
            Segment::Cubic(c) => {
                let (a, b) = c.split();
                (Segment::Cubic(a), Segment::Cubic(b))
            }
        }
    }

    /// Point at local parameter `u` in `[0, 1]`.
    pub fn point_at(&self, u: f64) -> Vec3 {
        match self {
            Segment::Line { start, end } => start.lerp(*end, u),
            Segment::Cubic(c) => c.eval(c.t_lo + u * (c.t_hi - c.t_lo)),
        }
    }

    /// Whether the domain can still be halved into two non-empty pieces.
    pub fn splittable(&self) -> bool {
        match self {
            Segment::Line { start, end } => {
                let mid = start.lerp(*end, 0.5);
                mid != *start && mid != *end
            }
            Segment::Cubic(c) => {
                let mid = 0.5 * (c.t_lo + c.t_hi);
                mid > c.t_lo && mid < c.t_hi
            }
        }
    }

    pub fn reversed(&self) -> Segment {
        match self {
            Segment::Line { start, end } => Segment::Line { start: *end, end: *start },
            Segment::Cubic(c) => Segment::Cubic(c.reversed()),
        }
    }

    pub fn transformed(&self, rot: &Mat3, shift: Vec3) -> Segment {
        match self {
            Segment::Line { start, end } => {
                Segment::Line { start: rot.mul_vec(*start) + shift, end: rot.mul_vec(*end) + shift }
            }
            Segment::Cubic(c) => Segment::Cubic(c.transformed(rot, shift)),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Segment::Line { start, end } => start.is_finite() && end.is_finite(),
            Segment::Cubic(c) => c.coeffs.iter().all(|v| v.is_finite()),
        }
    }
}

/// An ordered chain of segments, closed or open.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopGeometry {
    pub segments: Vec<Segment>,
    pub closed: bool,
}

impl LoopGeometry {
    /// A closed loop of straight segments through `points` (wrapping).
    pub fn closed_polyline(points: &[Vec3]) -> Self {
        let n = points.len();
        let segments = (0..n).map(|i| Segment::Line { start: points[i], end: points[(i + 1) % n] }).collect();
        LoopGeometry { segments, closed: true }
    }

    /// An open chain of straight segments through `points`.
    pub fn open_polyline(points: &[Vec3]) -> Self {
        let segments = points.windows(2).map(|w| Segment::Line { start: w[0], end: w[1] }).collect();
        LoopGeometry { segments, closed: false }
    }

    pub fn closed_cubics(cubics: Vec<CubicSegment>) -> Self {
        LoopGeometry { segments: cubics.into_iter().map(Segment::Cubic).collect(), closed: true }
    }

    pub fn aabb(&self) -> Aabb {
        self.segments.iter().fold(Aabb::EMPTY, |b, s| b.union(s.tight_aabb()))
    }

    pub fn start(&self) -> Vec3 {
        self.segments[0].start()
    }

    pub fn end(&self) -> Vec3 {
        self.segments[self.segments.len() - 1].end()
    }

    pub fn reversed(&self) -> LoopGeometry {
        LoopGeometry { segments: self.segments.iter().rev().map(Segment::reversed).collect(), closed: self.closed }
    }

    pub fn transformed(&self, rot: &Mat3, shift: Vec3) -> LoopGeometry {
        LoopGeometry {
            segments: self.segments.iter().map(|s| s.transformed(rot, shift)).collect(),
            closed: self.closed,
        }
    }

    /// Shared-endpoint check between consecutive segments (and the wrap when
    /// closed), with absolute tolerance `tol`.
    pub fn check_continuity(&self, tol: f64) -> Result<(), String> {
        let n = self.segments.len();
        let links = if self.closed { n } else { n.saturating_sub(1) };
        for k in 0..links {
            let a = self.segments[k].end();
            let b = self.segments[(k + 1) % n].start();
            if (a - b).norm() > tol {
                return Err(if k + 1 == n {
                    format!("closed loop does not return to its start (gap {:e})", (a - b).norm())
                } else {
                    format!("segments {k} and {} do not share an endpoint (gap {:e})", k + 1, (a - b).norm())
                });
            }
        }
        Ok(())
    }

    fn control_points(&self) -> impl Iterator<Item = Vec3> + '_ {
        let tail = if self.closed { None } else { Some(self.end()) };
        self.segments.iter().map(Segment::start).chain(tail)
    }
}

/// Mean of `|x|, |y|, |z|` over a set of points; the model's length scale.
pub fn mean_abs_coordinate<I: IntoIterator<Item = Vec3>>(pts: I) -> f64 {
    let (sum, count) = pts.into_iter().fold((0.0, 0usize), |(s, n), p| (s + p.x.abs() + p.y.abs() + p.z.abs(), n + 3));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// A validated collection of closed loops.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveModel {
    loops: Vec<LoopGeometry>,
    xi: f64,
}

impl CurveModel {
    pub fn new(loops: Vec<LoopGeometry>) -> Result<Self, ModelError> {
        for (i, l) in loops.iter().enumerate() {
            if !l.segments.iter().all(Segment::is_finite) {
                return Err(ModelError::NonFinite(i));
            }
            if !l.closed {
                return Err(ModelError::InvalidLoop {
                    loop_index: i,
                    reason: "open loops are only accepted as braid strands".into(),
                });
            }
            if l.segments.len() < 3 {
                return Err(ModelError::InvalidLoop {
                    loop_index: i,
                    reason: format!("closed loop needs at least 3 segments, got {}", l.segments.len()),
                });
            }
        }
        let xi = mean_abs_coordinate(loops.iter().flat_map(|l| l.control_points()));
        if !loops.is_empty() && !(xi > 0.0) {
            return Err(ModelError::InvalidLoop {
                loop_index: 0,
                reason: "model scale is zero (all control points at the origin)".into(),
            });
        }
        let tol = CONTINUITY_TOL * xi;
        for (i, l) in loops.iter().enumerate() {
            l.check_continuity(tol).map_err(|reason| ModelError::InvalidLoop { loop_index: i, reason })?;
        }
        Ok(CurveModel { loops, xi })
    }

    pub fn from_polylines(loops: &[PolylineLoop]) -> Result<Self, ModelError> {
        CurveModel::new(loops.iter().map(|p| LoopGeometry::closed_polyline(p.vertices())).collect())
    }

    pub fn loops(&self) -> &[LoopGeometry] {
        &self.loops
    }

    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    /// Average coordinate magnitude over all control points.
    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn segment_count(&self) -> usize {
        self.loops.iter().map(|l| l.segments.len()).sum()
    }

    pub fn into_loops(self) -> Vec<LoopGeometry> {
        self.loops
    }
}

/// A closed polyline: segment `i` runs from vertex `i` to vertex `i + 1`,
/// wrapping at the end.
#[derive(Clone, Debug, PartialEq)]
pub struct PolylineLoop {
    vertices: Vec<Vec3>,
}

impl PolylineLoop {
    pub fn new(vertices: Vec<Vec3>) -> Result<Self, ModelError> {
        if vertices.len() < 3 {
            return Err(ModelError::InvalidPolyline(format!("need at least 3 vertices, got {}", vertices.len())));
        }
        if let Some(k) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::InvalidPolyline(format!("vertex {k} is not finite")));
        }
        let xi = mean_abs_coordinate(vertices.iter().copied());
        let min_len = f64::EPSILON * xi;
        let n = vertices.len();
        for i in 0..n {
            if (vertices[(i + 1) % n] - vertices[i]).norm() <= min_len {
                return Err(ModelError::InvalidPolyline(format!("segment {i} has zero length")));
            }
        }
        Ok(PolylineLoop { vertices })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_vertices_unchecked(vertices: Vec<Vec3>) -> Self {
        PolylineLoop { vertices }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    #[inline]
    pub fn segment(&self, i: usize) -> (Vec3, Vec3) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[if i + 1 == n { 0 } else { i + 1 }])
    }

    pub fn segments(&self) -> impl Iterator<Item = (Vec3, Vec3)> + '_ {
        (0..self.vertices.len()).map(move |i| self.segment(i))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter().copied())
    }

    /// Same loop traversed in the opposite direction.
    pub fn reversed(&self) -> PolylineLoop {
        let mut v = self.vertices.clone();
        v.reverse();
        PolylineLoop { vertices: v }
    }

    /// Apply `p -> rot * p + shift` to every vertex.
    pub fn transformed(&self, rot: &Mat3, shift: Vec3) -> PolylineLoop {
        PolylineLoop { vertices: self.vertices.iter().map(|&p| rot.mul_vec(p) + shift).collect() }
    }

    /// Insert the midpoint of every segment.
    pub fn midpoint_refined(&self) -> PolylineLoop {
        let vertices = self.segments().flat_map(|(a, b)| [a, a.lerp(b, 0.5)]).collect();
        PolylineLoop { vertices }
    }
}
