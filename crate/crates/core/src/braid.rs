//! Closing a braid of open curves into virtual loops.
//!
//! Strands run from a left end volume to a right one. Loop `i` follows strand
//! `i`, crosses to strand `i + 1` inside the right volume, runs back along it
//! and returns to strand `i` inside the left volume; the last loop pairs the
//! last strand with the first. Loops that share a strand are excluded from
//! the certificate, and every other pair is certified normally.
//!
//! Connections are three-chord paths: straight up from each endpoint along
//! the volume's outward axis to a plane reserved for that connection, then
//! across. Each connection gets its own plane, so two connections can only
//! meet where a cross chord passes over another connection's endpoint.
//! That case is rejected during validation.

use crate::geom::{Aabb, Mat3, Vec3};
use crate::io::{loop_from_record, CurvesFile};
use crate::model::{CurveModel, LoopGeometry, ModelError, Segment};
use crate::pls::PairSet;
use serde::{Deserialize, Serialize};

pub const MIN_STRANDS: usize = 4;
/// Relative tolerance for rigid end-volume changes.
pub const RIGID_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BraidError {
    #[error("a braid needs at least {MIN_STRANDS} strands, got {0}")]
    TooFewStrands(usize),
    #[error("strand {0} is closed")]
    ClosedStrand(usize),
    #[error("strand {strand}: {reason}")]
    Endpoint { strand: usize, reason: String },
    #[error("invalid end volume: {0}")]
    Volume(String),
    #[error("connections {0} and {1} in the {2} volume intersect")]
    ConnectionsIntersect(usize, usize, &'static str),
    #[error("end volumes changed non-rigidly: {0}")]
    NonRigid(String),
    #[error("template does not match braid: {0}")]
    Template(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Oriented box given by center, half extents along its local axes, and the
/// local axes as the rows of `basis`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndVolume {
    pub center: Vec3,
    pub half_extents: Vec3,
    pub basis: Mat3,
    /// Unit direction pointing away from the braid's interior.
    pub outward: Vec3,
}

impl EndVolume {
    pub fn from_aabb(b: Aabb, outward: Vec3) -> Self {
        EndVolume { center: b.center(), half_extents: b.extent() * 0.5, basis: Mat3::IDENTITY, outward }
    }

    fn validate(&self) -> Result<(), BraidError> {
        let bad = |m: &str| Err(BraidError::Volume(m.into()));
        if !(self.center.is_finite() && self.half_extents.is_finite() && self.outward.is_finite()) {
            return bad("non-finite value");
        }
        if (0..3).any(|k| self.half_extents[k] <= 0.0) {
            return bad("half extents must be positive");
        }
        if (self.outward.norm() - 1.0).abs() > 1e-9 {
            return bad("outward axis must be a unit vector");
        }
        let b = &self.basis;
        if b.mul_mat(&b.transpose()).max_abs_diff(&Mat3::IDENTITY) > 1e-9 || b.determinant() < 0.0 {
            return bad("basis must be a rotation");
        }
        Ok(())
    }

    fn local(&self, p: Vec3) -> Vec3 {
        self.basis.mul_vec(p - self.center)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let q = self.local(p);
        let slack = 1e-12 * self.half_extents.norm();
        (0..3).all(|k| q[k].abs() <= self.half_extents[k] + slack)
    }

    fn height(&self, p: Vec3) -> f64 {
        (p - self.center).dot(self.outward)
    }

    /// Largest height of any point of the box along the outward axis.
    fn top(&self) -> f64 {
        (0..3).map(|k| self.half_extents[k] * self.basis.row(k).dot(self.outward).abs()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BraidModel {
    /// Open strands, each running from the left volume to the right one.
    pub curves: Vec<LoopGeometry>,
    pub left: EndVolume,
    pub right: EndVolume,
}

/// Everything needed to reattach identical connections after the strands
/// deform: the volumes used, and the two lifted rail points of every
/// connection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureTemplate {
    pub left: EndVolume,
    pub right: EndVolume,
    pub left_rails: Vec<[Vec3; 2]>,
    pub right_rails: Vec<[Vec3; 2]>,
    /// Strands that were reversed to run left to right.
    pub reversed: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct ClosedBraid {
    pub model: CurveModel,
    pub excluded: PairSet,
    pub template: ClosureTemplate,
}

/// Loop pairs that share a strand.
pub fn braid_excluded_pairs(strands: usize) -> PairSet {
    let mut s: PairSet = (0..strands.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    if strands >= 2 {
        s.insert((0, strands - 1));
    }
    s
}

/// Validates the strands and orients each one left to right.
fn oriented_strands(b: &BraidModel) -> Result<(Vec<LoopGeometry>, Vec<bool>), BraidError> {
    if b.curves.len() < MIN_STRANDS {
        return Err(BraidError::TooFewStrands(b.curves.len()));
    }
    b.left.validate()?;
    b.right.validate()?;
    let mut out = Vec::with_capacity(b.curves.len());
    let mut flipped = Vec::with_capacity(b.curves.len());
    for (i, c) in b.curves.iter().enumerate() {
        if c.closed {
            return Err(BraidError::ClosedStrand(i));
        }
        let (s, e) = (c.start(), c.end());
        let c = if b.left.contains(s) && b.right.contains(e) {
            flipped.push(false);
            c.clone()
        } else if b.right.contains(s) && b.left.contains(e) {
            flipped.push(true);
            c.reversed()
        } else {
            return Err(BraidError::Endpoint { strand: i, reason: "endpoints must lie one in each end volume".into() });
        };
        check_no_reentry(i, &c, &b.left, &b.right)?;
        out.push(c);
    }
    Ok((out, flipped))
}

/// Segment endpoints must visit the left volume, then neither, then the
/// right volume, in that order.
fn check_no_reentry(i: usize, c: &LoopGeometry, left: &EndVolume, right: &EndVolume) -> Result<(), BraidError> {
    let mut stage = 0;
    let pts = c.segments.iter().map(Segment::start).chain(std::iter::once(c.end()));
    for p in pts {
        let s = if left.contains(p) {
            0
        } else if right.contains(p) {
            2
        } else {
            1
        };
        if s < stage {
            return Err(BraidError::Endpoint { strand: i, reason: "re-enters an end volume".into() });
        }
        stage = s;
    }
    Ok(())
}

/// Rail points for connections joining `ends[c]` to `ends[(c + 1) % L]`.
fn rails(vol: &EndVolume, ends: &[Vec3]) -> Result<Vec<[Vec3; 2]>, BraidError> {
    let l = ends.len();
    let base = ends.iter().map(|&p| vol.height(p)).fold(f64::NEG_INFINITY, f64::max);
    let top = vol.top();
    if !(top > base) {
        return Err(BraidError::Volume("no room above the strand endpoints for connections".into()));
    }
    let spacing = (top - base) / (l + 1) as f64;
    let lift = |p: Vec3, h: f64| p + vol.outward * (h - vol.height(p));
    Ok((0..l)
        .map(|c| {
            let h = base + (c + 1) as f64 * spacing;
            [lift(ends[c], h), lift(ends[(c + 1) % l], h)]
        })
        .collect())
}

fn connection_path(from: Vec3, rail: [Vec3; 2], to: Vec3) -> [Vec3; 4] {
    [from, rail[0], rail[1], to]
}

fn segment_distance(p0: Vec3, p1: Vec3, q0: Vec3, q1: Vec3) -> f64 {
    // clamp-and-project on both parameters; exact enough for a validation
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let (a, e, f) = (d1.dot(d1), d2.dot(d2), d2.dot(r));
    let c = d1.dot(r);
    let b = d1.dot(d2);
    let denom = a * e - b * b;
    let mut s = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}

/// Connections that share no endpoint must not touch.
fn check_connections(paths: &[[Vec3; 4]], side: &'static str) -> Result<(), BraidError> {
    let l = paths.len();
    let scale = paths.iter().flatten().map(|p| p.norm()).fold(1.0, f64::max);
    for a in 0..l {
        for b in a + 1..l {
            if b == a + 1 || (a == 0 && b == l - 1) {
                continue;
            }
            for i in 0..3 {
                for j in 0..3 {
                    let d = segment_distance(paths[a][i], paths[a][i + 1], paths[b][j], paths[b][j + 1]);
                    if d <= 1e-12 * scale {
                        return Err(BraidError::ConnectionsIntersect(a, b, side));
                    }
                }
            }
        }
    }
    Ok(())
}

fn assemble(
    strands: &[LoopGeometry],
    left_rails: &[[Vec3; 2]],
    right_rails: &[[Vec3; 2]],
) -> Result<CurveModel, BraidError> {
    let l = strands.len();
    let right: Vec<[Vec3; 4]> =
        (0..l).map(|c| connection_path(strands[c].end(), right_rails[c], strands[(c + 1) % l].end())).collect();
    let left: Vec<[Vec3; 4]> =
        (0..l).map(|c| connection_path(strands[c].start(), left_rails[c], strands[(c + 1) % l].start())).collect();
    check_connections(&right, "right")?;
    check_connections(&left, "left")?;

    let lines = |p: &[Vec3; 4]| -> Vec<Segment> {
        p.windows(2).filter(|w| w[0] != w[1]).map(|w| Segment::Line { start: w[0], end: w[1] }).collect()
    };
    let loops = (0..l)
        .map(|i| {
            let next = (i + 1) % l;
            let mut segs = strands[i].segments.clone();
            segs.extend(lines(&right[i]));
            segs.extend(strands[next].reversed().segments);
            let mut back = left[i];
            back.reverse();
            segs.extend(lines(&back));
            LoopGeometry { segments: segs, closed: true }
        })
        .collect();
    Ok(CurveModel::new(loops)?)
}

pub fn close_braid(b: &BraidModel) -> Result<ClosedBraid, BraidError> {
    let (strands, reversed) = oriented_strands(b)?;
    let ends: Vec<Vec3> = strands.iter().map(LoopGeometry::end).collect();
    let starts: Vec<Vec3> = strands.iter().map(LoopGeometry::start).collect();
    let right_rails = rails(&b.right, &ends)?;
    let left_rails = rails(&b.left, &starts)?;
    let model = assemble(&strands, &left_rails, &right_rails)?;
    Ok(ClosedBraid {
        model,
        excluded: braid_excluded_pairs(strands.len()),
        template: ClosureTemplate { left: b.left, right: b.right, left_rails, right_rails, reversed },
    })
}

/// Rigid map taking `old` onto `new`, as (rotation, translation).
fn rigid_map(old: &EndVolume, new: &EndVolume) -> Result<(Mat3, Vec3), BraidError> {
    let size = old.half_extents.norm();
    let dh = (new.half_extents - old.half_extents).norm();
    if dh > RIGID_TOL * size {
        return Err(BraidError::NonRigid(format!(
            "half extents changed from {:?} to {:?}",
            old.half_extents.to_array(),
            new.half_extents.to_array()
        )));
    }
    let rot = new.basis.transpose().mul_mat(&old.basis);
    let shift = new.center - rot.mul_vec(old.center);
    if (rot.mul_vec(old.outward) - new.outward).norm() > RIGID_TOL {
        return Err(BraidError::NonRigid("outward axis does not follow the volume".into()));
    }
    Ok((rot, shift))
}

/// Close a deformed braid with the connections recorded in `template`,
/// carried along with any rigid motion of the end volumes.
pub fn reclose_braid(b: &BraidModel, template: &ClosureTemplate) -> Result<ClosedBraid, BraidError> {
    let (strands, reversed) = oriented_strands(b)?;
    if strands.len() != template.right_rails.len() {
        return Err(BraidError::Template(format!(
            "template has {} strands, braid has {}",
            template.right_rails.len(),
            strands.len()
        )));
    }
    if reversed != template.reversed {
        return Err(BraidError::Template("strand directions differ".into()));
    }
    let map = |vol_old: &EndVolume, vol_new: &EndVolume, r: &[[Vec3; 2]]| -> Result<Vec<[Vec3; 2]>, BraidError> {
        let (rot, shift) = rigid_map(vol_old, vol_new)?;
        Ok(r.iter().map(|p| [rot.mul_vec(p[0]) + shift, rot.mul_vec(p[1]) + shift]).collect())
    };
    let left_rails = map(&template.left, &b.left, &template.left_rails)?;
    let right_rails = map(&template.right, &b.right, &template.right_rails)?;
    let model = assemble(&strands, &left_rails, &right_rails)?;
    Ok(ClosedBraid {
        model,
        excluded: braid_excluded_pairs(strands.len()),
        template: ClosureTemplate { left: b.left, right: b.right, left_rails, right_rails, reversed },
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum VolumeRecord {
    Aabb { min: [f64; 3], max: [f64; 3] },
    Oriented { center: [f64; 3], half_extents: [f64; 3], basis: Option<[[f64; 3]; 3]> },
}

#[derive(Deserialize)]
struct BraidRecord {
    left_volume: VolumeRecord,
    right_volume: VolumeRecord,
    /// Outward axes `[left, right]`; by default they point from one volume's
    /// center toward the other's and away from it.
    axes: Option<[[f64; 3]; 2]>,
}

fn volume(r: VolumeRecord, outward: Vec3) -> EndVolume {
    match r {
        VolumeRecord::Aabb { min, max } => EndVolume::from_aabb(Aabb::new(min.into(), max.into()), outward),
        VolumeRecord::Oriented { center, half_extents, basis } => EndVolume {
            center: center.into(),
            half_extents: half_extents.into(),
            basis: basis.map(Mat3).unwrap_or(Mat3::IDENTITY),
            outward,
        },
    }
}

fn volume_center(r: &VolumeRecord) -> Vec3 {
    match r {
        VolumeRecord::Aabb { min, max } => (Vec3::from(*min) + Vec3::from(*max)) * 0.5,
        VolumeRecord::Oriented { center, .. } => (*center).into(),
    }
}

/// Parses a json-curves file carrying a `braid` section and open loops.
pub fn parse_braid_json(text: &str) -> Result<BraidModel, BraidError> {
    let file: CurvesFile = serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    let braid = file.braid.ok_or_else(|| ModelError::Parse("missing \"braid\" section".into()))?;
    let rec: BraidRecord = serde_json::from_value(braid).map_err(|e| ModelError::Parse(format!("braid: {e}")))?;
    let (cl, cr) = (volume_center(&rec.left_volume), volume_center(&rec.right_volume));
    let (al, ar) = match rec.axes {
        Some([l, r]) => (Vec3::from(l).normalized(), Vec3::from(r).normalized()),
        None => ((cl - cr).normalized(), (cr - cl).normalized()),
    };
    let curves = file.loops.iter().enumerate().map(|(i, r)| loop_from_record(i, r)).collect::<Result<Vec<_>, _>>()?;
    Ok(BraidModel { curves, left: volume(rec.left_volume, al), right: volume(rec.right_volume, ar) })
}
