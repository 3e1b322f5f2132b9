//! Catmull-Rom to monomial cubic conversion.

use crate::geom::Vec3;
use crate::model::{CubicSegment, ModelError};

/// Uniform Catmull-Rom with tension 0.5 over a closed control cycle.
///
/// Segment `i` interpolates control point `i` at `t = 0` and control point
/// `i + 1` at `t = 1`; neighbouring segments share tangents.
pub fn catmull_rom_to_cubics(control_points: &[Vec3]) -> Result<Vec<CubicSegment>, ModelError> {
    let n = control_points.len();
    if n < 4 {
        return Err(ModelError::CatmullRom(format!("need at least 4 control points, got {n}")));
    }
    for i in 0..n {
        if control_points[i] == control_points[(i + 1) % n] {
            return Err(ModelError::CatmullRom(format!("control points {i} and {} coincide", (i + 1) % n)));
        }
    }
    let at = |k: usize| control_points[k % n];
    Ok((0..n).map(|i| catmull_rom_segment(at(i + n - 1), at(i), at(i + 1), at(i + 2))).collect())
}

/// The cubic between `p1` and `p2` with neighbours `p0`, `p3`.
pub fn catmull_rom_segment(p0: Vec3, p1: Vec3, p2: Vec3, p3: Vec3) -> CubicSegment {
    let a0 = p1;
    let a1 = (p2 - p0) * 0.5;
    let a2 = p0 - p1 * 2.5 + p2 * 2.0 - p3 * 0.5;
    let a3 = (p1 - p2) * 1.5 + (p3 - p0) * 0.5;
    CubicSegment { coeffs: [a0, a1, a2, a3], t_lo: 0.0, t_hi: 1.0 }
}
