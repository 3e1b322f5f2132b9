//! Model file formats.
//!
//! `json-curves`:
//!
//! ```text
//! {"loops":[{"type":"polyline"|"catmullrom"|"cubics","closed":true,"points":[[x,y,z],...]}, ...]}
//! ```
//!
//! where a `cubics` loop carries `"segments":[{"coeffs":[[..],[..],[..],[..]],"t":[lo,hi]},...]`
//! instead of `points`. `polyline-text` is one loop per block of `v x y z`
//! lines, blocks separated by blank lines, every loop implicitly closed.

use crate::geom::Vec3;
use crate::model::{CubicSegment, CurveModel, LoopGeometry, ModelError, Segment};
use crate::spline::catmull_rom_to_cubics;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ModelFormat {
    JsonCurves,
    PolylineText,
}

impl ModelFormat {
    /// `.txt`/`.poly` files are polyline text, everything else json-curves.
    pub fn from_path(path: &Path) -> ModelFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") | Some("poly") => ModelFormat::PolylineText,
            _ => ModelFormat::JsonCurves,
        }
    }
}

impl FromStr for ModelFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json-curves" | "json" => Ok(ModelFormat::JsonCurves),
            "polyline-text" | "text" => Ok(ModelFormat::PolylineText),
            other => Err(format!("unknown model format '{other}'")),
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub(crate) enum LoopKind {
    Polyline,
    Catmullrom,
    Cubics,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub(crate) struct CubicRecord {
    pub coeffs: [[f64; 3]; 4],
    pub t: [f64; 2],
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub(crate) struct LoopRecord {
    #[serde(rename = "type")]
    pub kind: LoopKind,
    #[serde(default = "default_closed")]
    pub closed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<CubicRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameterization: Option<String>,
}

fn default_closed() -> bool {
    true
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub(crate) struct CurvesFile {
    pub loops: Vec<LoopRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub braid: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

pub fn load_model(path: &Path, format: ModelFormat) -> Result<CurveModel, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::Parse(format!("{}: {e}", path.display())))?;
    parse_model(&text, format)
}

pub fn parse_model(text: &str, format: ModelFormat) -> Result<CurveModel, ModelError> {
    match format {
        ModelFormat::JsonCurves => parse_json_curves(text),
        ModelFormat::PolylineText => parse_polyline_text(text),
    }
}

pub fn parse_json_curves(text: &str) -> Result<CurveModel, ModelError> {
    let file: CurvesFile = serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    if file.braid.is_some() {
        return Err(ModelError::Parse("file describes a braid; close it before computing a certificate".into()));
    }
    let loops = file.loops.iter().enumerate().map(|(i, r)| loop_from_record(i, r)).collect::<Result<Vec<_>, _>>()?;
    CurveModel::new(loops)
}

pub(crate) fn loop_from_record(index: usize, r: &LoopRecord) -> Result<LoopGeometry, ModelError> {
    let invalid = |reason: String| ModelError::InvalidLoop { loop_index: index, reason };
    let points = || -> Result<Vec<Vec3>, ModelError> {
        let pts: Vec<Vec3> = r
            .points
            .as_ref()
            .ok_or_else(|| invalid("missing \"points\"".into()))?
            .iter()
            .map(|&p| Vec3::from(p))
            .collect();
        if pts.iter().any(|p| !p.is_finite()) {
            return Err(ModelError::NonFinite(index));
        }
        Ok(pts)
    };
    match r.kind {
        LoopKind::Polyline => {
            let mut pts = points()?;
            if r.closed {
                if pts.len() > 1 && pts.first() == pts.last() {
                    pts.pop();
                }
                Ok(LoopGeometry::closed_polyline(&pts))
            } else {
                Ok(LoopGeometry::open_polyline(&pts))
            }
        }
        LoopKind::Catmullrom => {
            if let Some(p) = &r.parameterization {
                if p != "uniform" {
                    return Err(invalid(format!("unsupported catmull-rom parameterization '{p}'")));
                }
            }
            if !r.closed {
                return Err(invalid("catmull-rom loops must be closed cycles".into()));
            }
            let mut pts = points()?;
            if pts.len() > 1 && pts.first() == pts.last() {
                pts.pop();
            }
            let cubics = catmull_rom_to_cubics(&pts).map_err(|e| invalid(e.to_string()))?;
            Ok(LoopGeometry::closed_cubics(cubics))
        }
        LoopKind::Cubics => {
            let segs = r.segments.as_ref().ok_or_else(|| invalid("missing \"segments\"".into()))?;
            let segments = segs
                .iter()
                .map(|s| {
                    let coeffs = s.coeffs.map(Vec3::from);
                    if coeffs.iter().any(|c| !c.is_finite()) {
                        return Err(ModelError::NonFinite(index));
                    }
                    CubicSegment::new(coeffs, s.t[0], s.t[1]).map(Segment::Cubic).map_err(|e| invalid(e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(LoopGeometry { segments, closed: r.closed })
        }
    }
}

pub fn parse_polyline_text(text: &str) -> Result<CurveModel, ModelError> {
    let mut loops = Vec::new();
    let mut current: Vec<Vec3> = Vec::new();
    let flush = |current: &mut Vec<Vec3>, loops: &mut Vec<LoopGeometry>| {
        if !current.is_empty() {
            loops.push(LoopGeometry::closed_polyline(current));
            current.clear();
        }
    };
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            flush(&mut current, &mut loops);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        if tok.next() != Some("v") {
            return Err(ModelError::Parse(format!("line {}: expected 'v x y z'", lineno + 1)));
        }
        let coords: Vec<f64> = tok
            .map(f64::from_str)
            .collect::<Result<_, _>>()
            .map_err(|e| ModelError::Parse(format!("line {}: {e}", lineno + 1)))?;
        if coords.len() != 3 {
            return Err(ModelError::Parse(format!("line {}: expected 3 coordinates", lineno + 1)));
        }
        current.push(Vec3::new(coords[0], coords[1], coords[2]));
    }
    flush(&mut current, &mut loops);
    CurveModel::new(loops)
}

pub(crate) fn loop_to_record(l: &LoopGeometry) -> LoopRecord {
    let all_lines = l.segments.iter().all(|s| matches!(s, Segment::Line { .. }));
    if all_lines {
        let mut pts: Vec<[f64; 3]> = l.segments.iter().map(|s| s.start().to_array()).collect();
        if !l.closed {
            pts.push(l.end().to_array());
        }
        LoopRecord {
            kind: LoopKind::Polyline,
            closed: l.closed,
            points: Some(pts),
            segments: None,
            parameterization: None,
        }
    } else {
        let segments = l
            .segments
            .iter()
            .map(|s| {
                let c = match s {
                    Segment::Line { start, end } => CubicSegment::from_line(*start, *end),
                    Segment::Cubic(c) => *c,
                };
                CubicRecord { coeffs: c.coeffs.map(Vec3::to_array), t: [c.t_lo, c.t_hi] }
            })
            .collect();
        LoopRecord {
            kind: LoopKind::Cubics,
            closed: l.closed,
            points: None,
            segments: Some(segments),
            parameterization: None,
        }
    }
}

/// Deterministic json-curves text for a model. Catmull-Rom input is written
/// in its normalized monomial form.
pub fn to_json_curves(model: &CurveModel) -> String {
    let mut metadata = BTreeMap::new();
    metadata.insert("catmullrom_parameterization".to_string(), "uniform".to_string());
    let file = CurvesFile { loops: model.loops().iter().map(loop_to_record).collect(), braid: None, metadata };
    serde_json::to_string(&file).expect("model serialization cannot fail")
}

pub fn save_model(model: &CurveModel, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, to_json_curves(model))
}

/// Hex SHA-256 of the canonical json-curves serialization.
pub fn model_digest(model: &CurveModel) -> String {
    hex::encode(Sha256::digest(to_json_curves(model).as_bytes()))
}
