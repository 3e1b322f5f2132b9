//! Synthetic models with known linking structure.
//!
//! Every generator returns the model together with the certificate it should
//! produce, so they double as test oracles and benchmark inputs.

use crate::certify::{Diagnostics, LinkMatrix};
use crate::geom::Vec3;
use crate::io::model_digest;
use crate::model::{CurveModel, LoopGeometry};
use crate::spline::catmull_rom_to_cubics;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

/// Tube radius of the green loop in torus links.
const TORUS_INNER: f64 = 0.05;
/// Tube radius of the blue loop in torus links.
const TORUS_OUTER: f64 = 0.3;
const RIBBON_TUBE: f64 = 0.1;
const GRID_SPACING: f64 = 1.5;
const GRID_ROW_GAP: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Hopf {
        n: usize,
    },
    UnlinkedCircles {
        count: usize,
        n: usize,
    },
    TorusLink {
        t: u32,
        p: u32,
        n: usize,
    },
    DoubleHelixRibbon {
        lambda: u32,
        n: usize,
    },
    /// `l / 2` chains of `l / 2 + 1` interlocked square rings.
    SquareLinkGrid {
        l: usize,
        n: usize,
    },
    Woundball {
        nu: u32,
        n: usize,
    },
    /// Torus link with seeded smooth jitter. `amplitude` is a fraction of a
    /// quarter of the clearance between the two loops and must lie in [0, 1).
    PerturbedRandomLink {
        t: u32,
        p: u32,
        n: usize,
        seed: u64,
        amplitude: f64,
        catmull_rom: bool,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid scenario: {0}")]
pub struct ScenarioError(pub String);

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Hopf { .. } => "hopf",
            Scenario::UnlinkedCircles { .. } => "circles",
            Scenario::TorusLink { .. } => "torus",
            Scenario::DoubleHelixRibbon { .. } => "ribbon",
            Scenario::SquareLinkGrid { .. } => "grid",
            Scenario::Woundball { .. } => "woundball",
            Scenario::PerturbedRandomLink { .. } => "perturbed",
        }
    }

    /// Segments (or control points) per loop.
    pub fn segments_per_loop(&self) -> usize {
        match *self {
            Scenario::Hopf { n }
            | Scenario::UnlinkedCircles { n, .. }
            | Scenario::TorusLink { n, .. }
            | Scenario::DoubleHelixRibbon { n, .. }
            | Scenario::SquareLinkGrid { n, .. }
            | Scenario::Woundball { n, .. }
            | Scenario::PerturbedRandomLink { n, .. } => n,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let err = |m: String| Err(ScenarioError(m));
        if self.segments_per_loop() < 8 {
            return err(format!("need at least 8 segments per loop, got {}", self.segments_per_loop()));
        }
        match *self {
            Scenario::UnlinkedCircles { count: 0, .. } => err("circle count must be positive".into()),
            Scenario::TorusLink { t, p, .. } | Scenario::PerturbedRandomLink { t, p, .. } if t == 0 || p == 0 => {
                err("torus periods must be positive".into())
            }
            Scenario::DoubleHelixRibbon { lambda: 0, .. } => err("ribbon twist must be positive".into()),
            Scenario::SquareLinkGrid { l, .. } if l < 2 || l % 2 != 0 => {
                err(format!("grid size must be even and >= 2, got {l}"))
            }
            Scenario::SquareLinkGrid { n, .. } if n % 4 != 0 => {
                err(format!("grid ring segments must be a multiple of 4, got {n}"))
            }
            Scenario::Woundball { nu: 0, .. } => err("pole crossings must be positive".into()),
            Scenario::PerturbedRandomLink { amplitude, .. } if !(0.0..1.0).contains(&amplitude) => {
                err(format!("amplitude must lie in [0, 1), got {amplitude}"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Scenario::Hopf { n } => write!(f, "hopf:n={n}"),
            Scenario::UnlinkedCircles { count, n } => write!(f, "circles:count={count},n={n}"),
            Scenario::TorusLink { t, p, n } => write!(f, "torus:t={t},p={p},n={n}"),
            Scenario::DoubleHelixRibbon { lambda, n } => write!(f, "ribbon:lambda={lambda},n={n}"),
            Scenario::SquareLinkGrid { l, n } => write!(f, "grid:l={l},n={n}"),
            Scenario::Woundball { nu, n } => write!(f, "woundball:nu={nu},n={n}"),
            Scenario::PerturbedRandomLink { t, p, n, seed, amplitude, catmull_rom } => {
                write!(f, "perturbed:t={t},p={p},n={n},seed={seed},amplitude={amplitude},spline={catmull_rom}")
            }
        }
    }
}

/// Parses `kind[:key=value,...]`, e.g. `torus:t=2,p=3,n=400`. Omitted keys
/// take defaults.
impl FromStr for Scenario {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, ScenarioError> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = std::collections::BTreeMap::new();
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) =
                part.split_once('=').ok_or_else(|| ScenarioError(format!("expected key=value, got '{part}'")))?;
            kv.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
        fn take<T: FromStr>(
            kv: &mut std::collections::BTreeMap<String, String>,
            k: &str,
            d: T,
        ) -> Result<T, ScenarioError> {
            match kv.remove(k) {
                None => Ok(d),
                Some(v) => v.parse().map_err(|_| ScenarioError(format!("bad value '{v}' for {k}"))),
            }
        }
        let kv = &mut kv;
        let sc = match kind.to_ascii_lowercase().as_str() {
            "hopf" => Scenario::Hopf { n: take(kv, "n", 64)? },
            "circles" | "unlinked" => Scenario::UnlinkedCircles { count: take(kv, "count", 8)?, n: take(kv, "n", 64)? },
            "torus" => Scenario::TorusLink { t: take(kv, "t", 2)?, p: take(kv, "p", 3)?, n: take(kv, "n", 2000)? },
            "ribbon" => Scenario::DoubleHelixRibbon { lambda: take(kv, "lambda", 10)?, n: take(kv, "n", 20_000)? },
            "grid" => Scenario::SquareLinkGrid { l: take(kv, "l", 10)?, n: take(kv, "n", 64)? },
            "woundball" => Scenario::Woundball { nu: take(kv, "nu", 100)?, n: take(kv, "n", 20_000)? },
            "perturbed" => Scenario::PerturbedRandomLink {
                t: take(kv, "t", 2)?,
                p: take(kv, "p", 3)?,
                n: take(kv, "n", 256)?,
                seed: take(kv, "seed", 0)?,
                amplitude: take(kv, "amplitude", 0.9)?,
                catmull_rom: take(kv, "spline", false)?,
            },
            other => return Err(ScenarioError(format!("unknown scenario kind '{other}'"))),
        };
        if let Some(k) = kv.keys().next() {
            return Err(ScenarioError(format!("unknown parameter '{k}' for {kind}")));
        }
        sc.validate()?;
        Ok(sc)
    }
}

fn sample(n: usize, f: impl Fn(f64) -> Vec3) -> Vec<Vec3> {
    (0..n).map(|k| f(k as f64 / n as f64)).collect()
}

fn circle(n: usize, center: Vec3, u: Vec3, v: Vec3) -> Vec<Vec3> {
    sample(n, |t| center + u * (TAU * t).cos() + v * (TAU * t).sin())
}

const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

/// Point on a tube of radius `rho` around the unit core circle in the xy
/// plane, at toroidal angle `theta` and poloidal angle `phi`.
fn torus_point(theta: f64, phi: f64, rho: f64) -> Vec3 {
    let radial = Vec3::new(theta.cos(), theta.sin(), 0.0);
    radial * (1.0 + rho * phi.cos()) + Z * (rho * phi.sin())
}

/// Green loop: `t` toroidal laps with one poloidal turn on a thin tube, which
/// stays homotopic to the core traversed `t` times. Blue loop: `p` poloidal
/// turns during one toroidal lap on a wider tube. Orientations are chosen so
/// the linking number is positive.
fn torus_curves(t: u32, p: u32) -> (impl Fn(f64) -> Vec3, impl Fn(f64) -> Vec3) {
    let (t, p) = (t as f64, p as f64);
    let green = move |s: f64| torus_point(TAU * t * s, TAU * s, TORUS_INNER);
    let blue = move |s: f64| torus_point(TAU * s, -TAU * p * s, TORUS_OUTER);
    (green, blue)
}

/// Smooth closed jitter: a few random Fourier modes whose amplitudes sum to
/// at most `bound`.
fn fourier_jitter(rng: &mut ChaCha8Rng, bound: f64) -> impl Fn(f64) -> Vec3 {
    const MODES: usize = 4;
    let mut coeffs = Vec::with_capacity(MODES);
    for m in 1..=MODES {
        let mut v = || Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        coeffs.push((m as f64, v(), v(), rng.gen_range(0.0..TAU)));
    }
    // |a cos + b sin| <= |a| + |b|
    let total: f64 = coeffs.iter().map(|(_, a, b, _)| a.norm() + b.norm()).sum();
    let scale = if total > 0.0 { bound / total } else { 0.0 };
    move |s: f64| {
        coeffs.iter().fold(Vec3::ZERO, |acc, &(m, a, b, ph)| {
            acc + (a * (TAU * m * s + ph).cos() + b * (TAU * m * s + ph).sin()) * scale
        })
    }
}

fn square_ring(n: usize, center: Vec3, u: Vec3, v: Vec3) -> Vec<Vec3> {
    let corners = [center - u - v, center + u - v, center + u + v, center - u + v];
    let per_side = n / 4;
    let mut pts = Vec::with_capacity(n);
    for c in 0..4 {
        let (a, b) = (corners[c], corners[(c + 1) % 4]);
        for k in 0..per_side {
            pts.push(a.lerp(b, k as f64 / per_side as f64));
        }
    }
    pts
}

fn expected(model: &CurveModel, entries: Vec<(usize, usize, i64)>) -> LinkMatrix {
    let mut entries = entries;
    entries.sort_unstable();
    LinkMatrix {
        num_loops: model.len(),
        entries,
        digest: model_digest(model),
        kernel: "expected".into(),
        diagnostics: Diagnostics::default(),
    }
}

fn polylines(loops: Vec<Vec<Vec3>>) -> Result<CurveModel, ScenarioError> {
    CurveModel::new(loops.iter().map(|p| LoopGeometry::closed_polyline(p)).collect())
        .map_err(|e| ScenarioError(e.to_string()))
}

pub fn generate(scenario: &Scenario) -> Result<(CurveModel, LinkMatrix), ScenarioError> {
    scenario.validate()?;
    let (model, entries) = match *scenario {
        Scenario::Hopf { n } => {
            let m = polylines(vec![circle(n, Vec3::ZERO, X, Y), circle(n, X, X, -Z)])?;
            (m, vec![(0, 1, 1)])
        }
        Scenario::UnlinkedCircles { count, n } => {
            let loops = (0..count).map(|k| circle(n, X * (3.0 * k as f64), X, Y)).collect();
            (polylines(loops)?, vec![])
        }
        Scenario::TorusLink { t, p, n } => {
            let (g, b) = torus_curves(t, p);
            (polylines(vec![sample(n, g), sample(n, b)])?, vec![(0, 1, t as i64 * p as i64)])
        }
        Scenario::DoubleHelixRibbon { lambda, n } => {
            let strand = |phase: f64| {
                move |s: f64| {
                    let theta = TAU * s;
                    let radial = Vec3::new(theta.cos(), theta.sin(), 0.0);
                    let twist = phase - lambda as f64 * theta;
                    radial * (1.0 + RIBBON_TUBE * twist.cos()) + Z * (RIBBON_TUBE * twist.sin())
                }
            };
            let m = polylines(vec![sample(n, strand(0.0)), sample(n, strand(std::f64::consts::PI))])?;
            (m, vec![(0, 1, lambda as i64)])
        }
        Scenario::SquareLinkGrid { l, n } => {
            let (rows, per_row) = (l / 2, l / 2 + 1);
            let mut loops = Vec::with_capacity(rows * per_row);
            let mut entries = Vec::new();
            for r in 0..rows {
                for k in 0..per_row {
                    let c = Vec3::new(GRID_SPACING * k as f64, GRID_ROW_GAP * r as f64, 0.0);
                    // the plane alternates, so every second pair of rings
                    // is reversed to keep all links positive
                    let sign = if k % 4 < 2 { 1.0 } else { -1.0 };
                    let v = if k % 2 == 0 { Y } else { -Z };
                    let ring = square_ring(n, c, X, v * sign);
                    if k > 0 {
                        let idx = loops.len();
                        entries.push((idx - 1, idx, 1));
                    }
                    loops.push(ring);
                }
            }
            (polylines(loops)?, entries)
        }
        Scenario::Woundball { nu, n } => {
            let spiral = |radius: f64| {
                move |s: f64| {
                    let (a, b) = (TAU * nu as f64 * s, TAU * s);
                    let p = Vec3::new(a.sin(), 0.0, a.cos());
                    Vec3::new(p.x * b.cos(), p.x * b.sin(), p.z) * radius
                }
            };
            (polylines(vec![sample(n, spiral(1.0)), sample(n, spiral(0.5))])?, vec![])
        }
        Scenario::PerturbedRandomLink { t, p, n, seed, amplitude, catmull_rom } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bound = amplitude * 0.25 * (TORUS_OUTER - TORUS_INNER);
            let (g, b) = torus_curves(t, p);
            let (jg, jb) = (fourier_jitter(&mut rng, bound), fourier_jitter(&mut rng, bound));
            let green = sample(n, |s| g(s) + jg(s));
            let blue = sample(n, |s| b(s) + jb(s));
            let m = if catmull_rom {
                let cubics = |pts: &[Vec3]| catmull_rom_to_cubics(pts).map_err(|e| ScenarioError(e.to_string()));
                CurveModel::new(vec![
                    LoopGeometry::closed_cubics(cubics(&green)?),
                    LoopGeometry::closed_cubics(cubics(&blue)?),
                ])
                .map_err(|e| ScenarioError(e.to_string()))?
            } else {
                polylines(vec![green, blue])?
            };
            (m, vec![(0, 1, t as i64 * p as i64)])
        }
    };
    let exp = expected(&model, entries);
    Ok((model, exp))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["hopf:n=64", "torus:t=2,p=3,n=400", "grid:l=10,n=64", "ribbon:lambda=10,n=2000"] {
            let sc: Scenario = s.parse().unwrap();
            assert_eq!(sc.to_string(), s);
        }
        assert!("grid:l=3".parse::<Scenario>().is_err());
        assert!("torus:q=1".parse::<Scenario>().is_err());
        assert!("hopf:n=4".parse::<Scenario>().is_err());
    }

    #[test]
    fn grid_has_quarter_square_links() {
        let (m, e) = generate(&Scenario::SquareLinkGrid { l: 10, n: 16 }).unwrap();
        assert_eq!(m.len(), 30);
        assert_eq!(e.entries.len(), 25);
        let m = crate::compute_linking_matrix(&m, &Default::default(), &Default::default()).unwrap();
        assert_eq!(m.entries, e.entries);
    }

    #[test]
    fn woundball_loops_close_up() {
        let (m, e) = generate(&Scenario::Woundball { nu: 3, n: 300 }).unwrap();
        assert_eq!(m.len(), 2);
        assert!(e.entries.is_empty());
    }

    #[test]
    fn jitter_stays_within_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let j = fourier_jitter(&mut rng, 0.01);
        for k in 0..1000 {
            assert!(j(k as f64 / 1000.0).norm() <= 0.01 + 1e-15);
        }
    }
}
