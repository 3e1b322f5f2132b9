//! Linking number of one pair of closed polylines.
//!
//! Three interchangeable kernels: exact crossing counting in a projection,
//! direct summation of the Gauss integral, and a Barnes–Hut approximation of
//! it. Real-valued results are rounded, and a result too far from an integer
//! is settled by counting crossings instead.

pub mod barnes_hut;
pub mod crossings;
pub mod direct;

use crate::model::PolylineLoop;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

pub use barnes_hut::{
    build_moment_tree, far_field_eval, link_barnes_hut, BarnesHutParams, BhOutcome, MomentTree, Order,
};
pub use crossings::{link_count_crossings, CrossingOutcome, CrossingParams};
pub use direct::{link_direct, segment_pair_lambda, DirectVariant};

/// Largest distance from an integer a real-valued result may have.
pub const ROUNDING_TOLERANCE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KernelError {
    #[error("no regular projection found after {attempts} random frames")]
    DegenerateProjection { attempts: u32 },
    #[error("signed crossing sum {0} is odd")]
    OddCrossingSum(i64),
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelMethod {
    CountCrossings,
    #[default]
    DirectSum,
    BarnesHut,
}

impl KernelMethod {
    pub fn tag(self) -> &'static str {
        match self {
            KernelMethod::CountCrossings => "cc",
            KernelMethod::DirectSum => "ds",
            KernelMethod::BarnesHut => "bh",
        }
    }
}

impl fmt::Display for KernelMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for KernelMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "cc" | "count-crossings" | "countcrossings" => Ok(KernelMethod::CountCrossings),
            "ds" | "direct" | "direct-sum" | "directsum" => Ok(KernelMethod::DirectSum),
            "bh" | "barnes-hut" | "barneshut" => Ok(KernelMethod::BarnesHut),
            _ => Err(format!("unknown kernel '{s}' (expected cc, ds or bh)")),
        }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelChoice {
    pub method: KernelMethod,
    pub ds_variant: DirectVariant,
    pub bh: BarnesHutParams,
    pub cc: CrossingParams,
}

impl KernelChoice {
    pub fn new(method: KernelMethod) -> Self {
        KernelChoice { method, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.cc.max_retries < 1 {
            return Err("max_retries must be at least 1".into());
        }
        self.bh.validate()
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LinkOutcome {
    pub value: i64,
    /// Unrounded kernel output; `None` for crossing counts.
    pub raw: Option<f64>,
    /// The rounded value was rejected and crossings were counted instead.
    pub fallback: bool,
    pub retries: u32,
    pub bh: Option<BhOutcome>,
}

/// Round `raw`, or defer to `exact` when it is not close to an integer.
pub fn resolve_real<F>(raw: f64, exact: F) -> Result<(i64, bool, u32), KernelError>
where
    F: FnOnce() -> Result<CrossingOutcome, KernelError>,
{
    let rounded = raw.round();
    if raw.is_finite() && (raw - rounded).abs() <= ROUNDING_TOLERANCE {
        Ok((rounded as i64, false, 0))
    } else {
        let cc = exact()?;
        Ok((cc.linking, true, cc.retries))
    }
}

/// A loop plus lazily built per-loop acceleration data, shareable across
/// all the pairs the loop takes part in.
#[derive(Debug)]
pub struct PreparedLoop {
    polyline: PolylineLoop,
    moments: OnceLock<MomentTree>,
}

impl PreparedLoop {
    pub fn new(polyline: PolylineLoop) -> Self {
        PreparedLoop { polyline, moments: OnceLock::new() }
    }

    pub fn polyline(&self) -> &PolylineLoop {
        &self.polyline
    }

    pub fn moment_tree(&self) -> &MomentTree {
        self.moments.get_or_init(|| build_moment_tree(&self.polyline))
    }
}

pub fn compute_link(
    loop1: &PolylineLoop,
    loop2: &PolylineLoop,
    choice: &KernelChoice,
) -> Result<LinkOutcome, KernelError> {
    compute_link_prepared(&PreparedLoop::new(loop1.clone()), &PreparedLoop::new(loop2.clone()), choice)
}

pub fn compute_link_prepared(
    a: &PreparedLoop,
    b: &PreparedLoop,
    choice: &KernelChoice,
) -> Result<LinkOutcome, KernelError> {
    let cc = || link_count_crossings(a.polyline(), b.polyline(), &choice.cc);
    match choice.method {
        KernelMethod::CountCrossings => {
            let out = cc()?;
            Ok(LinkOutcome { value: out.linking, raw: None, fallback: false, retries: out.retries, bh: None })
        }
        KernelMethod::DirectSum => {
            let raw = link_direct(a.polyline(), b.polyline(), choice.ds_variant);
            let (value, fallback, retries) = resolve_real(raw, cc)?;
            Ok(LinkOutcome { value, raw: Some(raw), fallback, retries, bh: None })
        }
        KernelMethod::BarnesHut => {
            let bh = link_barnes_hut(a.moment_tree(), b.moment_tree(), &choice.bh);
            let (value, fallback, retries) = resolve_real(bh.value, cc)?;
            Ok(LinkOutcome { value, raw: Some(bh.value), fallback, retries, bh: Some(bh) })
        }
    }
}
