//! Certificate construction and verification.
//!
//! A certificate is the strictly upper triangular matrix of nonzero linking
//! numbers between the loops of a model. It is stored as canonical JSON so
//! two certificates are equal exactly when their serialized bytes are.

use crate::discretize::{discretize, DiscretizationError, DiscretizationParams};
use crate::io::model_digest;
use crate::kernels::crossings::pair_seed;
use crate::kernels::{compute_link_prepared, KernelChoice, KernelError, LinkOutcome, PreparedLoop};
use crate::model::CurveModel;
use crate::pls::{normalized_pair, potential_link_search, PairList, PairSet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

#[derive(Debug, thiserror::Error)]
pub enum CertifyError {
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error("loops {i} and {j}: {source}")]
    Kernel { i: usize, j: usize, source: KernelError },
    #[error("invalid options: {0}")]
    Options(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("malformed certificate: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid certificate: {0}")]
    Invalid(String),
}

/// Per-run bookkeeping that is not part of the certificate proper.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub candidate_pairs: usize,
    pub discretization_passes: usize,
    pub segments: usize,
    /// Pairs whose real-valued result was settled by counting crossings.
    pub fallbacks: Vec<(usize, usize)>,
    pub cc_retries: u64,
    /// Pairs for which Barnes–Hut reran at a larger β, with that β.
    pub bh_reruns: Vec<(usize, usize, f64)>,
    /// Largest first-pass Barnes–Hut error estimate (Frobenius norms of the
    /// truncated moments).
    pub bh_max_e_estimate: f64,
    pub max_rounding_residual: f64,
    pub pls_time: Duration,
    pub discretize_time: Duration,
    pub kernel_time: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkMatrix {
    pub num_loops: usize,
    /// Sorted `(i, j, λ)` with `i < j` and `λ != 0`.
    pub entries: Vec<(usize, usize, i64)>,
    pub digest: String,
    pub kernel: String,
    pub diagnostics: Diagnostics,
}

/// Wire form; field order is alphabetical so the output is canonical.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixRecord {
    digest: String,
    entries: Vec<(usize, usize, i64)>,
    kernel: String,
    num_loops: usize,
}

impl LinkMatrix {
    pub fn get(&self, i: usize, j: usize) -> i64 {
        let (i, j) = normalized_pair(i, j);
        self.entries.binary_search_by(|&(a, b, _)| (a, b).cmp(&(i, j))).map(|k| self.entries[k].2).unwrap_or(0)
    }

    pub fn as_map(&self) -> BTreeMap<(usize, usize), i64> {
        self.entries.iter().map(|&(i, j, l)| ((i, j), l)).collect()
    }

    /// Checks the structural invariants of a certificate.
    pub fn validate(&self) -> Result<(), String> {
        let mut prev: Option<(usize, usize)> = None;
        for &(i, j, l) in &self.entries {
            if i >= j {
                return Err(format!("entry ({i}, {j}) is not strictly upper triangular"));
            }
            if j >= self.num_loops {
                return Err(format!("entry ({i}, {j}) exceeds loop count {}", self.num_loops));
            }
            if l == 0 {
                return Err(format!("entry ({i}, {j}) stores a zero"));
            }
            if prev.is_some_and(|p| p >= (i, j)) {
                return Err(format!("entry ({i}, {j}) is out of order or repeated"));
            }
            prev = Some((i, j));
        }
        Ok(())
    }
}

pub fn serialize_matrix(m: &LinkMatrix) -> Vec<u8> {
    let rec = MatrixRecord {
        digest: m.digest.clone(),
        entries: m.entries.clone(),
        kernel: m.kernel.clone(),
        num_loops: m.num_loops,
    };
    let mut out = serde_json::to_vec(&rec).expect("certificate serialization cannot fail");
    out.push(b'\n');
    out
}

pub fn parse_matrix(bytes: &[u8]) -> Result<LinkMatrix, ParseError> {
    let rec: MatrixRecord = serde_json::from_slice(bytes)?;
    let m = LinkMatrix {
        num_loops: rec.num_loops,
        entries: rec.entries,
        digest: rec.digest,
        kernel: rec.kernel,
        diagnostics: Diagnostics::default(),
    };
    m.validate().map_err(ParseError::Invalid)?;
    Ok(m)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CertifyOptions {
    pub kernel: KernelChoice,
    pub discretization: DiscretizationParams,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl CertifyOptions {
    pub fn with_kernel(kernel: KernelChoice) -> Self {
        CertifyOptions { kernel, ..Default::default() }
    }
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CertifyError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CertifyError::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

struct Prepared {
    loops: Vec<PreparedLoop>,
    pairs: PairList,
    diagnostics: Diagnostics,
}

fn prepare(model: &CurveModel, opts: &CertifyOptions, excluded: &PairSet) -> Result<Prepared, CertifyError> {
    opts.kernel.validate().map_err(CertifyError::Options)?;
    let t = Instant::now();
    let pairs = potential_link_search(model, excluded);
    let pls_time = t.elapsed();
    let t = Instant::now();
    let disc = discretize(model, &pairs, &opts.discretization)?;
    let discretize_time = t.elapsed();
    let diagnostics = Diagnostics {
        candidate_pairs: pairs.len(),
        discretization_passes: disc.passes,
        segments: disc.segment_count(),
        pls_time,
        discretize_time,
        ..Default::default()
    };
    let loops = disc.loops.into_iter().map(PreparedLoop::new).collect();
    Ok(Prepared { loops, pairs, diagnostics })
}

type PairResult = Result<(i64, Option<LinkOutcome>), CertifyError>;

fn link_pair(p: &Prepared, choice: &KernelChoice, i: usize, j: usize) -> Result<LinkOutcome, CertifyError> {
    let mut c = *choice;
    c.cc.seed = pair_seed(choice.cc.seed, i, j);
    compute_link_prepared(&p.loops[i], &p.loops[j], &c).map_err(|source| CertifyError::Kernel { i, j, source })
}

fn record(diag: &mut Diagnostics, i: usize, j: usize, out: &LinkOutcome) {
    if out.fallback {
        diag.fallbacks.push((i, j));
    }
    diag.cc_retries += out.retries as u64;
    if let Some(bh) = out.bh {
        diag.bh_max_e_estimate = diag.bh_max_e_estimate.max(bh.first.e_estimate);
        if let Some(rerun) = bh.rerun {
            diag.bh_reruns.push((i, j, rerun.beta));
        }
    }
    if let Some(raw) = out.raw.filter(|r| r.is_finite()) {
        diag.max_rounding_residual = diag.max_rounding_residual.max((raw - raw.round()).abs());
    }
}

pub fn compute_linking_matrix(
    model: &CurveModel,
    opts: &CertifyOptions,
    excluded: &PairSet,
) -> Result<LinkMatrix, CertifyError> {
    in_pool(opts.threads, || {
        let mut p = prepare(model, opts, excluded)?;
        let t = Instant::now();
        let results: Vec<Result<LinkOutcome, CertifyError>> =
            p.pairs.pairs().par_iter().map(|&(i, j)| link_pair(&p, &opts.kernel, i, j)).collect();
        let mut entries = Vec::new();
        let mut diag = std::mem::take(&mut p.diagnostics);
        for (&(i, j), r) in p.pairs.pairs().iter().zip(results) {
            let out = r?;
            record(&mut diag, i, j, &out);
            if out.value != 0 {
                entries.push((i, j, out.value));
            }
        }
        diag.kernel_time = t.elapsed();
        Ok(LinkMatrix {
            num_loops: model.len(),
            entries,
            digest: model_digest(model),
            kernel: opts.kernel.method.tag().to_string(),
            diagnostics: diag,
        })
    })?
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Aborted,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairDiff {
    pub i: usize,
    pub j: usize,
    pub reference: i64,
    pub computed: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub status: Status,
    /// Linked in the reference, unlinked now.
    pub destroyed: Vec<PairDiff>,
    /// Unlinked in the reference, linked now.
    pub created: Vec<PairDiff>,
    /// Linked in both with different values.
    pub changed: Vec<PairDiff>,
    pub first_failure: Option<PairDiff>,
    pub digest_matches: bool,
    /// Explanation for failures not tied to a pair.
    pub message: Option<String>,
    #[serde(skip)]
    pub diagnostics: Diagnostics,
}

impl VerificationReport {
    fn empty(digest_matches: bool) -> Self {
        VerificationReport {
            status: Status::Pass,
            destroyed: Vec::new(),
            created: Vec::new(),
            changed: Vec::new(),
            first_failure: None,
            digest_matches,
            message: None,
            diagnostics: Diagnostics::default(),
        }
    }

    fn push(&mut self, d: PairDiff) {
        match (d.reference, d.computed) {
            (_, 0) => self.destroyed.push(d),
            (0, _) => self.created.push(d),
            _ => self.changed.push(d),
        }
    }

    /// Pairs named anywhere in the three difference lists.
    pub fn failing_pairs(&self) -> BTreeSet<(usize, usize)> {
        self.destroyed.iter().chain(&self.created).chain(&self.changed).map(|d| (d.i, d.j)).collect()
    }

    pub fn is_pass(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Difference between two certificates.
pub fn diff_matrices(reference: &LinkMatrix, computed: &LinkMatrix) -> VerificationReport {
    let mut report = VerificationReport::empty(reference.digest == computed.digest);
    if reference.num_loops != computed.num_loops {
        report.status = Status::Fail;
        report.message = Some(format!(
            "loop count differs: reference has {}, computed has {}",
            reference.num_loops, computed.num_loops
        ));
        return report;
    }
    let (a, b) = (reference.as_map(), computed.as_map());
    let keys: BTreeSet<(usize, usize)> = a.keys().chain(b.keys()).copied().collect();
    for (i, j) in keys {
        let (r, c) = (a.get(&(i, j)).copied().unwrap_or(0), b.get(&(i, j)).copied().unwrap_or(0));
        if r != c {
            report.push(PairDiff { i, j, reference: r, computed: c });
        }
    }
    if !report.failing_pairs().is_empty() {
        report.status = Status::Fail;
    }
    report
}

/// Recompute the links of `model` and compare them against `reference`.
///
/// Reference pairs are evaluated before new candidate pairs. With
/// `early_exit`, evaluation stops at the first disagreement; the reported
/// failure is the lowest-ordered one among the pairs that were evaluated.
pub fn verify(
    model: &CurveModel,
    reference: &LinkMatrix,
    opts: &CertifyOptions,
    early_exit: bool,
    excluded: &PairSet,
) -> Result<VerificationReport, CertifyError> {
    if reference.num_loops != model.len() {
        let mut report = VerificationReport::empty(false);
        report.status = Status::Fail;
        report.message =
            Some(format!("loop count differs: certificate has {}, model has {}", reference.num_loops, model.len()));
        return Ok(report);
    }
    if !early_exit {
        let computed = compute_linking_matrix(model, opts, excluded)?;
        let mut report = diff_matrices(reference, &computed);
        report.diagnostics = computed.diagnostics;
        return Ok(report);
    }

    in_pool(opts.threads, || {
        let mut p = prepare(model, opts, excluded)?;
        let t = Instant::now();
        let refmap = reference.as_map();
        // reference pairs first, then newly found candidates
        let mut order: Vec<(usize, usize)> = refmap.keys().copied().collect();
        order.extend(p.pairs.iter().filter(|k| !refmap.contains_key(k)));

        let stop = AtomicBool::new(false);
        let results: Vec<Option<PairResult>> = order
            .par_iter()
            .map(|&(i, j)| {
                if stop.load(Ordering::Relaxed) {
                    return None;
                }
                let expected = refmap.get(&(i, j)).copied().unwrap_or(0);
                let r = if p.pairs.contains(i, j) {
                    link_pair(&p, &opts.kernel, i, j).map(|o| (o.value, Some(o)))
                } else {
                    // not a candidate any more: the loops' bounds are disjoint
                    Ok((0, None))
                };
                if !matches!(r, Ok((v, _)) if v == expected) {
                    stop.store(true, Ordering::Relaxed);
                }
                Some(r)
            })
            .collect();

        let mut report = VerificationReport::empty(reference.digest == model_digest(model));
        let mut diag = std::mem::take(&mut p.diagnostics);
        for (&(i, j), r) in order.iter().zip(results) {
            let Some(r) = r else { continue };
            let (value, out) = r?;
            if let Some(out) = out {
                record(&mut diag, i, j, &out);
            }
            let expected = refmap.get(&(i, j)).copied().unwrap_or(0);
            if value != expected && report.first_failure.is_none() {
                let d = PairDiff { i, j, reference: expected, computed: value };
                report.first_failure = Some(d);
                report.push(d);
                report.status = Status::Aborted;
            }
        }
        diag.kernel_time = t.elapsed();
        report.diagnostics = diag;
        Ok(report)
    })?
}
