//! Sparse linking-number certificates for collections of closed curves.
//!
//! A model is a set of closed loops made of line and cubic segments. The
//! pipeline culls loop pairs whose bounds are disjoint, refines the curves
//! into polylines that provably preserve the linking relationships, and then
//! evaluates each remaining pair with one of several linking-number kernels.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod braid;
pub mod bvh;
pub mod certify;
pub mod discretize;
pub mod generators;
pub mod geom;
pub mod io;
pub mod kernels;
pub mod model;
pub mod pls;
pub mod spline;

pub use certify::{
    compute_linking_matrix, parse_matrix, serialize_matrix, verify, CertifyError, CertifyOptions, LinkMatrix,
    VerificationReport,
};
pub use geom::{Aabb, Mat3, Vec3};
pub use kernels::{compute_link, KernelChoice, KernelMethod};
pub use model::{CubicSegment, CurveModel, LoopGeometry, ModelError, PolylineLoop, Segment};
