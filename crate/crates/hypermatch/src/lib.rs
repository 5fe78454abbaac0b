//! Hypergraph matching between two 2-D point sets.
//!
//! A matching is scored by a sparse symmetric third-order affinity tensor
//! over candidate correspondences; maximizing that cubic score over the set
//! of assignment matrices is done by block-coordinate ascent on the
//! associated multilinear form, optionally convexified by a structured
//! rank-one modification whose weight is either fixed up front or grown
//! lazily (homotopy). The crate also ships the affinity construction from
//! triangle angles, a synthetic benchmark generator, and brute-force
//! reference implementations used by the test and acceptance suites.
//!
//! Modules:
//! - [`tensor3`]: sparse third-order tensor storage and contractions
//! - [`modform`]: the structured modification `G`, bounds, and `F + alpha*G`
//! - [`lap`]: exact rectangular linear assignment (maximization)
//! - [`qap`]: monotonic-ascent quadratic assignment subroutines
//! - [`solvers`]: the block-coordinate ascent solver family
//! - [`affinity`]: tensor construction, synthetic data, metrics
//! - [`oracle`]: exhaustive/dense reference implementations for tests

// Indexed loops are the house style for the contraction kernels.
#![allow(clippy::needless_range_loop)]

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub mod affinity;
pub mod error;
pub mod lap;
pub mod modform;
pub mod oracle;
pub mod qap;
pub mod solvers;
pub mod tensor3;

pub use error::{Error, Result};

/// Floating-point scalar the numeric core is generic over.
///
/// Implemented for `f32` and `f64`; all internal accumulation happens in the
/// chosen scalar type.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum + fmt::Debug + fmt::Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + NumAssign + FromPrimitive + ToPrimitive + Sum + fmt::Debug + fmt::Display + Send + Sync + 'static
{
}

/// Converts an `f64` constant into the working scalar type.
pub(crate) fn cast<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant must convert into the scalar type")
}

// Concrete double-precision aliases; the CLI and most callers use these.
pub type SparseTensor3F64 = tensor3::SparseTensor3<f64>;
pub type ModifiedFormF64<'a> = modform::ModifiedForm<'a, f64>;
pub type SolverConfigF64 = solvers::SolverConfig<f64>;
pub type SolverResultF64 = solvers::SolverResult<f64>;
pub type MatchProblemF64 = affinity::MatchProblem<f64>;
pub type AffinityConfigF64 = affinity::AffinityConfig<f64>;
pub type SyntheticConfigF64 = affinity::SyntheticConfig<f64>;

// Single-precision variants of the tensor core.
pub type SparseTensor3F32 = tensor3::SparseTensor3<f32>;
pub type ModifiedFormF32<'a> = modform::ModifiedForm<'a, f32>;
