//! Error type shared by every module.

use thiserror::Error;

use crate::ot::TransportPlan;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix sizes disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// A coordinate lies outside the domain of the distance-generating function.
    #[error("coordinate {index} = {value} is outside the prox domain")]
    Domain { index: usize, value: f64 },
    /// A numeric argument is out of range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The operation does not support this feasible set.
    #[error("unsupported set: {0}")]
    UnsupportedSet(String),
    /// The model, setup and set cannot be combined.
    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),
    /// An inner iterative solver missed its tolerance.
    #[error("inner solve reached {achieved:e} after {iterations} iterations, target {target:e}")]
    InnerSolveFailure {
        target: f64,
        achieved: f64,
        iterations: usize,
    },
    /// The backtracking line search grew L by 2^60 without passing its test.
    #[error("line search diverged at iteration {iteration} (L = {l:e})")]
    LineSearchDiverged { iteration: usize, l: f64 },
    /// The prox setup is not 1-strongly convex in the model's norm.
    #[error("prox setup is not 1-strongly convex in the chosen norm")]
    NotOneStronglyConvex,
    /// No exact duality-gap oracle for this saddle problem.
    #[error("no gap oracle: {0}")]
    GapOracleUnavailable(String),
    /// Sinkhorn hit its sweep cap; the best plan found is attached.
    #[error("sinkhorn stopped after {sweeps} sweeps with residual {residual:e}")]
    MaxIterExceeded {
        sweeps: usize,
        residual: f64,
        plan: Box<TransportPlan>,
    },
    /// The proximal Sinkhorn outer loop hit its cap.
    #[error("proximal sinkhorn stopped after {outer} outer steps")]
    MaxOuterExceeded { outer: usize },
    /// Marginals cannot be written as integers over the requested scale.
    #[error("marginals are not representable at scale {scale}")]
    ScaleError { scale: u64 },
    /// Malformed textual input.
    #[error("parse error: {0}")]
    Parse(String),
}

/// Result alias.
pub type Result<T> = std::result::Result<T, Error>;
