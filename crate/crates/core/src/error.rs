//! Error type shared by every module of the library.

use crate::model::PointTag;
use thiserror::Error;

/// Failures reported by library operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Parameters outside the admissible domain (m > 1, σ > 0, finite).
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    /// A critical point on a line of equilibria was requested without a valid γ.
    #[error("critical point {0:?} needs a positive gamma")]
    InvalidGamma(PointTag),
    /// The point has no single linearization in the (X, Y, Z) chart.
    #[error("critical point {0:?} has no linearization in these coordinates")]
    UnsupportedPoint(PointTag),
    /// A series was evaluated where its pressure would be negative.
    #[error("xi = {xi} lies outside the support of the local series")]
    OutsideSupport { xi: f64 },
    /// The profile right-hand side was evaluated at a non-positive pressure.
    #[error("degenerate profile state: v = {v}")]
    DegenerateState { v: f64 },
    /// A scalar argument violates its precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Bracket endpoints do not classify as the bisection requires.
    #[error("invalid bracket: {0}")]
    InvalidBracket(String),
    /// A fit window holds too few samples.
    #[error("fit window holds {0} samples, at least 8 are needed")]
    WindowTooShort(usize),
    /// An evaluation point lies outside the sampled range of a trajectory.
    #[error("xi = {xi} lies outside the sampled range [{lo}, {hi}]")]
    OutOfRange { xi: f64, lo: f64, hi: f64 },
}

/// Convenience alias.
pub type Result<T> = std::result::Result<T, Error>;
