//! Self-similar blow-up profiles of `u_t = (u^m)_xx + |x|^σ u` with `m > 1`, `σ > 0`.
//!
//! Profiles `u = (T−t)^{−α} f(|x|(T−t)^β)` solve a second-order ODE in the
//! similarity variable ξ. The crate computes them in the pressure variable
//! `v = f^{m−1}`, classifies them by shooting from the interface or from the
//! origin, and checks the accompanying phase-space geometry.

pub mod analysis;
pub mod dynsys;
pub mod error;
pub mod integrate;
pub mod model;
pub mod shooting;

pub use error::{Error, Result};

/// Library version, recorded in CLI provenance headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
