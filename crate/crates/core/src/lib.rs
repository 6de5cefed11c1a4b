//! Joint computing and communication design for an active-RIS-aided mobile
//! edge computing system.
//!
//! The crate minimizes the maximum computational latency (MCL) over users by
//! block coordinate descent over the offloading split, the edge CPU
//! allocation, the AP receive beamformers, the RIS reflection coefficients
//! and the user transmit powers. The convex subproblems are handled by the
//! embedded interior-point solver in [`conic`].
//!
//! Module map:
//!
//! - [`config`], [`state`], [`quadratic`]: shared types, validation and units.
//! - [`channel`]: geometry, path loss and Rayleigh channel synthesis.
//! - [`rates`]: SINR, MSE, MMSE-reformulated rates and quadratic builders.
//! - [`compute`]: latency model, offloading split and SCA CPU allocation.
//! - [`conic`]: SOCP model, real lifting of complex forms, IPM solver.
//! - [`bcd`]: the block coordinate descent driver.
//! - [`experiments`]: convergence and sweep harness with CSV output.

pub mod bcd;
pub mod channel;
pub mod compute;
pub mod config;
pub mod conic;
pub mod error;
pub mod experiments;
pub mod quadratic;
pub mod rates;
pub mod state;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
