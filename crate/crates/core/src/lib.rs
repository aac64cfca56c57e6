//! Numerical laboratory for fractional Brownian motion with Hurst index in
//! `(1/2, 1)`.
//!
//! * [`fbm`] samples paths (Cholesky, circulant embedding, transfer kernel)
//!   and computes discrete Hölder norms.
//! * [`frac`] holds fractional derivatives, Young integrals and the
//!   `K_H` / `K_H*` operators.
//! * [`sde`] solves SDEs driven by fBm pathwise and runs the stability and
//!   drift-coupling experiments.
//! * [`transport`] computes path distances, empirical Wasserstein distances
//!   and the transportation constants.
//! * [`concentration`] checks tail bounds, moment bounds and the
//!   Garsia–Rodemich–Rumsey modulus by Monte Carlo.
//! * [`runner`] drives experiments from TOML configs; it backs the `fbmlab`
//!   binary.

// Negated comparisons are how inputs reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod concentration;
pub mod config;
pub mod error;
pub mod fbm;
pub mod fixtures;
pub mod frac;
pub mod quad;
pub mod runner;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod transport;

pub use error::{Error, Result};
