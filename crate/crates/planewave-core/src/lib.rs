//! Stochastic synthesis of spatially-stationary scalar channel responses
//! through the 4D Fourier plane-wave representation
//!
//! ```text
//! h(r, s) = 1/(2π)² ∬∬ a_r(k, r) H_a(k, κ) a_s(κ, s) dk dκ
//! ```
//!
//! where `H_a` is drawn on a quadrature grid over the propagating disk
//! `D × D`, weighted by a spectral factor built from angular power
//! distributions (isotropic, von Mises–Fisher mixtures, piecewise regions,
//! ray sets).
//!
//! The crate is `no_std` + `alloc`. File formats and the CLI live in the
//! `planewave` companion crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod angular;
pub mod error;
pub mod geometry;
pub mod psd;
pub mod rng;
pub mod special;
pub mod spectral_support;
pub mod synthesis;
pub mod validation;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Complex double used throughout.
pub type C64 = Complex64;
