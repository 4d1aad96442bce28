//! Capacity, outage and physical-layer secrecy metrics of wireless-powered
//! links whose energy and information channels are correlated Rician fades.
//!
//! Modules, bottom up: [`specfun`] (scaled Bessel functions, exponential
//! integral), [`quadrature`] (adaptive Gauss-Kronrod), [`channel`] (fading
//! model, SNR bookkeeping, samplers), [`dist`] (densities), [`metrics`]
//! (quadrature and closed-form metrics), [`mc`] (Monte Carlo estimates) and
//! [`experiment`] (sweeps, presets, CSV output and checks).

// Negated comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Rule tables are kept with their full tabulated digits.
#![allow(clippy::excessive_precision)]

pub mod channel;
pub mod dist;
pub mod error;
pub mod experiment;
pub mod mc;
pub mod metrics;
pub mod quadrature;
pub mod specfun;

pub use error::{Error, Result};
