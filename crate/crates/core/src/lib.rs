//! Numerical library and experiment harness for restricted X-ray transforms
//! along smooth curves.
//!
//! The crate provides:
//!
//! * smooth cutoff/partition functions with exact partition-of-unity
//!   structure ([`bumps`]),
//! * curve families (moment curves, finite-type model curves, perturbations,
//!   anisotropic rescalings) with exact high-order derivatives ([`curves`]),
//! * periodic sampled fields with an auxiliary axis and unitary FFT analysis
//!   ([`fields`]),
//! * the restricted X-ray transform, its dual, and fiberwise symbol operators
//!   together with singular-value diagnostics ([`xray`]),
//! * symbol constructors and support/class verification ([`symbols`]),
//! * the anisotropic rescaling frames, scale schedules, gauge-based symbol
//!   splittings, curve-adapted frequency covers, and decoupling diagnostics
//!   ([`decomp`]),
//! * sharpness witness families with exact or quadrature-based norm
//!   evaluation ([`witnesses`]),
//! * a reproducible experiment harness with a CLI front end ([`harness`]).
//!
//! All experiments are deterministic given a seed; parallel runs reduce in a
//! fixed order so that emitted reports are byte-identical across runs.

pub mod bumps;
pub mod curves;
pub mod decomp;
pub mod error;
pub mod fields;
pub mod harness;
pub mod symbols;
pub mod witnesses;
pub mod xray;

pub use error::{Error, Result};
