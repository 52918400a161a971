//! Numerical evaluation of finite-volume fractional-moment localization
//! criteria for random Schrödinger operators H = −Δ + λV on ℤ^d.
//!
//! The crate is organised bottom-up:
//!
//! - [`lattice`]: regions, boundary bonds, the boundary-collapsed metric.
//! - [`disorder`]: i.i.d. potentials with counter-based sampling.
//! - [`operator`]: assembly of H_{Λ;ω} and its restrictions.
//! - [`resolvent`]: Green function entries and independent 1-D oracle.
//! - [`moments`]: median-of-means estimates of E|G|^s.
//! - [`criteria`]: the finite-volume tests and closed-form inverse moments.
//! - [`observables`]: eigen-decompositions and spectral diagnostics.
//! - [`analysis`]: decay fits, power-law and mobility-edge checks, η scans.
//! - [`scan`]: configuration, parameter sweeps and phase tables.

#![allow(
    clippy::too_many_arguments,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop
)]

pub mod analysis;
pub mod config;
pub mod criteria;
pub mod disorder;
pub mod error;
pub mod lattice;
pub mod moments;
pub mod observables;
pub mod operator;
pub mod resolvent;
pub mod scan;

pub use error::{Error, Result};
