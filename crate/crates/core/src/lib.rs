//! Numerical laboratory for two Euler–Bernoulli plates coupled through a
//! localized, simultaneous structural damping term `-div(a ∇(u_t + w_t))`.
//!
//! The crate discretizes the coupled system on the unit interval (or unit
//! square) with energy-consistent finite differences and provides:
//!
//! * the block generator and its energy (Gram) form ([`generator`]),
//! * damping profiles and their structural constraints ([`damping`]),
//! * dense spectra and imaginary-axis diagnostics ([`spectral`]),
//! * resolvent norms along the imaginary axis with power-law fits ([`resolvent`]),
//! * an energy-exact implicit midpoint integrator ([`evolution`]),
//! * the per-mode abstract model `y'' + aAy + γA^θ(y' + z') = 0` ([`abstract_modes`]),
//! * configuration, orchestration and report emission ([`config`], [`pipeline`], [`report`]),
//! * the numbered acceptance suite ([`acceptance`]).

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod abstract_modes;
pub mod acceptance;
pub mod banded;
pub mod config;
pub mod damping;
pub mod error;
pub mod evolution;
pub mod fit;
pub mod generator;
pub mod mesh;
pub mod pipeline;
pub mod report;
pub mod resolvent;
pub mod sparse;
pub mod spectral;

pub use error::{LabError, Result};
