//! Sparse system identification with zero-attracting LMS filters.
//!
//! Three update rules are provided: plain LMS, reweighted zero-attracting LMS
//! (RZA-LMS) and the dual-domain sparse adaptive filter (DD-SAF), which
//! relaxes the zero attraction on taps that keep showing up in an
//! exponentially weighted error/input correlation ("error memory").
//!
//! * [`signal_model`] generates sparse systems, white or AR(1) inputs and
//!   Gaussian or Bernoulli-Gaussian noise from reproducible per-trial streams.
//! * [`filters`] holds the single-step update rules with multiplication
//!   accounting.
//! * [`theory`] evaluates closed-form stability bounds and steady-state MSD.
//! * [`experiments`] is the Monte-Carlo harness and the five presets.
//! * [`cli`] drives everything from the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiments;
pub mod filters;
pub mod signal_model;
pub mod theory;
pub mod validate;

pub use error::{Error, Result};
