//! Toolkit for Bell tests under measurement-dependent locality (MDL).
//!
//! MDL models relax measurement independence: a hidden variable may bias the
//! choice of measurement settings, subject to a lower bound `l` on every
//! conditional input probability P(xy|lambda). This crate provides:
//!
//! - two-qubit states, polarization-analyzer settings, and Born-rule
//!   correlation tables ([`quantum`]);
//! - the MDL inequality family in joint and conditional form, critical-`l`
//!   extraction, and CHSH utilities ([`inequality`]);
//! - an exact vertex oracle for the MDL polytope under uniform-minimum input
//!   distributions ([`oracle`]);
//! - a seeded Poisson coincidence simulator with accidental backgrounds
//!   ([`sim`]);
//! - product-basis state tomography with physicality projection
//!   ([`tomography`]);
//! - count-table analysis: probability estimates, critical-`l` with
//!   parametric bootstrap errors, detection-efficiency floors ([`analysis`]);
//! - a multi-start simplex search over states and settings ([`optimizer`]).
//!
//! All stochastic entry points take an explicit `u64` seed and produce
//! identical results for identical seeds, independent of thread scheduling.
//! The data-parallel paths use rayon when the default `parallel` feature is
//! enabled and fall back to sequential iteration without it.

pub mod analysis;
pub mod error;
pub mod exec;
pub mod inequality;
pub mod optimizer;
pub mod oracle;
pub mod quantum;
pub mod sampling;
pub mod sim;
pub mod tomography;

pub use error::{Error, Result};
