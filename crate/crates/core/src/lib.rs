//! Simulation and verification toolkit for SPDEs with cubic nonlinearities
//! driven by cylindrical alpha-stable noise near a change of stability.
//!
//! The crate provides, in rough order of dependency:
//! - [`stable`]: symmetric alpha-stable increments, multi-mode noise paths,
//!   and the fast/slow self-similar rescaling;
//! - [`spectral`]: diagonal state spaces, fractional norms, dominant/stable
//!   projections, and the analytic semigroup;
//! - [`basis`]: eigenfunction bases and collocation grids;
//! - [`models`]: the Allen-Cahn and surface-growth problem definitions with
//!   their cubic nonlinearities, noise covariances, and reduced coefficients;
//! - [`solver`]: the mild-formulation time stepper for the full SPDE;
//! - [`amplitude`]: the finite-dimensional amplitude equation and ensembles;
//! - [`harness`]: coupled runs, residual decomposition, epsilon sweeps,
//!   and moment-scaling checks;
//! - [`report`]: CSV/JSON output and the run manifest.

pub mod amplitude;
pub mod basis;
pub mod error;
pub mod harness;
pub mod models;
pub mod report;
pub mod solver;
pub mod spectral;
pub mod stable;
pub mod stats;

pub use error::{Error, Result};
