//! Adversarial sparse linear-regression designs and the estimators studied on them.
//!
//! The crate builds block-structured design matrices, fits coordinate-separable
//! penalized least-squares estimators (Lasso, SCAD, MCP, bridge, reweighted and
//! square-root Lasso, exhaustive l0 search), runs the local-descent method with
//! a ball-constrained minimization oracle, enumerates per-block local minima and
//! drives the prediction-error scaling experiments.

pub mod designs;
pub mod error;
pub mod experiment;
pub mod landscape;
pub mod linalg;
pub mod local_descent;
pub mod penalties;
pub mod report;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
