//! Stochastic exp-concave optimization at desk scale.
//!
//! This crate implements batch and online learners for bounded exp-concave
//! losses over convex domains, together with the excess-risk and regret
//! bound evaluators that govern them, statistical diagnostics for the
//! concentration conditions those bounds rely on, and a seeded Monte Carlo
//! harness that measures realized excess risk against the bounds.
//!
//! The main pieces:
//!
//! - [`losses`]: squared / logistic / custom loss models with their
//!   exp-concavity, Lipschitz, and diameter constants.
//! - [`domains`]: L2 balls, boxes, and probability simplices with Euclidean
//!   and matrix-norm projections plus deterministic grid enumeration.
//! - [`erm`]: projected-gradient empirical risk minimization (plain,
//!   penalized, and finite-class) and the high-probability ERM bound.
//! - [`online`]: OGD, ONS, and EWOO learners, regret measurement,
//!   online-to-batch conversion, and the progressive mixture rule.
//! - [`boost`]: the two-phase confidence-boosting meta-algorithm, its bound,
//!   and the model-selection aggregation pipelines built on it.
//! - [`diagnostics`]: synthetic problem instances with exact risk oracles
//!   and empirical verifiers for the central / Bernstein / conditional
//!   variance conditions.
//! - [`harness`]: replicated experiments over sample-size grids with
//!   quantile summaries, bound comparisons, rate fits, and CSV output.
//!
//! Everything is deterministic under a master seed: samples, solver paths,
//! and CSV bytes do not depend on thread count.

pub mod boost;
pub mod config;
pub mod diagnostics;
pub mod domains;
pub mod erm;
mod error;
pub mod harness;
pub mod linalg;
pub mod losses;
pub mod online;
pub mod seeds;
pub mod stats;

pub use error::{Error, Result};
