//! Third-order tensor power iteration for CP decomposition, including the
//! overcomplete regime, and its use for learning latent-variable models
//! from their third moments.
//!
//! - [`tensor`]: dense, factored and implicit tensors, contractions, the binary container.
//! - [`power`]: symmetric, asymmetric and perturbed power iteration with traces.
//! - [`lvm`]: multiview mixtures, spherical Gaussian mixtures, moment estimators.
//! - [`decompose`]: multi-start decomposition with clustering and matching against ground truth.
//! - [`probe`]: Monte Carlo checks of the conditioning and randomness arguments behind the dynamics.
//! - [`harness`]: JSON-configured experiments, reports and the `tpi` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decompose;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lvm;
pub mod power;
pub mod probe;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
