//! Data-driven robust and H∞ state-feedback synthesis for discrete LTI plants.
//!
//! The plant is never identified directly. Two designed experiments produce
//! aggregate data matrices, which are turned into a descriptor model with
//! structured, norm-bounded uncertainty. Controllers come out of LMI
//! feasibility problems on that model and are then checked against the true
//! plant by the simulator-side [`verify`] module.
//!
//! Module map:
//!
//! - [`plant`]: ground-truth simulation and oracle quantities.
//! - [`experiments`]: the two data-collection experiments and their aggregates.
//! - [`descriptor`]: the data-based descriptor model and its augmentation.
//! - [`lmi`]: structured block LMIs, an interior-point SDP solver, certificates.
//! - [`synthesis`]: robust and H∞ gains from feasible LMI solutions.
//! - [`verify`]: spectral radius, H∞ norm and empirical energy gains.
//! - [`bench`]: configuration, persistence and the benchmark harness.

// `!(x > 0.0)` is used on purpose so NaN fails every positivity check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod descriptor;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod lmi;
pub mod plant;
pub mod rng;
pub mod synthesis;
pub mod verify;

pub use error::{Error, Result};
