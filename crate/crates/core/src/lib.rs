//! Linear-algebraic and statistical-mechanical analysis of a training matrix.
//!
//! A training matrix `X` has `P` rows (observations, e.g. images) and `N`
//! columns (observables, e.g. pixels). The crate is organised by subsystem:
//!
//! * [`ingest`]: IDX/CSV parsing into a validated [`TrainingMatrix`].
//! * [`gramcore`]: Gram matrices, training mappings, conjugates, training
//!   projections, metrics, correlations and the training graph.
//! * [`spectral`]: the SVD `X = V Λ Wᵀ` and everything derived from it.
//! * [`statmech`]: moments, occupation statistics, observation energies and
//!   the training partition function.
//! * [`dimred`]: exact truncated-SVD dimension reduction and the mixing
//!   scenarios of the shallow auto-encoder.
//! * [`optim`]: iterative auto-encoder solvers checked against the exact
//!   solution.
//! * [`oscillator`]: coupled oscillators whose potential is the observables
//!   Gram matrix.
//! * [`export`]: CSV/JSON table writers shared by the command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dimred;
pub mod error;
pub mod export;
pub mod gramcore;
pub mod ingest;
pub mod linalg;
pub mod optim;
pub mod oscillator;
pub mod selftest;
pub mod spectral;
pub mod statmech;

pub use error::{Error, Result};
pub use ingest::{Normalization, TrainingMatrix};
pub use spectral::SvdFactors;

pub use nalgebra::{DMatrix, DVector};
