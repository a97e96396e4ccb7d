//! Learning ground-state properties and quantum phases from classical shadows.
//!
//! The crate simulates small spin Hamiltonians exactly, samples randomized
//! Pauli-measurement shadows of their ground states, and trains classical
//! models on those shadows:
//!
//! - [`simulator`]: Hamiltonian families, sparse/dense eigensolvers and state vectors.
//! - [`shadows`]: shadow sampling, reduced density matrices and the binary shadow file.
//! - [`kernels`]: the shadow kernel and Gaussian/Dirichlet kernels on parameters.
//! - [`predictor`]: Dirichlet averaging and kernel ridge regression with model selection.
//! - [`classifier`]: kernel PCA, the unsupervised split and a hinge-loss SVM.
//! - [`observables`]: local observables, order parameters and topological invariants.
//! - [`experiments`]: config-driven drivers behind the `shadowkit` binary.
//!
//! All randomness flows from a root seed through [`rng::stream`], so results do
//! not depend on the number of worker threads.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod linalg;
pub mod observables;
pub mod predictor;
pub mod rng;
pub mod shadows;
pub mod simulator;

pub use error::{Error, Result};
