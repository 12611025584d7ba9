//! Sparse Gaussian graphical models built from decomposable information
//! filtering networks.
//!
//! A correlation matrix is filtered into a chordal graph (a maximum spanning
//! tree or a triangulated maximally filtered graph). The global precision
//! matrix is then the sum of local inverses of clique covariances minus
//! the separator ones, which is also the maximum-likelihood estimate for
//! that support. On top of the fitted model the crate provides likelihood
//! scoring, sparse regression, conditioning under linear constraints,
//! sampling and a seeded Monte Carlo benchmark.

pub mod baselines;
pub mod conditional;
pub mod datagen;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod ifn;
pub mod io;
pub mod linalg;
pub mod precision;
pub mod risk;
pub mod rng;

pub use error::{Error, Result};
pub use estimators::{estimate, CovariancePair, ObservationMatrix};
pub use ifn::{build_mst, build_tmfg, CliqueTree};
pub use linalg::SymMatrix;
pub use precision::{assemble_precision, log_likelihood, LikelihoodReport, SparsePrecision};
