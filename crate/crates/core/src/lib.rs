//! Mixed least squares / total least squares (MTLS): the QR + SVD solver,
//! its first-order perturbation maps, and normwise, mixed, componentwise and
//! structured condition numbers, plus the generators, oracles and harness
//! used to check them.
//!
//! Conventions used throughout:
//! * matrices are column-major `nalgebra` matrices, so `vec(M)` is `M.as_slice()`;
//! * Jacobians act on `vec([ΔA, Δb])` (`ΔA` column-stacked, then `Δb`);
//! * `r = A x - b`, `W = diag(0_{n1}, I_{n2})`.

// `!(a > b)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod condition;
mod config;
mod error;
pub mod experiment;
pub mod io;
pub mod kernels;
pub mod perturbation;
pub mod solver;
pub mod structured;

pub use condition::{condition_report, ConditionOptions, ConditionReport, MixedComponentwise, PerturbationBound};
pub use config::{Config, DENSE_CAP_ENV};
pub use error::{MtlsError, Result};
pub use kernels::{Matrix, PartitionedFactorization, Vector};
pub use perturbation::{Jacobian, ResidualReflector};
pub use solver::{solve, solve_with, MtlsProblem, MtlsSolution, WeightPattern};
pub use structured::{StructureBasis, StructuredReport};
