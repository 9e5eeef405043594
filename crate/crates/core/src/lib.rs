//! Matrix-free first-order solvers for the fixed-support Wasserstein
//! barycenter problem (WBP) and optimal transport (OT) linear programs.
//!
//! The barycenter LP is
//!
//! ```text
//! min  sum_t <D^t, X^t>
//! s.t. (X^t)^T 1_m   = a^t      t = 1..T
//!      X^t 1_{m_t}   = a^c      t = 1..T
//!      <a^c, 1_m>    = 1
//!      X^t >= 0
//! ```
//!
//! written in standard form `min <c,x> s.t. Ax = b, x >= 0` with the
//! redundant rows removed so that `A` has full row rank. Nothing in this crate
//! materializes `A`; the operator, its adjoint and the normal-equation solve
//! `A A^* y = R` are applied block by block in `O(Tm + sum_t m_t)` or
//! `O(m sum_t m_t)` work.
//!
//! Module map:
//!
//! - [`problem`]: instances, variable layout, `A`/`A^*`, objectives, KKT residuals.
//! - [`normal`]: closed-form solvers for `A A^* y = R` (WBP and OT) and the
//!   projection onto `{x : Ax = b}`.
//! - [`hpr`]: generic two-block Halpern-Peaceman-Rachford machinery and the
//!   equivalence harness for its three algorithmic forms.
//! - [`solvers`]: production HPR, fast-ADMM and hybrid solvers for the dual LP.
//! - [`ibp`]: iterative Bregman projection baseline for the entropic problem.
//! - [`datagen`]: synthetic Gaussian-mixture instances, k-means supports,
//!   squared-Euclidean costs, image ingestion.
//! - [`io`]: instance manifests, CSV/binary readers and writers, PGM images.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too; the numeric
// kernels index several parallel slices with one loop variable.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod datagen;
pub mod error;
pub mod flops;
pub mod hpr;
pub mod ibp;
pub mod io;
pub mod linalg;
pub mod normal;
pub mod problem;
pub mod solvers;

pub use error::{Error, Result};
pub use problem::{DiscreteDistribution, DualVector, KktResidual, OtInstance, PrimalVector, WbpInstance};
pub use solvers::{Method, SolveReport, SolverOptions, Termination};
