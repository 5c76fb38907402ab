//! Sparse precision matrix estimation with an l1 penalty on partial correlations.
//!
//! The precision matrix `K` of a Gaussian graphical model is factored as
//! `K = D R D`, where `D` is a positive diagonal matrix and `R` is a positive
//! definite matrix with unit diagonal whose off-diagonal entries are the
//! negated partial correlations. The estimator minimizes
//!
//! ```text
//! -log det(R) - 2(1 - alpha) log det(D) + tr(C D R D) + lambda * ||R||_1,off
//! ```
//!
//! over `(R, D)`, where `C` is the sample correlation matrix. Penalizing the
//! off-diagonal entries of `R` instead of those of `K` makes the estimate
//! invariant under diagonal rescaling of the variables, which the classical
//! graphical lasso is not. The objective is biconvex; the solver alternates
//! between the two blocks:
//!
//! * [`dsolve`] — the `D` block reduces to a positive definite matrix-scaling
//!   system `D A D e = e`, solved by a diagonal-Hessian Newton method (an
//!   exact Newton variant is included for cross-checking and benchmarks);
//! * [`rsolve`] — the `R` block is a unit-diagonal analogue of the graphical
//!   lasso, solved via its dual by block coordinate descent over columns.
//!
//! On top of the solver ([`fit`]), the crate provides regularization paths and
//! BIC/EBIC/cross-validation model selection ([`select`]), irrepresentability
//! diagnostics that govern asymptotic sign recovery ([`irr`]), and synthetic
//! study generators with RMSE/sign-accuracy metrics ([`sim`]). File formats
//! used by the command-line front end live in [`io`].

// Validation guards are written `!(x > 0.0)` on purpose: unlike `x <= 0.0`
// they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsolve;
pub mod fit;
pub mod io;
pub mod irr;
pub mod linalg;
pub mod matrix;
pub mod rsolve;
pub mod select;
pub mod sim;

pub use dsolve::{
    build_scaling_problem, d_bounds, solve_d_diagonal_newton, solve_d_exact_newton, DSolveConfig,
    DSolveResult, ScalingProblem,
};
pub use fit::{
    consistency_bound_check, explicit_d_from_r, fit, fit_covariance, glasso_fit, objective,
    small_sample_alpha, stationarity_residual, FitResult, Init, SolverConfig,
    UniquenessCertificate,
};
pub use matrix::{
    compose_precision, correlation_from_covariance, correlation_from_data, factorize_precision,
    min_eigenvalue, partial_correlations, CorrelationMatrix, PrecisionFactorization, SampleData,
};
pub use rsolve::{check_dual_feasibility, soft_threshold, solve_r, DualFeasibilityReport};

/// Errors surfaced by the solver and its front ends.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input data violates a documented precondition (shape, degenerate column, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A tuning parameter or tolerance is out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// A matrix required to be positive definite is not.
    #[error("not positive definite: {0}")]
    NotPositiveDefinite(String),
    /// An iterative solver exhausted its iteration budget.
    #[error("did not converge: {0}")]
    NonConvergence(String),
    /// A file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
