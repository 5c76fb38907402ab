//! Outer block coordinate descent on the biconvex objective
//!
//! ```text
//! f(R, D) = -log det(R) - 2(1 - alpha) log det(D) + tr(C D R D) + lambda ||R||_1,off
//! ```
//!
//! alternating the diagonal solve ([`crate::dsolve`]) and the correlation
//! solve ([`crate::rsolve`]), each warm-started from the previous block
//! iterate. Both block updates minimize their subproblem, so the objective
//! never increases along the trace. The objective is biconvex but not convex:
//! distinct initializations may reach distinct coordinate-wise minimizers,
//! all of which satisfy the stationarity system checked by
//! [`stationarity_residual`] and the consistency bound checked by
//! [`consistency_bound_check`].
//!
//! Convergence requires both a small relative objective change and a small
//! stationarity residual; when the objective has stalled but the residual has
//! not met its target, the subproblem tolerances are tightened and iteration
//! continues.

use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::dsolve::{self, DSolveConfig};
use crate::linalg;
use crate::matrix::{correlation_from_covariance, CorrelationMatrix, PrecisionFactorization};
use crate::rsolve;
use crate::{Error, Result};

/// Initial point for the outer iteration.
#[derive(Debug, Clone)]
pub enum Init {
    /// `R = I`, `d = 1`.
    Identity,
    /// Start from a previous factorization (its `W = R^{-1}` is recomputed).
    Warm(PrecisionFactorization),
}

/// Tuning for [`fit`].
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub lambda: f64,
    pub alpha: f64,
    /// Relative objective-change threshold for the outer loop.
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    pub d_cfg: DSolveConfig,
    /// Convergence threshold for the inner correlation solve; `None` derives
    /// it from the scale of `S = D C D`.
    pub r_tol: Option<f64>,
    /// Stationarity target as a multiple of `1 + ||S||_inf`; convergence is
    /// declared only once the residual is below it.
    pub stat_tol: f64,
    pub init: Init,
    /// Number of starts; beyond the first, the diagonal is drawn
    /// log-uniformly inside the theoretical solution box and the best final
    /// objective wins.
    pub restarts: usize,
    /// Seed for the restart draws.
    pub seed: u64,
}

/// Small-sample preset for the diagonal-penalty weight, `alpha = 4/n`;
/// shrinks to the unpenalized diagonal as the sample grows.
pub fn small_sample_alpha(n: usize) -> f64 {
    assert!(n > 0, "sample count must be positive");
    4.0 / n as f64
}

impl SolverConfig {
    pub fn new(lambda: f64, alpha: f64) -> Self {
        Self {
            lambda,
            alpha,
            outer_tol: 1e-8,
            outer_max_iter: 500,
            d_cfg: DSolveConfig::default(),
            r_tol: None,
            stat_tol: 1e-6,
            init: Init::Identity,
            restarts: 1,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.alpha >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha must be < 1, got {}",
                self.alpha
            )));
        }
        if !(self.outer_tol > 0.0) || !(self.stat_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Converged (or capped) fit on correlation scale, with the dual matrix from
/// the last correlation solve.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub fact: PrecisionFactorization,
    /// Rescaled to covariance scale when a scale vector was supplied.
    pub fact_cov: Option<PrecisionFactorization>,
    /// Dual `W ~ R^{-1}` from the final correlation solve.
    pub w: Array2<f64>,
    /// Objective after the initial point and after every block update.
    pub objective_trace: Vec<f64>,
    pub stationarity_residual: f64,
    pub outer_iters: usize,
    pub wall_time: Duration,
    pub converged: bool,
    pub lambda: f64,
    pub alpha: f64,
}

impl FitResult {
    /// `K = D R D` on correlation scale.
    pub fn precision(&self) -> Array2<f64> {
        self.fact.compose()
    }

    /// `K` on covariance scale when a scale vector was supplied.
    pub fn precision_cov(&self) -> Option<Array2<f64>> {
        self.fact_cov.as_ref().map(|f| f.compose())
    }

    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }

    /// Nonzero off-diagonal pairs of `R` (exact-zero test).
    pub fn nnz_offdiag(&self) -> usize {
        self.fact.nnz_offdiag()
    }
}

/// Evaluate the objective at `(R, D)`. Fails if `R` is not positive definite.
pub fn objective(
    r: &Array2<f64>,
    d: &Array1<f64>,
    chat: &CorrelationMatrix,
    lambda: f64,
    alpha: f64,
) -> Result<f64> {
    let p = chat.p();
    if r.nrows() != p || d.len() != p {
        return Err(Error::InvalidInput("objective: dimension mismatch".into()));
    }
    let l = linalg::cholesky(r).ok_or_else(|| {
        Error::NotPositiveDefinite("objective: R is not positive definite".into())
    })?;
    let logdet_r = linalg::chol_logdet(&l);
    let logdet_d: f64 = d.iter().map(|v| v.ln()).sum();
    let c = chat.entries();
    let mut quad = 0.0;
    let mut l1 = 0.0;
    for i in 0..p {
        for j in 0..p {
            quad += c[(i, j)] * d[i] * r[(i, j)] * d[j];
            if i != j {
                l1 += r[(i, j)].abs();
            }
        }
    }
    Ok(-logdet_r - 2.0 * (1.0 - alpha) * logdet_d + quad + lambda * l1)
}

/// Maximum violation of the coordinate-wise stationarity system
///
/// ```text
/// R^{-1} - D C D = lambda Pi + alpha I - lambda diag(J' |R|)
/// ```
///
/// On entries with `r_ij != 0` the subgradient coordinate must equal
/// `sign(r_ij)` exactly; on zero entries it must lie in `[-1, 1]`. Returns
/// infinity when `R` is not positive definite.
pub fn stationarity_residual(
    r: &Array2<f64>,
    d: &Array1<f64>,
    chat: &CorrelationMatrix,
    lambda: f64,
    alpha: f64,
) -> f64 {
    let p = chat.p();
    let Some(l) = linalg::cholesky(r) else {
        return f64::INFINITY;
    };
    let rinv = linalg::chol_inverse(&l);
    let c = chat.entries();
    let mut worst = 0.0_f64;
    for i in 0..p {
        let mut row_abs = 0.0;
        for k in 0..p {
            if k != i {
                row_abs += r[(k, i)].abs();
            }
        }
        for j in 0..p {
            let g = rinv[(i, j)] - d[i] * c[(i, j)] * d[j];
            if i == j {
                worst = worst.max((g - alpha + lambda * row_abs).abs());
            } else if r[(i, j)] != 0.0 {
                worst = worst.max((g - lambda * r[(i, j)].signum()).abs());
            } else {
                worst = worst.max((g.abs() - lambda).max(0.0));
            }
        }
    }
    worst
}

/// Diagonal implied by `R` at any coordinate-wise minimizer:
/// `d^2 = lambda diag(J' |R|) + diag(R^{-1}) - alpha`. A diagnostic
/// cross-check, not an update rule.
pub fn explicit_d_from_r(r: &Array2<f64>, lambda: f64, alpha: f64) -> Result<Array1<f64>> {
    let p = r.nrows();
    let l = linalg::cholesky(r).ok_or_else(|| {
        Error::NotPositiveDefinite("explicit_d_from_r: R is not positive definite".into())
    })?;
    let rinv = linalg::chol_inverse(&l);
    let mut d = Array1::<f64>::zeros(p);
    for i in 0..p {
        let mut row_abs = 0.0;
        for k in 0..p {
            if k != i {
                row_abs += r[(k, i)].abs();
            }
        }
        let sq = lambda * row_abs + rinv[(i, i)] - alpha;
        if !(sq > 0.0) {
            return Err(Error::InvalidInput(format!(
                "explicit_d_from_r: non-positive square {sq} at index {i}"
            )));
        }
        d[i] = sq.sqrt();
    }
    Ok(d)
}

/// Two sides of the coordinate-wise-minimizer consistency bound.
#[derive(Debug, Clone, Copy)]
pub struct ConsistencyCheck {
    /// `||K^{-1} - C||_inf`
    pub lhs: f64,
    /// `(lambda p + |alpha|) p^2 / ((1 - alpha) lambda_min(C))`
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluate the bound `||K^{-1} - C||_inf <= (lambda p + |alpha|) p^2 /
/// ((1-alpha) lambda_min(C))` for an estimate on correlation scale. `holds`
/// allows round-off slack so the exact-MLE case (`lambda = alpha = 0`, both
/// sides zero) passes.
pub fn consistency_bound_check(
    k_hat: &Array2<f64>,
    chat: &CorrelationMatrix,
    lambda: f64,
    alpha: f64,
) -> Result<ConsistencyCheck> {
    let p = chat.p();
    if !(chat.lambda_min() > 0.0) {
        return Err(Error::NotPositiveDefinite(
            "consistency bound requires a positive definite correlation matrix".into(),
        ));
    }
    let kinv = linalg::spd_inverse(k_hat).ok_or_else(|| {
        Error::NotPositiveDefinite("consistency bound: estimate is not positive definite".into())
    })?;
    let c = chat.entries();
    let mut lhs = 0.0_f64;
    for i in 0..p {
        for j in 0..p {
            lhs = lhs.max((kinv[(i, j)] - c[(i, j)]).abs());
        }
    }
    let pf = p as f64;
    let rhs = (lambda * pf + alpha.abs()) * pf * pf / ((1.0 - alpha) * chat.lambda_min());
    let slack = 1e-8 * (1.0 + linalg::inf_norm(k_hat));
    Ok(ConsistencyCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + slack,
    })
}

/// Verifiable uniqueness regimes for the global minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UniquenessCertificate {
    /// `||C - I||_inf <= (2 (1-alpha) p^3)^{-1/2}`: unique local minimum for
    /// every `lambda >= 0`.
    SmallCorrelationRegime,
    /// No certificate; the small-penalty regime exists but its constants are
    /// not computable.
    NotCertified,
}

/// Certify uniqueness of the minimizer when possible. The penalty level does
/// not enter the certified regime.
pub fn uniqueness_certificate(
    chat: &CorrelationMatrix,
    _lambda: f64,
    alpha: f64,
) -> UniquenessCertificate {
    let p = chat.p() as f64;
    let threshold = 1.0 / (2.0 * (1.0 - alpha) * p * p * p).sqrt();
    if chat.max_abs_offdiag() <= threshold {
        UniquenessCertificate::SmallCorrelationRegime
    } else {
        UniquenessCertificate::NotCertified
    }
}

/// Classical graphical lasso baseline (off-diagonal penalty) on an arbitrary
/// positive definite input; see [`glasso_fit_tol`] for explicit tolerance.
pub fn glasso_fit(s: &Array2<f64>, lambda: f64) -> Result<Array2<f64>> {
    glasso_fit_tol(s, lambda, rsolve::default_r_tolerance(s))
}

/// Graphical lasso with an explicit convergence threshold.
pub fn glasso_fit_tol(s: &Array2<f64>, lambda: f64, tol: f64) -> Result<Array2<f64>> {
    rsolve::glasso_core(s, lambda, tol)
}

/// Fit on a correlation matrix. When `scale` (`diag(Sigma)^{-1/2}`) is given,
/// the result also carries the covariance-scale factorization
/// `d_cov = scale * d`.
pub fn fit(
    chat: &CorrelationMatrix,
    cfg: &SolverConfig,
    scale: Option<&Array1<f64>>,
) -> Result<FitResult> {
    cfg.validate()?;
    let start = Instant::now();
    let p = chat.p();
    if let Some(s) = scale {
        if s.len() != p {
            return Err(Error::InvalidInput("scale vector length mismatch".into()));
        }
        if s.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInput(
                "scale vector must be strictly positive".into(),
            ));
        }
    }

    // One variable: the stationary point is explicit, K = (1 - alpha).
    if p == 1 {
        let d = Array1::from_elem(1, (1.0 - cfg.alpha).sqrt());
        let fact = PrecisionFactorization {
            r: Array2::<f64>::eye(1),
            d: d.clone(),
            scale: scale.cloned(),
        };
        let fact_cov = scale.map(|s| PrecisionFactorization {
            r: Array2::<f64>::eye(1),
            d: &d * s,
            scale: None,
        });
        let obj = objective(&fact.r, &fact.d, chat, cfg.lambda, cfg.alpha)?;
        return Ok(FitResult {
            fact,
            fact_cov,
            w: Array2::<f64>::eye(1),
            objective_trace: vec![obj],
            stationarity_residual: 0.0,
            outer_iters: 0,
            wall_time: start.elapsed(),
            converged: true,
            lambda: cfg.lambda,
            alpha: cfg.alpha,
        });
    }

    let (r0, w0, d0) = match &cfg.init {
        Init::Identity => (
            Array2::<f64>::eye(p),
            Array2::<f64>::eye(p),
            Array1::<f64>::ones(p),
        ),
        Init::Warm(f) => {
            if f.r.nrows() != p || f.d.len() != p {
                return Err(Error::InvalidInput("warm start dimension mismatch".into()));
            }
            let l = linalg::cholesky(&f.r).ok_or_else(|| {
                Error::NotPositiveDefinite("warm start R is not positive definite".into())
            })?;
            (f.r.clone(), linalg::chol_inverse(&l), f.d.clone())
        }
    };

    let mut best: Option<RunOutcome> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for restart in 0..cfg.restarts {
        let (r_init, w_init, d_init) = if restart == 0 {
            (r0.clone(), w0.clone(), d0.clone())
        } else {
            // Log-uniform inside the theoretical box, or around 1 when the
            // correlation matrix is singular and no box exists.
            let (lo, hi) = if chat.lambda_min() > 0.0 {
                dsolve::d_bounds(chat.lambda_min(), cfg.alpha, p)?
            } else {
                (0.1, 10.0)
            };
            let d = Array1::from_iter((0..p).map(|_| rng.random_range(lo.ln()..=hi.ln()).exp()));
            (Array2::<f64>::eye(p), Array2::<f64>::eye(p), d)
        };
        let run = run_bcd(chat, cfg, r_init, w_init, d_init)?;
        let better = match &best {
            None => true,
            Some(b) => {
                (run.converged && !b.converged)
                    || ((run.converged == b.converged) && run.objective() < b.objective())
            }
        };
        if better {
            best = Some(run);
        }
    }
    let run = best.expect("restarts >= 1");

    let fact = PrecisionFactorization {
        r: run.r,
        d: run.d,
        scale: scale.cloned(),
    };
    let fact_cov = scale.map(|s| PrecisionFactorization {
        r: fact.r.clone(),
        d: &fact.d * s,
        scale: None,
    });
    Ok(FitResult {
        fact,
        fact_cov,
        w: run.w,
        objective_trace: run.trace,
        stationarity_residual: run.residual,
        outer_iters: run.iters,
        wall_time: start.elapsed(),
        converged: run.converged,
        lambda: cfg.lambda,
        alpha: cfg.alpha,
    })
}

/// Fit directly from a covariance matrix: reduce to the correlation matrix
/// and rescale the estimate back, so the result is invariant under diagonal
/// rescaling of the input.
pub fn fit_covariance(sigma: &Array2<f64>, cfg: &SolverConfig) -> Result<FitResult> {
    let (chat, scale) = correlation_from_covariance(sigma)?;
    fit(&chat, cfg, Some(&scale))
}

pub(crate) struct RunOutcome {
    pub r: Array2<f64>,
    pub w: Array2<f64>,
    pub d: Array1<f64>,
    pub trace: Vec<f64>,
    pub residual: f64,
    pub iters: usize,
    pub converged: bool,
}

impl RunOutcome {
    fn objective(&self) -> f64 {
        *self.trace.last().unwrap()
    }
}

pub(crate) fn run_bcd(
    chat: &CorrelationMatrix,
    cfg: &SolverConfig,
    mut r: Array2<f64>,
    mut w: Array2<f64>,
    mut d: Array1<f64>,
) -> Result<RunOutcome> {
    let p = chat.p();
    let c = chat.entries();
    let lambda = cfg.lambda;
    let alpha = cfg.alpha;

    let mut trace = vec![objective(&r, &d, chat, lambda, alpha)?];
    let mut f_prev = trace[0];
    let mut shrink = 1.0_f64;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iters = 0;

    // The outer loop needs gradient-level control of the diagonal solve to
    // reach its stationarity target.
    let d_grad0 = cfg.d_cfg.grad_tol.unwrap_or(1e-9);

    for outer in 1..=cfg.outer_max_iter {
        iters = outer;

        let prob = dsolve::build_scaling_problem(&r, chat, alpha)?;
        let d_cfg = DSolveConfig {
            tol: cfg.d_cfg.tol * shrink,
            grad_tol: Some((d_grad0 * shrink).max(1e-13)),
            ..cfg.d_cfg.clone()
        };
        let dres = dsolve::solve_d_diagonal_newton(&prob, &d_cfg, &d)?;
        d = dres.d;
        trace.push(objective(&r, &d, chat, lambda, alpha)?);

        let mut s = Array2::<f64>::zeros((p, p));
        for i in 0..p {
            for j in 0..p {
                s[(i, j)] = d[i] * c[(i, j)] * d[j];
            }
        }
        linalg::symmetrize(&mut s);
        let s_inf = linalg::inf_norm(&s);
        let tau_base = cfg.r_tol.unwrap_or_else(|| rsolve::default_r_tolerance(&s));
        // Floor at a level coordinate descent can actually reach.
        let tau = (tau_base * shrink).max(1e-13 * (1.0 + s_inf));
        let (r_new, w_new) = rsolve::solve_r(&s, lambda, tau, Some((&r, &w)))?;
        r = r_new;
        w = w_new;
        let f_now = objective(&r, &d, chat, lambda, alpha)?;
        trace.push(f_now);

        residual = stationarity_residual(&r, &d, chat, lambda, alpha);
        let stat_target = cfg.stat_tol * (1.0 + s_inf);
        let rel = (f_prev - f_now).abs() / (1.0 + f_now.abs());
        f_prev = f_now;

        if rel < cfg.outer_tol {
            if residual <= stat_target {
                converged = true;
                break;
            }
            // Objective has stalled at the current inner precision; tighten.
            if shrink > 1e-5 {
                shrink *= 1e-2;
            }
        }
    }

    Ok(RunOutcome {
        r,
        w,
        d,
        trace,
        residual,
        iters,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn corr2(rho: f64) -> CorrelationMatrix {
        CorrelationMatrix::from_entries(array![[1.0, rho], [rho, 1.0]]).unwrap()
    }

    fn tight_cfg(lambda: f64, alpha: f64) -> SolverConfig {
        let mut cfg = SolverConfig::new(lambda, alpha);
        cfg.outer_tol = 1e-13;
        cfg.stat_tol = 1e-10;
        cfg.d_cfg.grad_tol = Some(1e-11);
        cfg
    }

    // The two-minima construction: r0 is the unique negative root of
    // sqrt(1 - r^2) = e^r (1 - r + r^3), solved by bisection.
    fn two_minima_r0() -> f64 {
        let g = |r: f64| (1.0 - r * r).sqrt() - r.exp() * (1.0 - r + r * r * r);
        let mut lo = -0.99_f64;
        let mut hi = -0.5_f64;
        assert!(g(lo) < 0.0 && g(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    fn two_minima_rho(r0: f64) -> f64 {
        (r0.exp() * (1.0 - r0 * r0).sqrt() - 1.0) / r0
    }

    #[test]
    fn small_sample_alpha_preset() {
        assert_abs_diff_eq!(small_sample_alpha(8), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(small_sample_alpha(400), 0.01, epsilon = 1e-15);
        // usable directly as a configuration
        let chat = corr2(0.2);
        let f = fit(&chat, &SolverConfig::new(0.3, small_sample_alpha(100)), None).unwrap();
        assert!(f.converged);
    }

    #[test]
    fn objective_trivial_values() {
        let chat = CorrelationMatrix::from_entries(Array2::<f64>::eye(3)).unwrap();
        let f = objective(&Array2::eye(3), &Array1::ones(3), &chat, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(f, 3.0, epsilon = 1e-14);

        // (I, sqrt(1-alpha) 1): p (1-alpha) (1 - ln(1-alpha))
        for alpha in [0.5, -1.0, 0.25] {
            let d = Array1::from_elem(3, (1.0_f64 - alpha).sqrt());
            let f = objective(&Array2::eye(3), &d, &chat, 0.7, alpha).unwrap();
            let want = 3.0 * (1.0 - alpha) * (1.0 - (1.0 - alpha).ln());
            assert_abs_diff_eq!(f, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn objective_rejects_indefinite_r() {
        let chat = corr2(0.0);
        let bad = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(objective(&bad, &Array1::ones(2), &chat, 0.0, 0.0).is_err());
    }

    #[test]
    fn two_minima_objectives_match() {
        let r0 = two_minima_r0();
        let rho = two_minima_rho(r0);
        assert!((r0 + 0.85).abs() < 0.02);
        assert!((rho - 0.91).abs() < 0.01);
        let chat = corr2(rho);
        let f_id = objective(&Array2::eye(2), &Array1::ones(2), &chat, 1.0, 0.0).unwrap();
        let d = (1.0 + r0 * rho).powf(-0.5);
        let r = array![[1.0, r0], [r0, 1.0]];
        let f_alt = objective(&r, &Array1::from_elem(2, d), &chat, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(f_id, f_alt, epsilon = 1e-6);
        // Both points satisfy the stationarity system.
        assert!(stationarity_residual(&Array2::eye(2), &Array1::ones(2), &chat, 1.0, 0.0) <= 1e-8);
        assert!(stationarity_residual(&r, &Array1::from_elem(2, d), &chat, 1.0, 0.0) <= 1e-8);
    }

    #[test]
    fn identity_regime_fixed_point() {
        // ||C - I||_inf <= lambda/(1-alpha) makes (I, sqrt(1-alpha) I) a local
        // minimum, and the identity-initialized fit lands exactly there.
        for (lambda, alpha) in [(0.3_f64, 0.0_f64), (0.3, 0.5), (0.6, -1.0)] {
            let bound = lambda / (1.0 - alpha);
            let chat = corr2(0.8 * bound.min(0.9));
            assert!(
                stationarity_residual(
                    &Array2::eye(2),
                    &Array1::from_elem(2, (1.0_f64 - alpha).sqrt()),
                    &chat,
                    lambda,
                    alpha
                ) <= 1e-12
            );
            let res = fit(&chat, &tight_cfg(lambda, alpha), None).unwrap();
            assert!(res.converged);
            let want_d = (1.0 - alpha).sqrt();
            for i in 0..2 {
                assert_abs_diff_eq!(res.fact.d[i], want_d, epsilon = 1e-9);
                for j in 0..2 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(res.fact.r[(i, j)], want, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn unpenalized_fit_recovers_mle() {
        let chat = corr2(0.5);
        let res = fit(&chat, &tight_cfg(0.0, 0.0), None).unwrap();
        assert!(res.converged);
        let k = res.precision();
        let prod = k.dot(chat.entries());
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod[(i, j)], want, epsilon = 1e-8);
            }
        }
        // Explicit-D diagnostic agrees at the stationary point.
        let d = explicit_d_from_r(&res.fact.r, 0.0, 0.0).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(d[i], res.fact.d[i], epsilon = 1e-6);
        }
    }

    #[test]
    fn two_minima_fit_reaches_both_points_then_collapses() {
        let r0 = two_minima_r0();
        let rho = two_minima_rho(r0);
        let chat = corr2(rho);

        // lambda = 1: identity init stays at (I, I); the alternate init stays
        // at the non-identity minimizer; objectives agree.
        let fit_id = fit(&chat, &tight_cfg(1.0, 0.0), None).unwrap();
        assert!(fit_id.converged);
        assert_abs_diff_eq!(fit_id.fact.r[(0, 1)], 0.0, epsilon = 1e-10);

        let d = (1.0 + r0 * rho).powf(-0.5);
        let warm = PrecisionFactorization {
            r: array![[1.0, r0], [r0, 1.0]],
            d: Array1::from_elem(2, d),
            scale: None,
        };
        let mut cfg_alt = tight_cfg(1.0, 0.0);
        cfg_alt.init = Init::Warm(warm.clone());
        let fit_alt = fit(&chat, &cfg_alt, None).unwrap();
        assert!(fit_alt.converged);
        assert_abs_diff_eq!(fit_alt.fact.r[(0, 1)], r0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit_id.objective(), fit_alt.objective(), epsilon = 1e-6);

        // lambda = 1.3 > 1.168: both initializations collapse to (I, I).
        for init in [Init::Identity, Init::Warm(warm)] {
            let mut cfg = tight_cfg(1.3, 0.0);
            cfg.init = init;
            let f = fit(&chat, &cfg, None).unwrap();
            assert!(f.converged);
            assert!(f.fact.r[(0, 1)].abs() <= 1e-8);
            assert_abs_diff_eq!(f.fact.d[0], 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn random_point_has_positive_residual() {
        let chat = corr2(0.4);
        let r = array![[1.0, 0.2], [0.2, 1.0]];
        let d = array![1.3, 0.7];
        assert!(stationarity_residual(&r, &d, &chat, 0.1, 0.0) > 1e-3);
    }

    #[test]
    fn explicit_d_trivial_values() {
        let r = Array2::<f64>::eye(3);
        let d = explicit_d_from_r(&r, 0.7, 0.0).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(d[i], 1.0, epsilon = 1e-15);
        }
        let d = explicit_d_from_r(&r, 0.0, 0.5).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(d[i], 0.5_f64.sqrt(), epsilon = 1e-15);
        }
        // A non-positive implied square is a diagnostic error.
        assert!(matches!(
            explicit_d_from_r(&r, 0.0, 1.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn explicit_d_matches_converged_fit() {
        let entries = array![
            [1.0, 0.35, 0.1, -0.2],
            [0.35, 1.0, 0.25, 0.0],
            [0.1, 0.25, 1.0, 0.3],
            [-0.2, 0.0, 0.3, 1.0]
        ];
        let chat = CorrelationMatrix::from_entries(entries).unwrap();
        let f = fit(&chat, &tight_cfg(0.12, 0.0), None).unwrap();
        assert!(f.converged);
        let d = explicit_d_from_r(&f.fact.r, 0.12, 0.0).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(d[i], f.fact.d[i], epsilon = 1e-6);
        }
        // Trace never increases (up to solver tolerance).
        for w in f.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()));
        }
        // Consistency bound holds.
        let chk = consistency_bound_check(&f.precision(), &chat, 0.12, 0.0).unwrap();
        assert!(chk.holds);
    }

    #[test]
    fn consistency_bound_zero_penalty() {
        let chat = corr2(0.5);
        let f = fit(&chat, &tight_cfg(0.0, 0.0), None).unwrap();
        let chk = consistency_bound_check(&f.precision(), &chat, 0.0, 0.0).unwrap();
        assert!(chk.lhs <= 1e-8);
        assert_abs_diff_eq!(chk.rhs, 0.0, epsilon = 1e-15);
        assert!(chk.holds);
    }

    #[test]
    fn uniqueness_certificate_cases() {
        let chat = CorrelationMatrix::from_entries(Array2::<f64>::eye(4)).unwrap();
        assert_eq!(
            uniqueness_certificate(&chat, 0.3, 0.0),
            UniquenessCertificate::SmallCorrelationRegime
        );
        // p = 4, alpha = 0: threshold is (2 * 64)^{-1/2} ~ 0.0884.
        let mut e = Array2::<f64>::eye(4);
        e[(0, 1)] = 0.08;
        e[(1, 0)] = 0.08;
        let chat = CorrelationMatrix::from_entries(e).unwrap();
        assert_eq!(
            uniqueness_certificate(&chat, 0.0, 0.0),
            UniquenessCertificate::SmallCorrelationRegime
        );
        let r0 = two_minima_r0();
        let rho = two_minima_rho(r0);
        assert_eq!(
            uniqueness_certificate(&corr2(rho), 1.0, 0.0),
            UniquenessCertificate::NotCertified
        );
    }

    #[test]
    fn scale_invariance_single_pair() {
        // Dyadic rescaling reproduces the correlation matrix bit for bit, so
        // the fitted R is bitwise identical and K rescales exactly.
        let sigma = array![[2.0, 0.6, -0.3], [0.6, 1.5, 0.4], [-0.3, 0.4, 0.8]];
        let h = array![0.5, 4.0, 2.0];
        let mut sigma_h = sigma.clone();
        for i in 0..3 {
            for j in 0..3 {
                sigma_h[(i, j)] *= h[i] * h[j];
            }
        }
        let cfg = tight_cfg(0.1, 0.0);
        let f1 = fit_covariance(&sigma, &cfg).unwrap();
        let f2 = fit_covariance(&sigma_h, &cfg).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(f1.fact.r[(i, j)].to_bits(), f2.fact.r[(i, j)].to_bits());
            }
        }
        let k1 = f1.precision_cov().unwrap();
        let k2 = f2.precision_cov().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(k2[(i, j)], k1[(i, j)] / (h[i] * h[j]), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn degenerate_single_variable() {
        let chat = CorrelationMatrix::from_entries(Array2::<f64>::eye(1)).unwrap();
        let scale = array![0.5]; // sigma^2 = 4
        let f = fit(&chat, &SolverConfig::new(0.3, 0.2), Some(&scale)).unwrap();
        assert!(f.converged);
        let k = f.precision_cov().unwrap();
        assert_abs_diff_eq!(k[(0, 0)], (1.0 - 0.2) / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_configs_rejected() {
        let chat = corr2(0.2);
        assert!(fit(&chat, &SolverConfig::new(-0.1, 0.0), None).is_err());
        assert!(fit(&chat, &SolverConfig::new(0.1, 1.0), None).is_err());
        let mut cfg = SolverConfig::new(0.1, 0.0);
        cfg.restarts = 0;
        assert!(fit(&chat, &cfg, None).is_err());
    }

    #[test]
    fn multi_start_is_no_worse() {
        let r0 = two_minima_r0();
        let rho = two_minima_rho(r0);
        let chat = corr2(rho);
        let mut cfg = tight_cfg(1.0, 0.0);
        cfg.restarts = 4;
        cfg.seed = 9;
        let f_multi = fit(&chat, &cfg, None).unwrap();
        let f_single = fit(&chat, &tight_cfg(1.0, 0.0), None).unwrap();
        assert!(f_multi.objective() <= f_single.objective() + 1e-9);
    }

    #[test]
    fn glasso_examples() {
        let k = glasso_fit(&Array2::<f64>::eye(3), 0.5).unwrap();
        assert_eq!(k, Array2::<f64>::eye(3));

        let s = array![[2.0, 0.3, -0.1], [0.3, 1.0, 0.2], [-0.1, 0.2, 0.5]];
        let k = glasso_fit(&s, 0.35).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(k[(i, i)], 1.0 / s[(i, i)], epsilon = 1e-9);
            for j in 0..3 {
                if i != j {
                    assert_eq!(k[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn glasso_matches_grid_oracle_p2() {
        // Brute-force the 2x2 primal on a shrinking grid over
        // (k11, k22, k12) restricted to the PD cone.
        let s = array![[1.0, 0.5], [0.5, 1.0]];
        let lambda = 0.1;
        let k = glasso_fit_tol(&s, lambda, 1e-12).unwrap();
        let obj = |k11: f64, k22: f64, k12: f64| -> f64 {
            let det = k11 * k22 - k12 * k12;
            if det <= 0.0 || k11 <= 0.0 {
                return f64::INFINITY;
            }
            -det.ln()
                + s[(0, 0)] * k11
                + s[(1, 1)] * k22
                + 2.0 * s[(0, 1)] * k12
                + 2.0 * lambda * k12.abs()
        };
        let got = obj(k[(0, 0)], k[(1, 1)], k[(0, 1)]);
        let mut best = f64::INFINITY;
        let (mut c11, mut c22, mut c12) = (1.0, 1.0, 0.0);
        let mut width = 2.0;
        for _ in 0..12 {
            let (b11, b22, b12) = (c11, c22, c12);
            for i in -6..=6 {
                for j in -6..=6 {
                    for l in -6..=6 {
                        let k11 = b11 + width * i as f64 / 6.0;
                        let k22 = b22 + width * j as f64 / 6.0;
                        let k12 = b12 + width * l as f64 / 6.0;
                        let v = obj(k11, k22, k12);
                        if v < best {
                            best = v;
                            c11 = k11;
                            c22 = k22;
                            c12 = k12;
                        }
                    }
                }
            }
            width /= 4.0;
        }
        assert!(got <= best + 1e-5, "glasso {got} vs oracle {best}");
    }
}
