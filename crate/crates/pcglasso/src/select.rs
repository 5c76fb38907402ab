//! Regularization paths and hyperparameter selection.
//!
//! Paths run over a decreasing penalty grid with each fit warm-started from
//! the previous one (dense-to-sparse chaining conditions the dual well); a
//! parallel cold-start variant trades the chaining for concurrency. Scores
//! per grid point are the Gaussian log-likelihood, BIC, and EBIC. The EBIC
//! form used here is
//!
//! ```text
//! EBIC = -2 loglik + |E| log n + 4 gamma |E| log p
//! ```
//!
//! with `|E|` the number of nonzero off-diagonal pairs of `R`; gamma = 0
//! reduces it to BIC. Cross-validation scores the covariance-scale estimate
//! against the held-out fold's sample covariance and picks the penalty with
//! the best mean held-out log-likelihood.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::fit::{fit, FitResult, SolverConfig};
use crate::linalg;
use crate::matrix::{correlation_from_data, CorrelationMatrix, SampleData};
use crate::{Error, Result};

/// Log-likelihood, BIC, and EBIC for one fit.
#[derive(Debug, Clone, Copy)]
pub struct ScoreTriple {
    pub loglik: f64,
    pub bic: f64,
    pub ebic: f64,
}

/// Fits and scores along a decreasing penalty grid. Failed grid points keep
/// their error in place; the remaining entries are still filled.
#[derive(Debug)]
pub struct PathResult {
    pub lambdas: Vec<f64>,
    pub fits: Vec<Result<FitResult>>,
    /// Nonzero off-diagonal pair counts (exact-zero test), per converged fit.
    pub edge_counts: Vec<Option<usize>>,
    pub scores: Vec<Option<ScoreTriple>>,
}

impl PathResult {
    /// Index of the converged fit minimizing BIC.
    pub fn best_bic(&self) -> Option<usize> {
        best_by(&self.scores, |s| s.bic)
    }

    /// Index of the converged fit minimizing EBIC.
    pub fn best_ebic(&self) -> Option<usize> {
        best_by(&self.scores, |s| s.ebic)
    }
}

fn best_by(scores: &[Option<ScoreTriple>], key: impl Fn(&ScoreTriple) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = s {
            let v = key(s);
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Cross-validation outcome.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub folds: usize,
    pub lambda_grid: Vec<f64>,
    pub mean_heldout_loglik: Vec<f64>,
    /// Grid value maximizing the mean held-out log-likelihood (first on ties).
    pub selected_lambda: f64,
}

/// Gaussian log-likelihood `(n/2) (log det K - tr(K S))`, up to constants,
/// for a precision estimate `K` against a scatter matrix `S` from `n`
/// observations (`1/n` normalization).
pub fn gaussian_loglik(k_hat: &Array2<f64>, s: &Array2<f64>, n: usize) -> Result<f64> {
    let p = k_hat.nrows();
    if s.nrows() != p || s.ncols() != p || k_hat.ncols() != p {
        return Err(Error::InvalidInput(
            "gaussian_loglik: dimension mismatch".into(),
        ));
    }
    let l = linalg::cholesky(k_hat).ok_or_else(|| {
        Error::NotPositiveDefinite("gaussian_loglik: estimate is not positive definite".into())
    })?;
    if linalg::cholesky(s).is_none() {
        return Err(Error::NotPositiveDefinite(
            "gaussian_loglik: scatter matrix is not positive definite".into(),
        ));
    }
    Ok(loglik_unchecked(&l, k_hat, s, n))
}

/// Same formula without requiring `S` positive definite (held-out folds may
/// be singular; only `tr(K S)` is needed from them).
pub(crate) fn loglik_psd(k_hat: &Array2<f64>, s: &Array2<f64>, n: usize) -> Result<f64> {
    let l = linalg::cholesky(k_hat).ok_or_else(|| {
        Error::NotPositiveDefinite("loglik: estimate is not positive definite".into())
    })?;
    Ok(loglik_unchecked(&l, k_hat, s, n))
}

fn loglik_unchecked(l: &Array2<f64>, k: &Array2<f64>, s: &Array2<f64>, n: usize) -> f64 {
    let p = k.nrows();
    let mut tr = 0.0;
    for i in 0..p {
        for j in 0..p {
            tr += k[(i, j)] * s[(j, i)];
        }
    }
    0.5 * n as f64 * (linalg::chol_logdet(l) - tr)
}

/// `BIC = -2 loglik + |E| log n` on correlation scale.
pub fn bic_score(fit: &FitResult, chat: &CorrelationMatrix, n: usize) -> Result<f64> {
    let ll = gaussian_loglik(&fit.precision(), chat.entries(), n)?;
    Ok(-2.0 * ll + fit.nnz_offdiag() as f64 * (n as f64).ln())
}

/// `EBIC = BIC + 4 gamma |E| log p`.
pub fn ebic_score(
    fit: &FitResult,
    chat: &CorrelationMatrix,
    n: usize,
    gamma_ebic: f64,
) -> Result<f64> {
    let bic = bic_score(fit, chat, n)?;
    Ok(bic + 4.0 * gamma_ebic * fit.nnz_offdiag() as f64 * (chat.p() as f64).ln())
}

fn validate_grid(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig("empty penalty grid".into()));
    }
    for w in lambdas.windows(2) {
        if w[1] > w[0] {
            return Err(Error::InvalidConfig(
                "penalty grid must be non-increasing".into(),
            ));
        }
    }
    if lambdas.iter().any(|l| *l < 0.0) {
        return Err(Error::InvalidConfig(
            "penalties must be non-negative".into(),
        ));
    }
    Ok(())
}

fn score_fit(
    f: &Result<FitResult>,
    chat: &CorrelationMatrix,
    n: usize,
    gamma_ebic: f64,
) -> (Option<usize>, Option<ScoreTriple>) {
    match f {
        Ok(f) if f.converged => {
            let edges = f.nnz_offdiag();
            let triple = gaussian_loglik(&f.precision(), chat.entries(), n)
                .ok()
                .map(|ll| {
                    let bic = -2.0 * ll + edges as f64 * (n as f64).ln();
                    ScoreTriple {
                        loglik: ll,
                        bic,
                        ebic: bic + 4.0 * gamma_ebic * edges as f64 * (chat.p() as f64).ln(),
                    }
                });
            (Some(edges), triple)
        }
        Ok(f) => (Some(f.nnz_offdiag()), None),
        Err(_) => (None, None),
    }
}

/// Fit along a non-increasing penalty grid with warm starts: the first grid
/// point starts from the configured initialization, each later one from the
/// previous solution (including its dual). Duplicate grid values reuse the
/// previous fit verbatim.
pub fn lambda_path(
    chat: &CorrelationMatrix,
    lambdas: &[f64],
    alpha: f64,
    cfg: &SolverConfig,
    n: usize,
    gamma_ebic: f64,
) -> Result<PathResult> {
    validate_grid(lambdas)?;
    let mut fits: Vec<Result<FitResult>> = Vec::with_capacity(lambdas.len());
    let mut carry: Option<(Array2<f64>, Array2<f64>, Array1<f64>)> = None;
    for (i, &lambda) in lambdas.iter().enumerate() {
        if i > 0 && lambda == lambdas[i - 1] {
            let repeat = match &fits[i - 1] {
                Ok(f) => Ok(f.clone()),
                Err(_) => fit_at(chat, cfg, lambda, alpha, &carry),
            };
            fits.push(repeat);
            continue;
        }
        let res = fit_at(chat, cfg, lambda, alpha, &carry);
        if let Ok(f) = &res {
            let l = linalg::cholesky(&f.fact.r);
            if let Some(l) = l {
                carry = Some((f.fact.r.clone(), linalg::chol_inverse(&l), f.fact.d.clone()));
            }
        }
        fits.push(res);
    }
    let mut edge_counts = Vec::with_capacity(fits.len());
    let mut scores = Vec::with_capacity(fits.len());
    for f in &fits {
        let (e, s) = score_fit(f, chat, n, gamma_ebic);
        edge_counts.push(e);
        scores.push(s);
    }
    Ok(PathResult {
        lambdas: lambdas.to_vec(),
        fits,
        edge_counts,
        scores,
    })
}

fn fit_at(
    chat: &CorrelationMatrix,
    cfg: &SolverConfig,
    lambda: f64,
    alpha: f64,
    carry: &Option<(Array2<f64>, Array2<f64>, Array1<f64>)>,
) -> Result<FitResult> {
    let mut c = cfg.clone();
    c.lambda = lambda;
    c.alpha = alpha;
    match carry {
        None => fit(chat, &c, None),
        Some((r, w, d)) => {
            // Single chained run reusing the dual as well; restarts are a
            // cold-start concept and do not apply mid-path.
            let start = std::time::Instant::now();
            let run = crate::fit::run_bcd(chat, &c, r.clone(), w.clone(), d.clone())?;
            Ok(FitResult {
                fact: crate::matrix::PrecisionFactorization {
                    r: run.r,
                    d: run.d,
                    scale: None,
                },
                fact_cov: None,
                w: run.w,
                objective_trace: run.trace,
                stationarity_residual: run.residual,
                outer_iters: run.iters,
                wall_time: start.elapsed(),
                converged: run.converged,
                lambda,
                alpha,
            })
        }
    }
}

/// Cold-start variant of [`lambda_path`]: every grid point starts from the
/// configured initialization and points are fitted concurrently.
pub fn lambda_path_parallel(
    chat: &CorrelationMatrix,
    lambdas: &[f64],
    alpha: f64,
    cfg: &SolverConfig,
    n: usize,
    gamma_ebic: f64,
) -> Result<PathResult> {
    validate_grid(lambdas)?;
    let fits: Vec<Result<FitResult>> = lambdas
        .par_iter()
        .map(|&lambda| {
            let mut c = cfg.clone();
            c.lambda = lambda;
            c.alpha = alpha;
            fit(chat, &c, None)
        })
        .collect();
    let mut edge_counts = Vec::with_capacity(fits.len());
    let mut scores = Vec::with_capacity(fits.len());
    for f in &fits {
        let (e, s) = score_fit(f, chat, n, gamma_ebic);
        edge_counts.push(e);
        scores.push(s);
    }
    Ok(PathResult {
        lambdas: lambdas.to_vec(),
        fits,
        edge_counts,
        scores,
    })
}

/// K-fold cross-validation over a penalty grid. Folds are assigned by a
/// seeded shuffle; per fold the model is fitted on the training correlation
/// matrix and its covariance-scale estimate is scored against the held-out
/// fold's sample covariance. Deterministic for a fixed seed.
pub fn cross_validate(
    data: &SampleData,
    lambda_grid: &[f64],
    alpha: f64,
    folds: usize,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<CvResult> {
    validate_grid(lambda_grid)?;
    let n = data.n();
    if folds < 2 {
        return Err(Error::InvalidConfig("need at least 2 folds".into()));
    }
    if n < 2 * folds {
        return Err(Error::InvalidInput(format!(
            "need n >= 2*folds observations for per-fold covariances, got n={n}, folds={folds}"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let assignments: Vec<Vec<usize>> = (0..folds)
        .map(|f| order.iter().copied().skip(f).step_by(folds).collect())
        .collect();

    // Per fold, mean held-out loglik per grid point; folds run concurrently
    // and reduce in fold order.
    let per_fold: Vec<Result<Vec<f64>>> = assignments
        .par_iter()
        .map(|test_idx| -> Result<Vec<f64>> {
            let mut is_test = vec![false; n];
            for &i in test_idx {
                is_test[i] = true;
            }
            let train_idx: Vec<usize> = (0..n).filter(|i| !is_test[*i]).collect();
            let train = data.subset(&train_idx)?;
            let test = data.subset(test_idx)?;
            let (chat, scale) = correlation_from_data(&train)?;
            let s_test = test.covariance();
            let mut out: Vec<f64> = Vec::with_capacity(lambda_grid.len());
            let mut carry: Option<(Array2<f64>, Array2<f64>, Array1<f64>)> = None;
            for (gi, &lambda) in lambda_grid.iter().enumerate() {
                if gi > 0 && lambda == lambda_grid[gi - 1] {
                    let prev = out[gi - 1];
                    out.push(prev);
                    continue;
                }
                let mut c = cfg.clone();
                c.lambda = lambda;
                c.alpha = alpha;
                let f = match &carry {
                    None => fit(&chat, &c, Some(&scale)),
                    Some(_) => fit_at(&chat, &c, lambda, alpha, &carry),
                }?;
                if let Some(l) = linalg::cholesky(&f.fact.r) {
                    carry = Some((f.fact.r.clone(), linalg::chol_inverse(&l), f.fact.d.clone()));
                }
                // Covariance-scale estimate against the held-out covariance.
                let d_cov = &f.fact.d * &scale;
                let p = chat.p();
                let mut k_cov = Array2::<f64>::zeros((p, p));
                for i in 0..p {
                    for j in 0..p {
                        k_cov[(i, j)] = d_cov[i] * f.fact.r[(i, j)] * d_cov[j];
                    }
                }
                out.push(loglik_psd(&k_cov, &s_test, test.n())?);
            }
            Ok(out)
        })
        .collect();

    let mut mean = vec![0.0_f64; lambda_grid.len()];
    for fold in per_fold {
        let fold = fold?;
        for (m, v) in mean.iter_mut().zip(fold.iter()) {
            *m += v / folds as f64;
        }
    }
    let mut best = 0usize;
    for (i, v) in mean.iter().enumerate() {
        if *v > mean[best] {
            best = i;
        }
    }
    Ok(CvResult {
        folds,
        lambda_grid: lambda_grid.to_vec(),
        mean_heldout_loglik: mean,
        selected_lambda: lambda_grid[best],
    })
}

/// Log-spaced non-increasing grid from `hi` down to `lo`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 1);
    if count == 1 {
        return vec![hi];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (lhi + (llo - lhi) * i as f64 / (count - 1) as f64).exp())
        .collect()
}
