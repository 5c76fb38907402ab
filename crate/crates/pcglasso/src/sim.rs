//! Synthetic ground truths, Gaussian sampling, recovery metrics, and the
//! study/benchmark runners.
//!
//! Generators cover hub graphs (one center tied to all spokes — the regime
//! where the partial-correlation penalty provably dominates), block-diagonal
//! hub layouts, parameterized hubs, chains, and seeded random sparse block
//! structures for no-hub baselines. Studies draw `n` samples from
//! `Sigma = K*^{-1}`, run each method with the chosen selection rule over a
//! per-replicate penalty grid, and aggregate RMSE and sign-accuracy metrics
//! against `K*`. Replicates own independent seeded RNG streams and reduce in
//! replicate order, so reports are bit-reproducible for a fixed seed
//! (timing fields excepted).

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::dsolve::{self, DSolveConfig, ScalingProblem};
use crate::fit::{fit, glasso_fit_tol, SolverConfig};
use crate::linalg;
use crate::matrix::{
    correlation_from_covariance, correlation_from_data, min_eigenvalue, SampleData,
};
use crate::rsolve;
use crate::select::{self, cross_validate, lambda_path, log_grid};
use crate::{Error, Result};

/// Ground-truth precision structures.
#[derive(Debug, Clone)]
pub enum Structure {
    /// Unit diagonal, center-spoke entries `-1/sqrt(p)`.
    Hub { p: usize },
    /// Block-diagonal with a hub in every block.
    BlockHub { p: usize, blocks: usize },
    /// Hub with explicit center weight `a`, spoke weight `b`, tie `c`.
    GeneralHub { a: f64, b: f64, c: f64, p: usize },
    /// Tridiagonal chain with off-diagonal `rho`.
    Chain { p: usize, rho: f64 },
}

impl Structure {
    pub fn precision(&self) -> Result<Array2<f64>> {
        match *self {
            Structure::Hub { p } => hub_precision(p),
            Structure::BlockHub { p, blocks } => block_hub_precision(p, blocks),
            Structure::GeneralHub { a, b, c, p } => general_hub_precision(a, b, c, p),
            Structure::Chain { p, rho } => chain_precision(p, rho),
        }
    }
}

/// Hub precision: `K_ii = 1`, `K_1i = -1/sqrt(p)`. Positive definite for all
/// `p >= 2` since `(p-1)/p < 1`.
pub fn hub_precision(p: usize) -> Result<Array2<f64>> {
    if p < 2 {
        return Err(Error::InvalidInput("hub needs p >= 2".into()));
    }
    let mut k = Array2::<f64>::eye(p);
    let c = -1.0 / (p as f64).sqrt();
    for i in 1..p {
        k[(0, i)] = c;
        k[(i, 0)] = c;
    }
    Ok(k)
}

/// Parameterized hub; rejected when `(p-1) c^2 >= a b` (not positive
/// definite).
pub fn general_hub_precision(a: f64, b: f64, c: f64, p: usize) -> Result<Array2<f64>> {
    if p < 2 || !(a > 0.0) || !(b > 0.0) {
        return Err(Error::InvalidInput(
            "hub needs p >= 2 and positive diagonal weights".into(),
        ));
    }
    let h = crate::irr::hub_irr_closed_form(a, b, c, p);
    if !h.pd {
        return Err(Error::NotPositiveDefinite(format!(
            "hub parameters give (p-1) c^2 = {} >= ab = {}",
            (p as f64 - 1.0) * c * c,
            a * b
        )));
    }
    let mut k = Array2::<f64>::eye(p) * b;
    k[(0, 0)] = a;
    for i in 1..p {
        k[(0, i)] = c;
        k[(i, 0)] = c;
    }
    Ok(k)
}

/// Block-diagonal matrix with `blocks` hubs of size `p / blocks` each.
pub fn block_hub_precision(p: usize, blocks: usize) -> Result<Array2<f64>> {
    if blocks == 0 || !p.is_multiple_of(blocks) {
        return Err(Error::InvalidInput(format!(
            "p = {p} must be divisible into {blocks} equal blocks"
        )));
    }
    let size = p / blocks;
    if size < 2 {
        return Err(Error::InvalidInput("block size must be >= 2".into()));
    }
    let block = hub_precision(size)?;
    let mut k = Array2::<f64>::zeros((p, p));
    for bi in 0..blocks {
        let off = bi * size;
        for i in 0..size {
            for j in 0..size {
                k[(off + i, off + j)] = block[(i, j)];
            }
        }
    }
    Ok(k)
}

/// Tridiagonal chain `K_ii = 1`, `K_{i,i+1} = rho`; rejected when not
/// positive definite.
pub fn chain_precision(p: usize, rho: f64) -> Result<Array2<f64>> {
    if p < 2 {
        return Err(Error::InvalidInput("chain needs p >= 2".into()));
    }
    let mut k = Array2::<f64>::eye(p);
    for i in 0..p - 1 {
        k[(i, i + 1)] = rho;
        k[(i + 1, i)] = rho;
    }
    if min_eigenvalue(&k) <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "chain with rho = {rho} is not PD"
        )));
    }
    Ok(k)
}

/// Seeded block-diagonal random sparse precision: unit diagonal, entries
/// placed with probability `density` inside each block, magnitudes scaled to
/// keep strict diagonal dominance (hence positive definiteness). A no-hub
/// baseline structure.
pub fn sparse_block_precision(
    p: usize,
    blocks: usize,
    density: f64,
    seed: u64,
) -> Result<Array2<f64>> {
    if blocks == 0 || !p.is_multiple_of(blocks) || p / blocks < 2 {
        return Err(Error::InvalidInput("need equal blocks of size >= 2".into()));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidInput("density must be in [0, 1]".into()));
    }
    let size = p / blocks;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k = Array2::<f64>::eye(p);
    for b in 0..blocks {
        let off = b * size;
        for i in 0..size {
            for j in (i + 1)..size {
                if rng.random_range(0.0..1.0) < density {
                    let mag: f64 = rng.random_range(0.3..0.6);
                    let sign = if rng.random_range(0.0..1.0) < 0.5 {
                        -1.0
                    } else {
                        1.0
                    };
                    k[(off + i, off + j)] = sign * mag;
                    k[(off + j, off + i)] = sign * mag;
                }
            }
        }
        // Scale each block's off-diagonals to keep every row sum below 0.9.
        let mut worst = 0.0_f64;
        for i in 0..size {
            let mut row = 0.0;
            for j in 0..size {
                if i != j {
                    row += k[(off + i, off + j)].abs();
                }
            }
            worst = worst.max(row);
        }
        if worst > 0.9 {
            let scale = 0.9 / worst;
            for i in 0..size {
                for j in 0..size {
                    if i != j {
                        k[(off + i, off + j)] *= scale;
                    }
                }
            }
        }
    }
    Ok(k)
}

/// Random correlation matrix (unit diagonal, PD) with a conditioning ridge.
pub fn random_correlation(p: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut g = Array2::<f64>::zeros((p, 2 * p));
    for v in g.iter_mut() {
        *v = rng.sample::<f64, _>(StandardNormal);
    }
    let mut m = g.dot(&g.t());
    for i in 0..p {
        m[(i, i)] += 0.5 * p as f64;
    }
    let (c, _) = correlation_from_covariance(&m).expect("construction is PD");
    c.entries().clone()
}

/// Random symmetric positive definite matrix with a small ridge.
pub fn random_spd(p: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut g = Array2::<f64>::zeros((p, p + 2));
    for v in g.iter_mut() {
        *v = rng.sample::<f64, _>(StandardNormal);
    }
    let mut m = g.dot(&g.t());
    for i in 0..p {
        m[(i, i)] += 0.5;
    }
    linalg::symmetrize(&mut m);
    m
}

/// Draw `n` rows of `N(0, Sigma)` via the lower Cholesky factor;
/// deterministic per seed.
pub fn sample_gaussian(sigma: &Array2<f64>, n: usize, seed: u64) -> Result<SampleData> {
    let p = sigma.nrows();
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput("need n >= 1 and p >= 1".into()));
    }
    let l = linalg::cholesky(sigma).ok_or_else(|| {
        Error::NotPositiveDefinite("sampling covariance is not positive definite".into())
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Array2::<f64>::zeros((n, p));
    let mut z = Array1::<f64>::zeros(p);
    for r in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample::<f64, _>(StandardNormal);
        }
        for i in 0..p {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += l[(i, j)] * z[j];
            }
            rows[(r, i)] = acc;
        }
    }
    Ok(SampleData::from_centered(rows))
}

/// Root-mean-square errors over the whole matrix, the diagonal, and the
/// nonzero off-diagonal entries of the truth (absent when the truth is
/// diagonal).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RmseMetrics {
    pub full: f64,
    pub diag: f64,
    pub offdiag_nz: Option<f64>,
}

pub fn rmse_metrics(k_hat: &Array2<f64>, k_star: &Array2<f64>) -> RmseMetrics {
    let p = k_star.nrows();
    assert_eq!(k_hat.nrows(), p, "shape mismatch");
    let mut full = 0.0;
    let mut diag = 0.0;
    let mut nz = 0.0;
    let mut nz_count = 0usize;
    for i in 0..p {
        for j in 0..p {
            let e = k_hat[(i, j)] - k_star[(i, j)];
            full += e * e;
            if i == j {
                diag += e * e;
            } else if k_star[(i, j)] != 0.0 {
                nz += e * e;
                nz_count += 1;
            }
        }
    }
    RmseMetrics {
        full: (full / (p * p) as f64).sqrt(),
        diag: (diag / p as f64).sqrt(),
        offdiag_nz: if nz_count > 0 {
            Some((nz / nz_count as f64).sqrt())
        } else {
            None
        },
    }
}

/// Fraction of off-diagonal pairs whose sign (after thresholding the
/// estimate at `tol`) matches the truth.
pub fn sign_accuracy(k_hat: &Array2<f64>, k_star: &Array2<f64>, tol: f64) -> f64 {
    let p = k_star.nrows();
    assert_eq!(k_hat.nrows(), p, "shape mismatch");
    if p < 2 {
        return 1.0;
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for i in 0..p {
        for j in (i + 1)..p {
            total += 1;
            let est = if k_hat[(i, j)].abs() <= tol {
                0.0
            } else {
                k_hat[(i, j)].signum()
            };
            let truth = if k_star[(i, j)] == 0.0 {
                0.0
            } else {
                k_star[(i, j)].signum()
            };
            if est == truth {
                hits += 1;
            }
        }
    }
    hits as f64 / total as f64
}

/// Estimation methods compared by the studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pcglasso,
    Glasso,
    CorrGlasso,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Pcglasso => "pcglasso",
            Method::Glasso => "glasso",
            Method::CorrGlasso => "corr_glasso",
        }
    }
}

/// Hyperparameter selection rules.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Bic,
    Ebic { gamma: f64 },
    Cv { folds: usize },
}

/// Study specification.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub structure: Structure,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub selection: Selection,
    pub seed: u64,
    /// Diagonal-penalty weight for the partial-correlation method.
    pub alpha: f64,
    /// Penalty-grid resolution per replicate.
    pub grid_size: usize,
}

impl StudyConfig {
    pub fn new(structure: Structure) -> Self {
        Self {
            structure,
            n_grid: vec![500],
            replicates: 20,
            methods: vec![Method::Pcglasso, Method::Glasso],
            selection: Selection::Bic,
            seed: 0,
            alpha: 0.0,
            grid_size: 30,
        }
    }
}

/// One replicate's metrics.
#[derive(Debug, Clone, Serialize)]
pub struct RawRecord {
    pub method: Method,
    pub n: usize,
    pub replicate: usize,
    pub rmse: RmseMetrics,
    pub sign_accuracy: f64,
    pub wall_ms: f64,
}

/// Mean and standard deviation over replicates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
}

fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary {
            mean: f64::NAN,
            sd: 0.0,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Summary { mean, sd: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    Summary {
        mean,
        sd: var.sqrt(),
    }
}

/// Aggregated metrics for one method at one sample size.
#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub method: Method,
    pub n: usize,
    pub rmse_full: Summary,
    pub rmse_diag: Summary,
    pub rmse_offdiag_nz: Option<Summary>,
    pub sign_accuracy: Summary,
    pub wall_ms: Summary,
    pub failures: usize,
}

/// Full study output: aggregates plus per-replicate records.
#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub replicates: usize,
    pub rows: Vec<StudyRow>,
    pub raw: Vec<RawRecord>,
}

/// Run the study described by `cfg`.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    let k_star = cfg.structure.precision()?;
    run_study_matrix(&k_star, cfg)
}

/// Run a study against an explicit ground-truth precision matrix; the
/// configuration's `structure` field is ignored.
pub fn run_study_matrix(k_star: &Array2<f64>, cfg: &StudyConfig) -> Result<StudyReport> {
    if cfg.replicates == 0 || cfg.n_grid.is_empty() || cfg.methods.is_empty() {
        return Err(Error::InvalidConfig(
            "study needs replicates, sample sizes, and methods".into(),
        ));
    }
    if cfg.grid_size == 0 {
        return Err(Error::InvalidConfig("grid_size must be >= 1".into()));
    }
    let l = linalg::cholesky(k_star).ok_or_else(|| {
        Error::NotPositiveDefinite("ground-truth precision is not positive definite".into())
    })?;
    let sigma = linalg::chol_inverse(&l);

    let mut rows = Vec::new();
    let mut raw = Vec::new();
    for (n_idx, &n) in cfg.n_grid.iter().enumerate() {
        for &method in &cfg.methods {
            let outcomes: Vec<Result<RawRecord>> = (0..cfg.replicates)
                .into_par_iter()
                .map(|rep| {
                    let seed = stream_seed(cfg.seed, n_idx as u64, rep as u64);
                    let data = sample_gaussian(&sigma, n, seed)?;
                    let start = Instant::now();
                    let k_hat = estimate(
                        method,
                        &cfg.selection,
                        &data,
                        cfg.alpha,
                        cfg.grid_size,
                        seed,
                    )?;
                    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                    Ok(RawRecord {
                        method,
                        n,
                        replicate: rep,
                        rmse: rmse_metrics(&k_hat, k_star),
                        sign_accuracy: sign_accuracy(&k_hat, k_star, 1e-10),
                        wall_ms,
                    })
                })
                .collect();
            let mut ok = Vec::new();
            let mut failures = 0;
            for o in outcomes {
                match o {
                    Ok(r) => ok.push(r),
                    Err(_) => failures += 1,
                }
            }
            let full: Vec<f64> = ok.iter().map(|r| r.rmse.full).collect();
            let diag: Vec<f64> = ok.iter().map(|r| r.rmse.diag).collect();
            let nz: Vec<f64> = ok.iter().filter_map(|r| r.rmse.offdiag_nz).collect();
            let acc: Vec<f64> = ok.iter().map(|r| r.sign_accuracy).collect();
            let wall: Vec<f64> = ok.iter().map(|r| r.wall_ms).collect();
            rows.push(StudyRow {
                method,
                n,
                rmse_full: summarize(&full),
                rmse_diag: summarize(&diag),
                rmse_offdiag_nz: if nz.is_empty() {
                    None
                } else {
                    Some(summarize(&nz))
                },
                sign_accuracy: summarize(&acc),
                wall_ms: summarize(&wall),
                failures,
            });
            raw.extend(ok);
        }
    }
    Ok(StudyReport {
        replicates: cfg.replicates,
        rows,
        raw,
    })
}

/// One estimate on covariance scale, with selection over a per-replicate
/// penalty grid.
fn estimate(
    method: Method,
    selection: &Selection,
    data: &SampleData,
    alpha: f64,
    grid_size: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    match method {
        Method::Pcglasso => {
            let (chat, scale) = correlation_from_data(data)?;
            let lam_max = ((1.0 - alpha) * chat.max_abs_offdiag()).max(0.02);
            let lam_min = (0.01_f64).min(0.5 * lam_max);
            let grid = log_grid(lam_min, lam_max, grid_size);
            let cfg = SolverConfig::new(0.0, alpha);
            let lambda = match selection {
                Selection::Bic | Selection::Ebic { .. } => {
                    let gamma = match selection {
                        Selection::Ebic { gamma } => *gamma,
                        _ => 0.0,
                    };
                    let path = lambda_path(&chat, &grid, alpha, &cfg, data.n(), gamma)?;
                    let idx = match selection {
                        Selection::Bic => path.best_bic(),
                        _ => path.best_ebic(),
                    }
                    .ok_or_else(|| Error::NonConvergence("no converged fit on the path".into()))?;
                    grid[idx]
                }
                Selection::Cv { folds } => {
                    cross_validate(data, &grid, alpha, *folds, &cfg, seed)?.selected_lambda
                }
            };
            let mut final_cfg = SolverConfig::new(lambda, alpha);
            final_cfg.init = crate::fit::Init::Identity;
            let f = fit(&chat, &final_cfg, Some(&scale))?;
            f.precision_cov()
                .ok_or_else(|| Error::InvalidInput("missing covariance-scale estimate".into()))
        }
        Method::Glasso => {
            let s = data.covariance();
            glasso_with_selection(&s, None, selection, grid_size, data, seed)
        }
        Method::CorrGlasso => {
            let (chat, scale) = correlation_from_data(data)?;
            // The helper maps the correlation-scale estimate back to
            // covariance scale through the supplied scale vector.
            glasso_with_selection(chat.entries(), Some(&scale), selection, grid_size, data, seed)
        }
    }
}

/// Graphical lasso with BIC/EBIC/CV selection on its input matrix; when a
/// scale vector is given the input is a correlation matrix and the estimate
/// is mapped back to covariance scale.
fn glasso_with_selection(
    s: &Array2<f64>,
    scale: Option<&Array1<f64>>,
    selection: &Selection,
    grid_size: usize,
    data: &SampleData,
    seed: u64,
) -> Result<Array2<f64>> {
    let lam_max = linalg::max_abs_offdiag(s).max(0.02);
    let lam_min = (0.01_f64 * lam_max.max(1.0)).min(0.5 * lam_max);
    let grid = log_grid(lam_min, lam_max, grid_size);
    let n = data.n();
    let tol = rsolve::default_r_tolerance(s);
    let lambda = match selection {
        Selection::Bic | Selection::Ebic { .. } => {
            let gamma = match selection {
                Selection::Ebic { gamma } => *gamma,
                _ => 0.0,
            };
            let p = s.nrows() as f64;
            let mut best: Option<(f64, f64)> = None;
            for &lam in &grid {
                let Ok(k) = glasso_fit_tol(s, lam, tol) else {
                    continue;
                };
                let Ok(ll) = select::gaussian_loglik(&k, s, n) else {
                    continue;
                };
                let edges = nnz_offdiag_pairs(&k) as f64;
                let score = -2.0 * ll + edges * (n as f64).ln() + 4.0 * gamma * edges * p.ln();
                if best.is_none_or(|(b, _)| score < b) {
                    best = Some((score, lam));
                }
            }
            best.ok_or_else(|| Error::NonConvergence("no graphical lasso fit succeeded".into()))?
                .1
        }
        Selection::Cv { folds } => glasso_cv(data, scale.is_some(), &grid, *folds, seed)?,
    };
    let k = glasso_fit_tol(s, lambda, tol)?;
    match scale {
        None => Ok(k),
        Some(h) => {
            let p = k.nrows();
            let mut out = Array2::<f64>::zeros((p, p));
            for i in 0..p {
                for j in 0..p {
                    out[(i, j)] = h[i] * k[(i, j)] * h[j];
                }
            }
            Ok(out)
        }
    }
}

fn glasso_cv(
    data: &SampleData,
    on_correlation: bool,
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<f64> {
    let n = data.n();
    if folds < 2 || n < 2 * folds {
        return Err(Error::InvalidConfig(
            "cv folds incompatible with sample size".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut mean = vec![0.0_f64; grid.len()];
    for f in 0..folds {
        let test_idx: Vec<usize> = order.iter().copied().skip(f).step_by(folds).collect();
        let mut is_test = vec![false; n];
        for &i in &test_idx {
            is_test[i] = true;
        }
        let train_idx: Vec<usize> = (0..n).filter(|i| !is_test[*i]).collect();
        let train = data.subset(&train_idx)?;
        let test = data.subset(&test_idx)?;
        let s_test = test.covariance();
        let (input, scale) = if on_correlation {
            let (c, sc) = correlation_from_data(&train)?;
            (c.entries().clone(), Some(sc))
        } else {
            (train.covariance(), None)
        };
        let tol = rsolve::default_r_tolerance(&input);
        for (gi, &lam) in grid.iter().enumerate() {
            let k = glasso_fit_tol(&input, lam, tol)?;
            let k_cov = match &scale {
                None => k,
                Some(h) => {
                    let p = k.nrows();
                    let mut out = Array2::<f64>::zeros((p, p));
                    for i in 0..p {
                        for j in 0..p {
                            out[(i, j)] = h[i] * k[(i, j)] * h[j];
                        }
                    }
                    out
                }
            };
            mean[gi] += select::loglik_psd(&k_cov, &s_test, test.n())? / folds as f64;
        }
    }
    let mut best = 0usize;
    for (i, v) in mean.iter().enumerate() {
        if *v > mean[best] {
            best = i;
        }
    }
    Ok(grid[best])
}

fn nnz_offdiag_pairs(k: &Array2<f64>) -> usize {
    let p = k.nrows();
    let mut count = 0;
    for i in 0..p {
        for j in (i + 1)..p {
            if k[(i, j)] != 0.0 {
                count += 1;
            }
        }
    }
    count
}

/// Deterministic per-replicate stream seed (splitmix-style mixing).
fn stream_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One timing row of the diagonal-vs-exact Newton benchmark.
#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub p: usize,
    pub solver: String,
    pub mean_ms: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Benchmark outcome: per-dimension timings plus the worst entrywise
/// disagreement between the two solvers across all instances.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<TimingRow>,
    pub max_disagreement: f64,
}

/// Time the diagonal-Hessian and exact Newton scaling solvers on seeded
/// random problems and verify they agree.
pub fn bench_d_solvers(p_grid: &[usize], replicates: usize, seed: u64) -> Result<BenchReport> {
    if p_grid.is_empty() || replicates == 0 {
        return Err(Error::InvalidConfig(
            "benchmark needs dimensions and replicates".into(),
        ));
    }
    let cfg = DSolveConfig {
        tol: 1e-12,
        grad_tol: Some(1e-9),
        max_iter: 500,
        ..Default::default()
    };
    let mut rows = Vec::new();
    let mut max_gap = 0.0_f64;
    for (pi, &p) in p_grid.iter().enumerate() {
        let mut t_diag = Vec::with_capacity(replicates);
        let mut t_exact = Vec::with_capacity(replicates);
        for rep in 0..replicates {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, pi as u64, rep as u64));
            let r = random_correlation(p, &mut rng);
            let chat_entries = random_correlation(p, &mut rng);
            let chat = crate::matrix::CorrelationMatrix::from_entries(chat_entries)?;
            let prob = dsolve::build_scaling_problem(&r, &chat, 0.0)?;
            let init = Array1::<f64>::ones(p);

            let start = Instant::now();
            let diag = dsolve::solve_d_diagonal_newton(&prob, &cfg, &init)?;
            t_diag.push(start.elapsed().as_secs_f64() * 1e3);

            let start = Instant::now();
            let exact = dsolve::solve_d_exact_newton(&prob, &cfg, &init)?;
            t_exact.push(start.elapsed().as_secs_f64() * 1e3);

            for i in 0..p {
                max_gap = max_gap.max((diag.d[i] - exact.d[i]).abs());
            }
        }
        for (name, times) in [("diagonal", &t_diag), ("exact", &t_exact)] {
            let s = summarize(times);
            let half = 1.96 * s.sd / (replicates as f64).sqrt();
            rows.push(TimingRow {
                p,
                solver: name.to_string(),
                mean_ms: s.mean,
                ci_lo: s.mean - half,
                ci_hi: s.mean + half,
            });
        }
    }
    Ok(BenchReport {
        rows,
        max_disagreement: max_gap,
    })
}

/// One row of a per-iteration solver trace.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DTraceRow {
    pub iter: usize,
    pub objective: f64,
    pub grad_norm: f64,
    /// Accepted step size that produced this iterate (0 at the start).
    pub step: f64,
}

/// Per-iteration trace of the diagonal solver on a seeded random problem;
/// feeds the iteration CSV emitted by the benchmark command.
pub fn d_solver_trace(p: usize, seed: u64) -> Result<Vec<DTraceRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = random_correlation(p, &mut rng);
    let chat = crate::matrix::CorrelationMatrix::from_entries(random_correlation(p, &mut rng))?;
    let prob: ScalingProblem = dsolve::build_scaling_problem(&r, &chat, 0.0)?;
    let cfg = DSolveConfig {
        tol: 1e-12,
        grad_tol: Some(1e-9),
        ..Default::default()
    };
    let res = dsolve::solve_d_diagonal_newton(&prob, &cfg, &Array1::<f64>::ones(p))?;
    Ok(res
        .objective_trace
        .iter()
        .zip(res.grad_trace.iter())
        .enumerate()
        .map(|(i, (&f, &g))| DTraceRow {
            iter: i,
            objective: f,
            grad_norm: g,
            step: if i == 0 { 0.0 } else { res.step_trace[i - 1] },
        })
        .collect())
}
