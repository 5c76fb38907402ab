//! Correlation-factor subproblem: unit-diagonal graphical lasso via the dual.
//!
//! With `D` held fixed and `S = D C D`, the factor solves
//!
//! ```text
//! min over unit-diagonal PD R:  -log det(R) + tr(R S) + lambda ||R||_1,off
//! ```
//!
//! whose dual maximizes `log det(W) - tr(W)` over the box
//! `|W_ij - S_ij| <= lambda` (off-diagonal only); at the optimum `W = R^{-1}`.
//! Columns of `W` are updated in turn; each column update is a lasso
//! regression solved by coordinate descent. During the sweeps the working
//! matrix `B` stores the lasso coefficients of each column (`beta`), and the
//! solution is recovered at the end as `R = -B` with the diagonal set to one
//! — mind this sign convention when reading the inner loop. The diagonal of
//! `W` is updated as `W_jj = 1 + W_.j^T B_.j`, which pins the corresponding
//! diagonal entry of `R` to exactly one.
//!
//! Convergence bookkeeping per column uses the l1 change of the off-diagonal
//! part of the column plus the change of the diagonal entry against its
//! pre-update value; folding both into one norm over the whole column would
//! count the fixed `+1` diagonal offset forever.

use ndarray::{Array1, Array2};

use crate::linalg;
use crate::{Error, Result};

/// `sign(x) * max(|x| - lambda, 0)`.
pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// Per-sweep progress statistics.
#[derive(Debug, Clone)]
pub struct SweepStat {
    pub sweep: usize,
    pub delta_max: f64,
    /// Unordered off-diagonal pairs currently active in the working matrix.
    pub nnz_offdiag: usize,
}

/// Full solver outcome including per-sweep trace.
#[derive(Debug, Clone)]
pub struct RSolveOutcome {
    pub r: Array2<f64>,
    pub w: Array2<f64>,
    pub sweeps: usize,
    pub trace: Vec<SweepStat>,
}

/// Dual feasibility and KKT diagnostics for a solved pair `(R, W)`.
#[derive(Debug, Clone)]
pub struct DualFeasibilityReport {
    /// `max_{i != j} (|W_ij - S_ij| - lambda)_+`.
    pub max_offdiag_violation: f64,
    /// `max_i |(R W)_ii - 1|`.
    pub diag_residual: f64,
    /// Entries with `r_ij != 0` whose dual coordinate is off the box face
    /// prescribed by `sign(r_ij)`.
    pub kkt_sign_violations: usize,
}

/// Default convergence threshold: `1e-7` times the mean absolute
/// off-diagonal entry of `S`, floored away from zero.
pub fn default_r_tolerance(s: &Array2<f64>) -> f64 {
    let p = s.nrows();
    let mut sum = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                sum += s[(i, j)].abs();
            }
        }
    }
    let mean = if p > 1 {
        sum / (p * (p - 1)) as f64
    } else {
        0.0
    };
    (1e-7 * mean).max(1e-12 * (1.0 + linalg::inf_norm(s)))
}

const MAX_SWEEPS: usize = 10_000;
// Ill-scaled inputs (diagonals far from 1) make the first sweeps grind at a
// linear rate close to 1; passes are O(p^2), so a generous cap is cheap.
const MAX_INNER: usize = 200_000;
// Refresh the incrementally updated product column to cancel round-off drift.
const V_REFRESH: usize = 512;

/// Solve the unit-diagonal problem; returns `(R, W)` with `W ~ R^{-1}`.
///
/// `warm` supplies a previous `(R0, W0)` pair; otherwise the solver cold
/// starts from `B = 0`, `W = I`. `S` may be positive semidefinite when
/// `lambda > 0`; at `lambda = 0` it must be positive definite or the primal
/// is unbounded.
pub fn solve_r(
    s: &Array2<f64>,
    lambda: f64,
    tol: f64,
    warm: Option<(&Array2<f64>, &Array2<f64>)>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    solve_r_full(s, lambda, tol, warm).map(|o| (o.r, o.w))
}

/// As [`solve_r`], returning sweep counts and the per-sweep trace.
pub fn solve_r_full(
    s: &Array2<f64>,
    lambda: f64,
    tol: f64,
    warm: Option<(&Array2<f64>, &Array2<f64>)>,
) -> Result<RSolveOutcome> {
    let p = validate_s(s, lambda, tol)?;
    if lambda == 0.0 && linalg::cholesky(s).is_none() {
        return Err(Error::NotPositiveDefinite(
            "S is singular and lambda = 0: the primal is unbounded below".into(),
        ));
    }

    let (mut b, mut w) = match warm {
        None => (Array2::<f64>::zeros((p, p)), Array2::<f64>::eye(p)),
        Some((r0, w0)) => {
            if r0.nrows() != p || r0.ncols() != p || w0.nrows() != p || w0.ncols() != p {
                return Err(Error::InvalidInput(
                    "warm start dimensions do not match S".into(),
                ));
            }
            let mut b = r0.mapv(|v| -v);
            for i in 0..p {
                b[(i, i)] = 0.0;
            }
            (b, w0.clone())
        }
    };

    let mut trace = Vec::new();
    let mut sweeps = 0;
    let mut best_outer = f64::INFINITY;
    let mut outer_checkpoint = f64::INFINITY;
    let mut tau_inner = tol;
    loop {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            return Err(Error::NonConvergence(format!(
                "column sweeps exceeded {MAX_SWEEPS} (tol {tol})"
            )));
        }
        let mut delta_outer = 0.0_f64;
        for j in 0..p {
            // v holds the j-th column of W * B throughout the lasso loop.
            let mut v = Array1::<f64>::zeros(p);
            for k in 0..p {
                let bkj = b[(k, j)];
                if bkj != 0.0 {
                    for i in 0..p {
                        v[i] += w[(i, k)] * bkj;
                    }
                }
            }
            let mut inner = 0;
            let mut best_delta = f64::INFINITY;
            let mut checkpoint = f64::INFINITY;
            loop {
                inner += 1;
                if inner > MAX_INNER {
                    return Err(Error::NonConvergence(format!(
                        "lasso iterations exceeded {MAX_INNER} in column {j}"
                    )));
                }
                if inner.is_multiple_of(V_REFRESH) {
                    v.fill(0.0);
                    for k in 0..p {
                        let bkj = b[(k, j)];
                        if bkj != 0.0 {
                            for i in 0..p {
                                v[i] += w[(i, k)] * bkj;
                            }
                        }
                    }
                }
                let mut delta_max = 0.0_f64;
                for i in 0..p {
                    if i == j {
                        continue;
                    }
                    let wii = w[(i, i)];
                    let c = soft_threshold(s[(i, j)] - v[i] + wii * b[(i, j)], lambda) / wii;
                    let delta = c - b[(i, j)];
                    if delta != 0.0 {
                        b[(i, j)] = c;
                        for t in 0..p {
                            v[t] += delta * w[(t, i)];
                        }
                        delta_max = delta_max.max(delta.abs());
                    }
                }
                if delta_max * (p as f64) < tau_inner {
                    break;
                }
                // Plateau check every 200 passes: a converging tail keeps
                // improving, a floating-point floor does not.
                best_delta = best_delta.min(delta_max);
                if inner.is_multiple_of(200) {
                    if best_delta > 0.99 * checkpoint {
                        break;
                    }
                    checkpoint = best_delta;
                }
            }
            // Column replacement: l1 change over the off-diagonal entries.
            let mut col_change = 0.0;
            for i in 0..p {
                if i != j {
                    col_change += (w[(i, j)] - v[i]).abs();
                }
            }
            delta_outer = delta_outer.max(col_change);
            for i in 0..p {
                if i != j {
                    w[(i, j)] = v[i];
                    w[(j, i)] = v[i];
                }
            }
            // Diagonal update W_jj = 1 + W_.j^T B_.j (B_jj = 0, so the j-th
            // term never contributes).
            let mut wjj = 1.0;
            for i in 0..p {
                if i != j {
                    wjj += w[(i, j)] * b[(i, j)];
                }
            }
            delta_outer = delta_outer.max((wjj - w[(j, j)]).abs());
            w[(j, j)] = wjj;
        }
        trace.push(SweepStat {
            sweep: sweeps,
            delta_max: delta_outer,
            nnz_offdiag: nnz_pairs(&b),
        });
        if delta_outer < tol {
            break;
        }
        // Plateau handling: the sweep change bottoms out at roughly the
        // inner threshold amplified by the scale of W. Tighten the inner
        // threshold and keep sweeping; give up only at the round-off floor.
        best_outer = best_outer.min(delta_outer);
        if sweeps.is_multiple_of(64) {
            if best_outer > 0.99 * outer_checkpoint {
                let noise = fp_noise_floor(s, &w, p);
                if best_outer <= noise {
                    break;
                }
                let floor = 16.0 * f64::EPSILON * (1.0 + linalg::inf_norm(s));
                if tau_inner > floor {
                    tau_inner = (tau_inner * 0.1).max(floor);
                } else {
                    return Err(Error::NonConvergence(format!(
                        "sweep change stagnated at {best_outer} (tol {tol}, noise floor {noise})"
                    )));
                }
            }
            outer_checkpoint = best_outer;
        }
    }

    // Finalize: R = -B, unit diagonal, explicit symmetrization.
    let mut r = b.mapv(|v| -v);
    for i in 0..p {
        r[(i, i)] = 1.0;
    }
    linalg::symmetrize(&mut r);
    Ok(RSolveOutcome {
        r,
        w,
        sweeps,
        trace,
    })
}

/// Classical graphical lasso with the off-diagonal-only penalty,
/// `min -log det K + tr(K S) + lambda ||K||_1,off`, via the same column-wise
/// dual coordinate descent. The dual box pins the diagonal, `W_ii = S_ii`.
pub(crate) fn glasso_core(s: &Array2<f64>, lambda: f64, tol: f64) -> Result<Array2<f64>> {
    let p = validate_s(s, lambda, tol)?;
    if linalg::cholesky(s).is_none() {
        return Err(Error::NotPositiveDefinite(
            "graphical lasso input must be positive definite".into(),
        ));
    }

    let mut w = s.clone();
    let mut b = Array2::<f64>::zeros((p, p));
    let mut sweeps = 0;
    let mut best_outer = f64::INFINITY;
    let mut outer_checkpoint = f64::INFINITY;
    let mut tau_inner = tol;
    loop {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            return Err(Error::NonConvergence(format!(
                "graphical lasso sweeps exceeded {MAX_SWEEPS}"
            )));
        }
        let mut delta_outer = 0.0_f64;
        for j in 0..p {
            let mut v = Array1::<f64>::zeros(p);
            for k in 0..p {
                let bkj = b[(k, j)];
                if bkj != 0.0 {
                    for i in 0..p {
                        v[i] += w[(i, k)] * bkj;
                    }
                }
            }
            let mut inner = 0;
            let mut best_delta = f64::INFINITY;
            let mut checkpoint = f64::INFINITY;
            loop {
                inner += 1;
                if inner > MAX_INNER {
                    return Err(Error::NonConvergence(format!(
                        "lasso iterations exceeded {MAX_INNER} in column {j}"
                    )));
                }
                if inner.is_multiple_of(V_REFRESH) {
                    v.fill(0.0);
                    for k in 0..p {
                        let bkj = b[(k, j)];
                        if bkj != 0.0 {
                            for i in 0..p {
                                v[i] += w[(i, k)] * bkj;
                            }
                        }
                    }
                }
                let mut delta_max = 0.0_f64;
                for i in 0..p {
                    if i == j {
                        continue;
                    }
                    let wii = w[(i, i)];
                    let c = soft_threshold(s[(i, j)] - v[i] + wii * b[(i, j)], lambda) / wii;
                    let delta = c - b[(i, j)];
                    if delta != 0.0 {
                        b[(i, j)] = c;
                        for t in 0..p {
                            v[t] += delta * w[(t, i)];
                        }
                        delta_max = delta_max.max(delta.abs());
                    }
                }
                if delta_max * (p as f64) < tau_inner {
                    break;
                }
                // Plateau check every 200 passes: a converging tail keeps
                // improving, a floating-point floor does not.
                best_delta = best_delta.min(delta_max);
                if inner.is_multiple_of(200) {
                    if best_delta > 0.99 * checkpoint {
                        break;
                    }
                    checkpoint = best_delta;
                }
            }
            let mut col_change = 0.0;
            for i in 0..p {
                if i != j {
                    col_change += (w[(i, j)] - v[i]).abs();
                }
            }
            delta_outer = delta_outer.max(col_change);
            for i in 0..p {
                if i != j {
                    w[(i, j)] = v[i];
                    w[(j, i)] = v[i];
                }
            }
        }
        if delta_outer < tol {
            break;
        }
        best_outer = best_outer.min(delta_outer);
        if sweeps.is_multiple_of(64) {
            if best_outer > 0.99 * outer_checkpoint {
                let noise = fp_noise_floor(s, &w, p);
                if best_outer <= noise {
                    break;
                }
                let floor = 16.0 * f64::EPSILON * (1.0 + linalg::inf_norm(s));
                if tau_inner > floor {
                    tau_inner = (tau_inner * 0.1).max(floor);
                } else {
                    return Err(Error::NonConvergence(format!(
                        "sweep change stagnated at {best_outer} (tol {tol}, noise floor {noise})"
                    )));
                }
            }
            outer_checkpoint = best_outer;
        }
    }

    // Recover K column by column: K_jj = 1 / (W_jj - w_j^T beta_j),
    // K_ij = -beta_ij K_jj.
    let mut k = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        let mut dot = 0.0;
        for i in 0..p {
            if i != j {
                dot += w[(i, j)] * b[(i, j)];
            }
        }
        let kjj = 1.0 / (w[(j, j)] - dot);
        k[(j, j)] = kjj;
        for i in 0..p {
            if i != j {
                k[(i, j)] = -b[(i, j)] * kjj;
            }
        }
    }
    linalg::symmetrize(&mut k);
    // Exact zeros survive symmetrization only where both mirror entries are
    // zero; coordinate descent produces them jointly at convergence, but make
    // the sparsity pattern exact regardless.
    for i in 0..p {
        for j in (i + 1)..p {
            if b[(i, j)] == 0.0 && b[(j, i)] == 0.0 {
                k[(i, j)] = 0.0;
                k[(j, i)] = 0.0;
            }
        }
    }
    Ok(k)
}

/// Box, diagonal, and KKT-face diagnostics for a candidate `(R, W)` pair.
pub fn check_dual_feasibility(
    r: &Array2<f64>,
    w: &Array2<f64>,
    s: &Array2<f64>,
    lambda: f64,
) -> DualFeasibilityReport {
    let p = s.nrows();
    let mut box_viol = 0.0_f64;
    let mut kkt = 0usize;
    let face_tol = 1e-8 * (1.0 + linalg::inf_norm(s));
    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            let gap = w[(i, j)] - s[(i, j)];
            box_viol = box_viol.max(gap.abs() - lambda);
            if r[(i, j)] != 0.0 {
                // Active entries sit on the box face: W_ij - S_ij = lambda sign(r_ij).
                if (gap - lambda * r[(i, j)].signum()).abs() > face_tol {
                    kkt += 1;
                }
            }
        }
    }
    let rw = r.dot(w);
    let mut diag_res = 0.0_f64;
    for i in 0..p {
        diag_res = diag_res.max((rw[(i, i)] - 1.0).abs());
    }
    DualFeasibilityReport {
        max_offdiag_violation: box_viol.max(0.0),
        diag_residual: diag_res,
        kkt_sign_violations: kkt,
    }
}

/// Round-off level of one column replacement: the l1 change accumulates
/// about `p` rounding errors at the magnitude of `W` and `S`.
fn fp_noise_floor(s: &Array2<f64>, w: &Array2<f64>, p: usize) -> f64 {
    let scale = 1.0 + linalg::inf_norm(s) + linalg::inf_norm(w);
    512.0 * f64::EPSILON * p as f64 * scale
}

fn nnz_pairs(b: &Array2<f64>) -> usize {
    let p = b.nrows();
    let mut count = 0;
    for i in 0..p {
        for j in (i + 1)..p {
            if b[(i, j)] != 0.0 || b[(j, i)] != 0.0 {
                count += 1;
            }
        }
    }
    count
}

fn validate_s(s: &Array2<f64>, lambda: f64, tol: f64) -> Result<usize> {
    let p = s.nrows();
    if p == 0 || s.ncols() != p {
        return Err(Error::InvalidInput("S must be square and non-empty".into()));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if linalg::asymmetry(s) > 1e-8 * linalg::inf_norm(s).max(1.0) {
        return Err(Error::InvalidInput("S must be symmetric".into()));
    }
    for i in 0..p {
        if !(s[(i, i)] > 0.0) {
            return Err(Error::InvalidInput(format!(
                "S has non-positive diagonal entry {} at {i}",
                s[(i, i)]
            )));
        }
    }
    Ok(p)
}
