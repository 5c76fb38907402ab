//! Irrepresentability diagnostics for asymptotic sign recovery.
//!
//! For a true precision matrix `K* = D* R* D*` with support `S` (the index
//! pairs where `K*` is nonzero, diagonal included), the partial-correlation
//! estimator recovers the sign pattern asymptotically when
//!
//! ```text
//! || G_{S^c S} (G_{S S})^{-1} vec(Pi)_S ||_inf < 1
//! ```
//!
//! where `Pi` holds the off-diagonal signs of `K*` and `G` is built from
//! `R*` alone — replacing the diagonal-index rows of `R*^{-1} (x) R*^{-1}`
//! by the symmetrized single-sided action of `R*^{-1}`:
//!
//! ```text
//! G = P_offdiag (R*^{-1} (x) R*^{-1})
//!   + (1/2) P_diag ((R*^{-1} (x) I) + (I (x) R*^{-1}))
//! ```
//!
//! Because only `R*` enters, the value is invariant under diagonal rescaling
//! of the variables. The classical graphical-lasso condition uses
//! `Sigma* (x) Sigma*` instead and is not scale-invariant. Vectorization is
//! column-major throughout: `vec(X)[i + j*p] = X[i][j]`.
//!
//! For hub graphs (one center connected to all spokes) both conditions have
//! closed forms, used by the heatmap generator and cross-checked here against
//! the generic construction.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::linalg;
use crate::matrix::factorize_precision;
use crate::{Error, Result};

/// Largest dimension for which the dense `p^2 x p^2` construction is
/// attempted (memory grows as `p^4`).
pub const MAX_GENERIC_DIM: usize = 60;

/// Detection threshold for support entries; inputs are exact constructions,
/// so this only guards round-off noise.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Index pairs where the true precision matrix is nonzero (diagonal
/// included), and their complement.
#[derive(Debug, Clone)]
pub struct SupportSet {
    pub pairs: Vec<(usize, usize)>,
    pub complement: Vec<(usize, usize)>,
    p: usize,
}

impl SupportSet {
    pub fn from_matrix(k: &Array2<f64>, tol: f64) -> Self {
        let p = k.nrows();
        let mut pairs = Vec::new();
        let mut complement = Vec::new();
        for j in 0..p {
            for i in 0..p {
                if k[(i, j)].abs() > tol || i == j {
                    pairs.push((i, j));
                } else {
                    complement.push((i, j));
                }
            }
        }
        Self {
            pairs,
            complement,
            p,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Column-major vec indices of the support.
    fn vec_indices(&self) -> Vec<usize> {
        self.pairs.iter().map(|&(i, j)| i + j * self.p).collect()
    }

    fn vec_indices_complement(&self) -> Vec<usize> {
        self.complement
            .iter()
            .map(|&(i, j)| i + j * self.p)
            .collect()
    }
}

/// Sign-recovery feasibility summary for a true precision matrix.
#[derive(Debug, Clone, Copy)]
pub struct IrrReport {
    pub irr_pcg: f64,
    pub irr_glasso: f64,
    pub pcg_satisfied: bool,
    pub glasso_satisfied: bool,
    pub pd_input: bool,
}

/// Orthogonal projector onto diagonal coordinates of `vec(X)`.
pub fn diag_projector(p: usize) -> Array2<f64> {
    let mut m = Array2::<f64>::zeros((p * p, p * p));
    for i in 0..p {
        let idx = i + i * p;
        m[(idx, idx)] = 1.0;
    }
    m
}

/// The vec-operator `I - (1/2) P_diag ((I (x) R) + (R (x) I))`, the
/// correlation-normalization part of the Jacobian of `K -> R`.
pub fn correlation_jacobian_factor(r: &Array2<f64>) -> Array2<f64> {
    let p = r.nrows();
    let mut m = Array2::<f64>::eye(p * p);
    // Only diagonal-index rows are modified: row (i + i p) subtracts
    // (1/2) [(I (x) R) + (R (x) I)] restricted to that row.
    for i in 0..p {
        let row = i + i * p;
        for l in 0..p {
            for k in 0..p {
                let col = k + l * p;
                // (I (x) R)[(i+ip),(k+lp)] = R[i,k] when l == i;
                // (R (x) I)[(i+ip),(k+lp)] = R[i,l] when k == i.
                let mut v = 0.0;
                if l == i {
                    v += r[(i, k)];
                }
                if k == i {
                    v += r[(i, l)];
                }
                if v != 0.0 {
                    m[(row, col)] -= 0.5 * v;
                }
            }
        }
    }
    m
}

/// `correlation_jacobian_factor` completed to invertibility by adding the
/// diagonal projector.
pub fn completed_jacobian_factor(r: &Array2<f64>) -> Array2<f64> {
    let p = r.nrows();
    let mut m = correlation_jacobian_factor(r);
    for i in 0..p {
        let idx = i + i * p;
        m[(idx, idx)] += 1.0;
    }
    m
}

/// Closed-form inverse of [`completed_jacobian_factor`]:
/// `P_offdiag + (1/2) P_diag ((I (x) R) + (R (x) I))`.
pub fn completed_jacobian_inverse(r: &Array2<f64>) -> Array2<f64> {
    let p = r.nrows();
    let mut m = Array2::<f64>::eye(p * p);
    for i in 0..p {
        let row = i + i * p;
        m[(row, row)] = 0.0;
        for l in 0..p {
            for k in 0..p {
                let col = k + l * p;
                let mut v = 0.0;
                if l == i {
                    v += r[(i, k)];
                }
                if k == i {
                    v += r[(i, l)];
                }
                if v != 0.0 {
                    m[(row, col)] += 0.5 * v;
                }
            }
        }
    }
    m
}

/// The sign-recovery matrix built from a unit-diagonal positive definite
/// `R*`: off-diagonal-index rows of `R*^{-1} (x) R*^{-1}`, diagonal-index
/// rows replaced by the symmetrized single-sided action of `R*^{-1}`.
pub fn gamma_tilde(r_star: &Array2<f64>) -> Result<Array2<f64>> {
    let p = r_star.nrows();
    if p > MAX_GENERIC_DIM {
        return Err(Error::InvalidInput(format!(
            "dense construction limited to p <= {MAX_GENERIC_DIM} (memory grows as p^4), got {p}"
        )));
    }
    for i in 0..p {
        if (r_star[(i, i)] - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput("R* must have unit diagonal".into()));
        }
    }
    let l = linalg::cholesky(r_star).ok_or_else(|| {
        Error::NotPositiveDefinite("gamma_tilde: R* is not positive definite".into())
    })?;
    let rinv = linalg::chol_inverse(&l);
    let mut g = linalg::kron(&rinv, &rinv);
    for i in 0..p {
        let row = i + i * p;
        for col in 0..p * p {
            g[(row, col)] = 0.0;
        }
        for l_idx in 0..p {
            for k in 0..p {
                let col = k + l_idx * p;
                let mut v = 0.0;
                if l_idx == i {
                    v += rinv[(i, k)];
                }
                if k == i {
                    v += rinv[(i, l_idx)];
                }
                if v != 0.0 {
                    g[(row, col)] = 0.5 * v;
                }
            }
        }
    }
    Ok(g)
}

/// `|| G_{S^c S} (G_{S S})^{-1} vec(Pi)_S ||_inf` for a given recovery matrix
/// and support; zero when the complement is empty.
fn irr_value(g: &Array2<f64>, k_star: &Array2<f64>, support: &SupportSet) -> Result<f64> {
    let s_idx = support.vec_indices();
    let sc_idx = support.vec_indices_complement();
    if sc_idx.is_empty() {
        return Ok(0.0);
    }
    let ns = s_idx.len();
    let mut gss = Array2::<f64>::zeros((ns, ns));
    for (a, &ma) in s_idx.iter().enumerate() {
        for (b, &mb) in s_idx.iter().enumerate() {
            gss[(a, b)] = g[(ma, mb)];
        }
    }
    let p = support.p();
    let mut pi_s = ndarray::Array1::<f64>::zeros(ns);
    for (a, &(i, j)) in support.pairs.iter().enumerate() {
        if i != j {
            pi_s[a] = k_star[(i, j)].signum();
        }
    }
    let u = linalg::lu_solve(&gss, &pi_s).ok_or_else(|| {
        Error::NonConvergence("support block of the recovery matrix is numerically singular".into())
    })?;
    let mut worst = 0.0_f64;
    for &mc in &sc_idx {
        let mut acc = 0.0;
        for (b, &mb) in s_idx.iter().enumerate() {
            acc += g[(mc, mb)] * u[b];
        }
        worst = worst.max(acc.abs());
    }
    let _ = p;
    Ok(worst)
}

/// Scale-invariant irrepresentability value of a positive definite `K*`.
pub fn irr_pcglasso(k_star: &Array2<f64>) -> Result<f64> {
    let fact = factorize_precision(k_star)?;
    let g = gamma_tilde(&fact.r)?;
    let support = SupportSet::from_matrix(k_star, SUPPORT_TOL);
    irr_value(&g, k_star, &support)
}

/// Classical graphical-lasso irrepresentability value, computed from the
/// covariance `Sigma*` with `K* = Sigma*^{-1}` and `G = Sigma* (x) Sigma*`.
pub fn irr_glasso(sigma_star: &Array2<f64>) -> Result<f64> {
    let p = sigma_star.nrows();
    if p > MAX_GENERIC_DIM {
        return Err(Error::InvalidInput(format!(
            "dense construction limited to p <= {MAX_GENERIC_DIM}, got {p}"
        )));
    }
    let l = linalg::cholesky(sigma_star).ok_or_else(|| {
        Error::NotPositiveDefinite("irr_glasso: covariance is not positive definite".into())
    })?;
    let k_star = linalg::chol_inverse(&l);
    let g = linalg::kron(sigma_star, sigma_star);
    let support = SupportSet::from_matrix(&k_star, SUPPORT_TOL);
    irr_value(&g, &k_star, &support)
}

/// Both irrepresentability values for a positive definite `K*`.
pub fn irr_report(k_star: &Array2<f64>) -> Result<IrrReport> {
    let pcg = irr_pcglasso(k_star)?;
    let l = linalg::cholesky(k_star).ok_or_else(|| {
        Error::NotPositiveDefinite("irr_report: K* is not positive definite".into())
    })?;
    let sigma = linalg::chol_inverse(&l);
    let glasso = irr_glasso(&sigma)?;
    Ok(IrrReport {
        irr_pcg: pcg,
        irr_glasso: glasso,
        pcg_satisfied: pcg < 1.0,
        glasso_satisfied: glasso < 1.0,
        pd_input: true,
    })
}

/// Closed-form hub values.
#[derive(Debug, Clone, Copy)]
pub struct HubIrr {
    /// `|c|/sqrt(ab) * (2 - (p-1) c^2/(ab))`
    pub pcg: f64,
    /// `2 |c| / b`
    pub glasso: f64,
    /// `c^2/(ab) < 1/(p-1)`
    pub pd: bool,
}

/// Closed forms for the hub matrix with center weight `a`, spoke weight `b`,
/// and center-spoke entries `c` on `p` vertices.
pub fn hub_irr_closed_form(a: f64, b: f64, c: f64, p: usize) -> HubIrr {
    let ratio = c * c / (a * b);
    HubIrr {
        pcg: c.abs() / (a * b).sqrt() * (2.0 - (p as f64 - 1.0) * ratio),
        glasso: 2.0 * c.abs() / b,
        pd: ratio < 1.0 / (p as f64 - 1.0),
    }
}

/// One heatmap cell.
#[derive(Debug, Clone, Copy)]
pub struct HeatmapCell {
    pub a: f64,
    pub c: f64,
    pub irr_pcg: f64,
    pub irr_glasso: f64,
    pub pd: bool,
}

/// Evaluate the hub closed forms on an `(a, c)` grid, cross-validating a
/// seeded 5% sample of comfortably positive definite cells against the
/// generic constructions to `1e-8`.
pub fn irr_heatmap(
    a_grid: &[f64],
    c_grid: &[f64],
    b: f64,
    p: usize,
    seed: u64,
) -> Result<Vec<HeatmapCell>> {
    if a_grid.is_empty() || c_grid.is_empty() {
        return Err(Error::InvalidInput(
            "heatmap grids must be non-empty".into(),
        ));
    }
    if !(b > 0.0) || p < 2 {
        return Err(Error::InvalidInput("need b > 0 and p >= 2".into()));
    }
    if a_grid.iter().chain(c_grid.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("heatmap grids must be finite".into()));
    }
    let cells: Vec<HeatmapCell> = a_grid
        .iter()
        .flat_map(|&a| c_grid.iter().map(move |&c| (a, c)))
        .map(|(a, c)| {
            let h = hub_irr_closed_form(a, b, c, p);
            HeatmapCell {
                a,
                c,
                irr_pcg: h.pcg,
                irr_glasso: h.glasso,
                pd: h.pd,
            }
        })
        .collect();

    // Sample PD cells away from the PD boundary for the generic cross-check.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin =
        |cell: &HeatmapCell| cell.pd && cell.c * cell.c / (cell.a * b) < 0.9 / (p as f64 - 1.0);
    let candidates: Vec<usize> = (0..cells.len()).filter(|&i| margin(&cells[i])).collect();
    let sample_size = (candidates.len() / 20).max(1).min(candidates.len());
    let sample: Vec<usize> = candidates
        .choose_multiple(&mut rng, sample_size)
        .copied()
        .collect();
    let failures: Vec<String> = sample
        .par_iter()
        .filter_map(|&idx| {
            let cell = &cells[idx];
            match cross_check_cell(cell, b, p) {
                Ok(()) => None,
                Err(e) => Some(format!("cell (a={}, c={}): {e}", cell.a, cell.c)),
            }
        })
        .collect();
    if let Some(msg) = failures.first() {
        return Err(Error::NonConvergence(format!(
            "closed-form/generic cross-check failed: {msg}"
        )));
    }
    Ok(cells)
}

fn cross_check_cell(cell: &HeatmapCell, b: f64, p: usize) -> Result<()> {
    let k = hub_matrix(cell.a, b, cell.c, p);
    let pcg = irr_pcglasso(&k)?;
    let l = linalg::cholesky(&k)
        .ok_or_else(|| Error::NotPositiveDefinite("hub matrix not PD".into()))?;
    let sigma = linalg::chol_inverse(&l);
    let gl = irr_glasso(&sigma)?;
    if (pcg - cell.irr_pcg).abs() > 1e-8 {
        return Err(Error::NonConvergence(format!(
            "pcg generic {pcg} vs closed form {}",
            cell.irr_pcg
        )));
    }
    if (gl - cell.irr_glasso).abs() > 1e-8 {
        return Err(Error::NonConvergence(format!(
            "glasso generic {gl} vs closed form {}",
            cell.irr_glasso
        )));
    }
    Ok(())
}

pub(crate) fn hub_matrix(a: f64, b: f64, c: f64, p: usize) -> Array2<f64> {
    let mut k = Array2::<f64>::eye(p) * b;
    k[(0, 0)] = a;
    for i in 1..p {
        k[(0, i)] = c;
        k[(i, 0)] = c;
    }
    k
}
