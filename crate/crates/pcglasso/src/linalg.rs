//! Dense symmetric linear algebra kernels used across the crate.
//!
//! Everything here operates on `ndarray` storage: Cholesky factorization and
//! the solves/inverses built on it, LU with partial pivoting for the few
//! non-symmetric systems, and a Householder-tridiagonalization plus
//! Sturm-bisection eigenvalue routine. Only dense matrices of moderate size
//! are targeted.

use ndarray::{Array1, Array2};

/// Force exact bitwise symmetry via `(M + M^T) / 2`, writing the same value
/// into both mirror positions.
pub fn symmetrize(m: &mut Array2<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest absolute entry.
pub fn inf_norm(m: &Array2<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest absolute off-diagonal entry.
pub fn max_abs_offdiag(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut best = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                best = best.max(m[(i, j)].abs());
            }
        }
    }
    best
}

/// Maximum relative asymmetry `|m_ij - m_ji|`.
pub fn asymmetry(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`
/// if a non-positive pivot is hit.
pub fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return None;
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[(i, j)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solve `A x = b` given the lower Cholesky factor `L` of `A`.
pub fn chol_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[(i, k)] * y[k];
        }
        y[i] = sum / l[(i, i)];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[(k, i)] * x[k];
        }
        x[i] = sum / l[(i, i)];
    }
    x
}

/// `log det A` from the lower Cholesky factor of `A`.
pub fn chol_logdet(l: &Array2<f64>) -> f64 {
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
}

/// Inverse of a symmetric positive definite matrix from its Cholesky factor.
/// The result is explicitly symmetrized.
pub fn chol_inverse(l: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut inv = Array2::<f64>::zeros((n, n));
    let mut e = Array1::<f64>::zeros(n);
    for j in 0..n {
        e.fill(0.0);
        e[j] = 1.0;
        let col = chol_solve(l, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    symmetrize(&mut inv);
    inv
}

/// Inverse of a symmetric positive definite matrix, or `None` if the
/// factorization fails.
pub fn spd_inverse(a: &Array2<f64>) -> Option<Array2<f64>> {
    cholesky(a).map(|l| chol_inverse(&l))
}

/// Solve a general square system `A x = b` by LU with partial pivoting.
/// Returns `None` on (numerical) singularity.
pub fn lu_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return None;
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].abs();
        for i in (k + 1)..n {
            let v = lu[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return None;
        }
        if p != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = t;
            }
            piv.swap(k, p);
            x.swap(k, p);
        }
        for i in (k + 1)..n {
            let f = lu[(i, k)] / lu[(k, k)];
            lu[(i, k)] = f;
            for j in (k + 1)..n {
                lu[(i, j)] -= f * lu[(k, j)];
            }
            x[i] -= f * x[k];
        }
    }
    for i in (0..n).rev() {
        let mut sum = x[i];
        for j in (i + 1)..n {
            sum -= lu[(i, j)] * x[j];
        }
        x[i] = sum / lu[(i, i)];
    }
    Some(x)
}

/// Householder reduction of a symmetric matrix to tridiagonal form.
/// Returns the diagonal and the sub-diagonal.
fn householder_tridiag(a: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut e = vec![0.0_f64; n.saturating_sub(1)];
    if n > 2 {
        for k in 0..(n - 2) {
            let m = n - k - 1; // size of the trailing column piece
            let mut norm2 = 0.0;
            for i in (k + 1)..n {
                norm2 += a[(i, k)] * a[(i, k)];
            }
            let norm = norm2.sqrt();
            if norm == 0.0 {
                e[k] = 0.0;
                continue;
            }
            let x0 = a[(k + 1, k)];
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            // v = x - alpha e1, normalized
            let mut v = vec![0.0_f64; m];
            for i in 0..m {
                v[i] = a[(k + 1 + i, k)];
            }
            v[0] -= alpha;
            let vn = v.iter().map(|t| t * t).sum::<f64>().sqrt();
            if vn == 0.0 {
                e[k] = alpha;
                continue;
            }
            for t in v.iter_mut() {
                *t /= vn;
            }
            // u = B v on the trailing block
            let mut u = vec![0.0_f64; m];
            for i in 0..m {
                let mut s = 0.0;
                for j in 0..m {
                    s += a[(k + 1 + i, k + 1 + j)] * v[j];
                }
                u[i] = s;
            }
            let kvu: f64 = v.iter().zip(u.iter()).map(|(x, y)| x * y).sum();
            // w = u - (v'u) v ; B <- B - 2 v w' - 2 w v'
            let w: Vec<f64> = u
                .iter()
                .zip(v.iter())
                .map(|(ui, vi)| ui - kvu * vi)
                .collect();
            for i in 0..m {
                for j in 0..m {
                    a[(k + 1 + i, k + 1 + j)] -= 2.0 * (v[i] * w[j] + w[i] * v[j]);
                }
            }
            a[(k + 1, k)] = alpha;
            a[(k, k + 1)] = alpha;
            e[k] = alpha;
        }
    }
    if n >= 2 {
        e[n - 2] = a[(n - 1, n - 2)];
    }
    let d: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    (d, e)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`,
/// via the Sturm LDL^T recurrence.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let n = d.len();
    let mut count = 0usize;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let off = e[i - 1];
        let denom = if q == 0.0 { 1e-300 } else { q };
        q = (d[i] - x) - off * off / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn tridiag_eigenvalue(d: &[f64], e: &[f64], index: usize, lo0: f64, hi0: f64) -> f64 {
    let mut lo = lo0;
    let mut hi = hi0;
    let scale = lo.abs().max(hi.abs()).max(1.0);
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(d, e, mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * scale {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn gershgorin_bounds(d: &[f64], e: &[f64]) -> (f64, f64) {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut r = 0.0;
        if i > 0 {
            r += e[i - 1].abs();
        }
        if i + 1 < n {
            r += e[i].abs();
        }
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    (
        lo - 1e-12 * (hi - lo).abs().max(1.0),
        hi + 1e-12 * (hi - lo).abs().max(1.0),
    )
}

/// All eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![a[(0, 0)]];
    }
    let (d, e) = householder_tridiag(a);
    let (lo, hi) = gershgorin_bounds(&d, &e);
    (0..n)
        .map(|k| tridiag_eigenvalue(&d, &e, k, lo, hi))
        .collect()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    if n == 1 {
        return a[(0, 0)];
    }
    let (d, e) = householder_tridiag(a);
    let (lo, hi) = gershgorin_bounds(&d, &e);
    tridiag_eigenvalue(&d, &e, 0, lo, hi)
}

/// Kronecker product `A (x) B` for square matrices of equal size.
///
/// With column-major vectorization `vec(X)[i + j*p] = X[i][j]`, the product
/// satisfies `(A (x) B) vec(X) = vec(B X A^T)`.
pub fn kron(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let p = a.nrows();
    let q = b.nrows();
    let mut out = Array2::<f64>::zeros((p * q, p * q));
    for ia in 0..p {
        for ja in 0..p {
            let av = a[(ia, ja)];
            if av == 0.0 {
                continue;
            }
            for ib in 0..q {
                for jb in 0..q {
                    out[(ia * q + ib, ja * q + jb)] = av * b[(ib, jb)];
                }
            }
        }
    }
    out
}
