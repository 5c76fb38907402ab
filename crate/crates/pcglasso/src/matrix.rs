//! Correlation preprocessing and the `K = D R D` factorization.
//!
//! All estimation in this crate runs on the sample correlation matrix; the
//! types here carry data from raw observations to that form and back. Sample
//! covariances use the `1/n` normalization; the correlation matrix is
//! invariant to that choice.

use ndarray::{Array1, Array2};

use crate::linalg;
use crate::{Error, Result};

/// Centered observation matrix, one row per observation.
#[derive(Debug, Clone)]
pub struct SampleData {
    n: usize,
    p: usize,
    rows: Array2<f64>,
}

impl SampleData {
    /// Load observations, subtracting column means. Requires `n >= 2`,
    /// `p >= 2`, and strictly positive sample variance in every column.
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        let (n, p) = (rows.nrows(), rows.ncols());
        if n < 2 || p < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 observations and 2 variables, got n={n}, p={p}"
            )));
        }
        for v in rows.iter() {
            if !v.is_finite() {
                return Err(Error::InvalidInput("non-finite observation".into()));
            }
        }
        let mut rows = rows;
        for j in 0..p {
            let mean = rows.column(j).sum() / n as f64;
            let mut var = 0.0;
            for i in 0..n {
                rows[(i, j)] -= mean;
                var += rows[(i, j)] * rows[(i, j)];
            }
            if var <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "column {j} has zero sample variance"
                )));
            }
        }
        Ok(Self { n, p, rows })
    }

    /// Rows already centered by construction (simulation output). Skips the
    /// variance check so degenerate boundary cases (n = 1) stay representable.
    pub(crate) fn from_centered(rows: Array2<f64>) -> Self {
        let (n, p) = (rows.nrows(), rows.ncols());
        Self { n, p, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    /// Sample covariance with `1/n` normalization.
    pub fn covariance(&self) -> Array2<f64> {
        let mut s = self.rows.t().dot(&self.rows);
        s.mapv_inplace(|v| v / self.n as f64);
        linalg::symmetrize(&mut s);
        s
    }

    /// Subset of observations by row index (used by cross-validation).
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let mut rows = Array2::<f64>::zeros((idx.len(), self.p));
        for (r, &i) in idx.iter().enumerate() {
            for j in 0..self.p {
                rows[(r, j)] = self.rows[(i, j)];
            }
        }
        SampleData::new(rows)
    }
}

/// Symmetric unit-diagonal correlation matrix with a cached smallest
/// eigenvalue.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    p: usize,
    entries: Array2<f64>,
    lambda_min: f64,
}

impl CorrelationMatrix {
    /// Validate and adopt a matrix as a correlation matrix: symmetric to
    /// machine precision, unit diagonal, entries in `[-1, 1]`, positive
    /// semidefinite (up to round-off).
    pub fn from_entries(entries: Array2<f64>) -> Result<Self> {
        let p = entries.nrows();
        if p == 0 || entries.ncols() != p {
            return Err(Error::InvalidInput(
                "correlation matrix must be square and non-empty".into(),
            ));
        }
        let mut entries = entries;
        if linalg::asymmetry(&entries) > 1e-8 {
            return Err(Error::InvalidInput(
                "correlation matrix is not symmetric".into(),
            ));
        }
        linalg::symmetrize(&mut entries);
        for i in 0..p {
            if (entries[(i, i)] - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidInput(format!(
                    "diagonal entry {} is {}, expected 1",
                    i,
                    entries[(i, i)]
                )));
            }
            entries[(i, i)] = 1.0;
        }
        for v in entries.iter_mut() {
            if !v.is_finite() || v.abs() > 1.0 + 1e-8 {
                return Err(Error::InvalidInput(format!("entry {v} outside [-1, 1]")));
            }
            *v = v.clamp(-1.0, 1.0);
        }
        let lambda_min = linalg::min_symmetric_eigenvalue(&entries);
        if lambda_min < -1e-8 * p as f64 {
            return Err(Error::NotPositiveDefinite(format!(
                "correlation matrix has eigenvalue {lambda_min}"
            )));
        }
        Ok(Self {
            p,
            entries,
            lambda_min,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// Smallest eigenvalue, cached at construction.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// `||C - I||_inf`, the largest absolute off-diagonal entry.
    pub fn max_abs_offdiag(&self) -> f64 {
        linalg::max_abs_offdiag(&self.entries)
    }
}

/// The `K = D R D` factorization of a positive definite matrix: `R` has unit
/// diagonal, `d` holds the positive diagonal of `D`. An optional `scale`
/// vector (`diag(Sigma)^{-1/2}`) maps the factorization from correlation
/// scale back to covariance scale.
#[derive(Debug, Clone)]
pub struct PrecisionFactorization {
    pub r: Array2<f64>,
    pub d: Array1<f64>,
    pub scale: Option<Array1<f64>>,
}

impl PrecisionFactorization {
    /// Compose `D R D`.
    pub fn compose(&self) -> Array2<f64> {
        compose_precision(self)
    }

    /// Compose on covariance scale, `(scale * d) R (scale * d)`, when a scale
    /// vector is present.
    pub fn compose_cov(&self) -> Option<Array2<f64>> {
        let scale = self.scale.as_ref()?;
        let d = &self.d * scale;
        Some(compose_with(&self.r, &d))
    }

    /// Number of nonzero off-diagonal pairs of `R` (exact-zero test).
    pub fn nnz_offdiag(&self) -> usize {
        let p = self.r.nrows();
        let mut count = 0;
        for i in 0..p {
            for j in (i + 1)..p {
                if self.r[(i, j)] != 0.0 {
                    count += 1;
                }
            }
        }
        count
    }
}

fn compose_with(r: &Array2<f64>, d: &Array1<f64>) -> Array2<f64> {
    let p = r.nrows();
    let mut k = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            k[(i, j)] = d[i] * r[(i, j)] * d[j];
        }
    }
    linalg::symmetrize(&mut k);
    k
}

/// Sample correlation matrix `C = H S H` with `H = diag(S)^{-1/2}`, plus the
/// diagonal of `H` as the scale vector.
pub fn correlation_from_data(data: &SampleData) -> Result<(CorrelationMatrix, Array1<f64>)> {
    correlation_from_covariance(&data.covariance())
}

/// Correlation matrix and scale vector from a covariance matrix.
///
/// Computed as `c_ij = s_ij / (sd_i * sd_j)` with `sd_i = sqrt(s_ii)`, so a
/// dyadic rescaling of the input reproduces the correlation matrix bit for
/// bit.
pub fn correlation_from_covariance(
    sigma: &Array2<f64>,
) -> Result<(CorrelationMatrix, Array1<f64>)> {
    let p = sigma.nrows();
    if p == 0 || sigma.ncols() != p {
        return Err(Error::InvalidInput(
            "covariance matrix must be square and non-empty".into(),
        ));
    }
    if linalg::asymmetry(sigma) > 1e-8 * linalg::inf_norm(sigma).max(1.0) {
        return Err(Error::InvalidInput(
            "covariance matrix is not symmetric".into(),
        ));
    }
    let mut sd = Array1::<f64>::zeros(p);
    for i in 0..p {
        let v = sigma[(i, i)];
        if !(v > 0.0) {
            return Err(Error::InvalidInput(format!(
                "variance of column {i} is {v}, must be positive"
            )));
        }
        sd[i] = v.sqrt();
    }
    let mut c = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            if i == j {
                c[(i, j)] = 1.0;
            } else {
                c[(i, j)] = sigma[(i, j)] / (sd[i] * sd[j]);
            }
        }
    }
    let scale = sd.mapv(|v| 1.0 / v);
    Ok((CorrelationMatrix::from_entries(c)?, scale))
}

/// Partial correlation matrix `P` of a positive definite `K`:
/// `P_ii = 1`, `P_ij = -K_ij / sqrt(K_ii K_jj)`.
pub fn partial_correlations(k: &Array2<f64>) -> Result<Array2<f64>> {
    let p = require_spd(k, "partial_correlations")?;
    let mut out = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            out[(i, j)] = if i == j {
                1.0
            } else {
                -k[(i, j)] / (k[(i, i)] * k[(j, j)]).sqrt()
            };
        }
    }
    linalg::symmetrize(&mut out);
    Ok(out)
}

/// Unique factorization `K = D R D` of a positive definite matrix:
/// `d_i = sqrt(K_ii)`, `R = D^{-1} K D^{-1}`.
pub fn factorize_precision(k: &Array2<f64>) -> Result<PrecisionFactorization> {
    let p = require_spd(k, "factorize_precision")?;
    let mut d = Array1::<f64>::zeros(p);
    for i in 0..p {
        d[i] = k[(i, i)].sqrt();
    }
    let mut r = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            r[(i, j)] = if i == j {
                1.0
            } else {
                k[(i, j)] / (d[i] * d[j])
            };
        }
    }
    linalg::symmetrize(&mut r);
    Ok(PrecisionFactorization { r, d, scale: None })
}

/// Compose `D R D` from a factorization.
pub fn compose_precision(f: &PrecisionFactorization) -> Array2<f64> {
    compose_with(&f.r, &f.d)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &Array2<f64>) -> f64 {
    debug_assert!(linalg::asymmetry(m) <= 1e-8 * linalg::inf_norm(m).max(1.0));
    linalg::min_symmetric_eigenvalue(m)
}

/// Check PD via Cholesky; returns dimension.
fn require_spd(k: &Array2<f64>, what: &str) -> Result<usize> {
    let p = k.nrows();
    if p == 0 || k.ncols() != p {
        return Err(Error::InvalidInput(format!(
            "{what}: matrix must be square and non-empty"
        )));
    }
    if linalg::asymmetry(k) > 1e-8 * linalg::inf_norm(k).max(1.0) {
        return Err(Error::InvalidInput(format!(
            "{what}: matrix is not symmetric"
        )));
    }
    if linalg::cholesky(k).is_none() {
        return Err(Error::NotPositiveDefinite(format!(
            "{what}: Cholesky factorization failed"
        )));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(p: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let mut g = Array2::<f64>::zeros((p, p + 2));
        for v in g.iter_mut() {
            *v = rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        let mut m = g.dot(&g.t());
        for i in 0..p {
            m[(i, i)] += 0.5;
        }
        linalg::symmetrize(&mut m);
        m
    }

    #[test]
    fn perfectly_correlated_columns() {
        // x, 2x and a distinct third column: c_12 = 1 up to round-off.
        let x = [1.0, -0.5, 2.0, 0.25, -1.75];
        let z = [0.3, 1.1, -0.7, 0.9, -2.0];
        let mut rows = Array2::<f64>::zeros((5, 3));
        for i in 0..5 {
            rows[(i, 0)] = x[i];
            rows[(i, 1)] = 2.0 * x[i];
            rows[(i, 2)] = z[i];
        }
        let data = SampleData::new(rows).unwrap();
        let (c, _) = correlation_from_data(&data).unwrap();
        assert!((c.entries()[(0, 1)] - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn orthogonal_columns_give_identity() {
        // Centered, mutually orthogonal columns with exact integer products.
        let rows = array![
            [1.0, 1.0, 1.0],
            [-1.0, 1.0, -1.0],
            [1.0, -1.0, -1.0],
            [-1.0, -1.0, 1.0]
        ];
        let data = SampleData::new(rows).unwrap();
        let (c, scale) = correlation_from_data(&data).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(c.entries()[(i, j)], want);
            }
        }
        // unit variances -> scale is all ones
        for i in 0..3 {
            assert_abs_diff_eq!(scale[i], 1.0, epsilon = 1e-12);
        }
    }

    // Direct Pearson-correlation oracle, computed pairwise from raw data.
    fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for (x, y) in xs.iter().zip(ys.iter()) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        sxy / (sxx.sqrt() * syy.sqrt())
    }

    #[test]
    fn seeded_dataset_matches_pearson_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut rows = Array2::<f64>::zeros((5, 3));
        for v in rows.iter_mut() {
            *v = rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        let cols: Vec<Vec<f64>> = (0..3).map(|j| rows.column(j).to_vec()).collect();
        let data = SampleData::new(rows).unwrap();
        let (c, _) = correlation_from_data(&data).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j {
                    1.0
                } else {
                    pearson(&cols[i], &cols[j])
                };
                assert_abs_diff_eq!(c.entries()[(i, j)], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_variance_column_rejected() {
        let rows = array![[1.0, 3.0], [2.0, 3.0], [3.0, 3.0]];
        assert!(matches!(SampleData::new(rows), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn intro_matrix_partial_correlations() {
        let k = array![[1.0, 1.0, 2.0], [1.0, 4.0, 3.0], [2.0, 3.0, 25.0]];
        let p = partial_correlations(&k).unwrap();
        let want = array![[1.0, -0.5, -0.4], [-0.5, 1.0, -0.3], [-0.4, -0.3, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(p[(i, j)], want[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_k_has_identity_partials() {
        let k = array![[2.0, 0.0], [0.0, 5.0]];
        let p = partial_correlations(&k).unwrap();
        assert_eq!(p[(0, 1)], 0.0);
        assert_eq!(p[(0, 0)], 1.0);
    }

    #[test]
    fn partials_agree_with_factorization_oracle() {
        // P(K) off-diagonals equal minus the off-diagonals of D^{-1} K D^{-1}.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = random_spd(4, &mut rng);
        let p = partial_correlations(&k).unwrap();
        let f = factorize_precision(&k).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_abs_diff_eq!(p[(i, j)], -f.r[(i, j)], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn partials_reject_non_pd() {
        let k = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            partial_correlations(&k),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn factorize_identity_and_scaling() {
        let f = factorize_precision(&Array2::<f64>::eye(3)).unwrap();
        for i in 0..3 {
            assert_eq!(f.d[i], 1.0);
            assert_eq!(f.r[(i, i)], 1.0);
        }
        let f = factorize_precision(&(Array2::<f64>::eye(3) * 4.0)).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(f.d[i], 2.0, epsilon = 1e-15);
            for j in 0..3 {
                assert_eq!(f.r[(i, j)], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn intro_matrix_r_is_minus_partials() {
        let k = array![[1.0, 1.0, 2.0], [1.0, 4.0, 3.0], [2.0, 3.0, 25.0]];
        let f = factorize_precision(&k).unwrap();
        let p = partial_correlations(&k).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_abs_diff_eq!(f.r[(i, j)], -p[(i, j)], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn compose_round_trips() {
        let f = PrecisionFactorization {
            r: Array2::<f64>::eye(3),
            d: array![1.0, 1.0, 1.0],
            scale: None,
        };
        assert_eq!(compose_precision(&f), Array2::<f64>::eye(3));
        let f = PrecisionFactorization {
            r: Array2::<f64>::eye(2),
            d: array![2.0, 3.0],
            scale: None,
        };
        let k = compose_precision(&f);
        assert_eq!(k[(0, 0)], 4.0);
        assert_eq!(k[(1, 1)], 9.0);
        assert_eq!(k[(0, 1)], 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let k = random_spd(5, &mut rng);
            let back = compose_precision(&factorize_precision(&k).unwrap());
            for i in 0..5 {
                for j in 0..5 {
                    assert_abs_diff_eq!(back[(i, j)], k[(i, j)], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert_abs_diff_eq!(min_eigenvalue(&Array2::<f64>::eye(4)), 1.0, epsilon = 1e-12);
        let d = array![[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]];
        assert_abs_diff_eq!(min_eigenvalue(&d), 1.0, epsilon = 1e-12);
        let c = array![[1.0, 0.6], [0.6, 1.0]];
        assert_abs_diff_eq!(min_eigenvalue(&c), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn correlation_matrix_validation() {
        assert!(CorrelationMatrix::from_entries(array![[1.0, 0.5], [0.4, 1.0]]).is_err());
        assert!(CorrelationMatrix::from_entries(array![[2.0, 0.0], [0.0, 1.0]]).is_err());
        assert!(CorrelationMatrix::from_entries(array![[1.0, 1.5], [1.5, 1.0]]).is_err());
        let ok = CorrelationMatrix::from_entries(array![[1.0, 0.3], [0.3, 1.0]]).unwrap();
        assert_abs_diff_eq!(ok.lambda_min(), 0.7, epsilon = 1e-12);
    }
}
