//! Diagonal-block subproblem: scaling a positive definite matrix.
//!
//! With `R` held fixed, the diagonal factor minimizes
//! `f(d) = (1/2) d^T A d - sum_i log d_i` with `A = (R .* C) / (1 - alpha)`,
//! whose unique stationary point solves the matrix-scaling system
//! `D A D e = e`. Two Newton variants are provided: the default approximates
//! the Hessian `A + D^{-2}` by its diagonal (`O(p^2)` per iteration), the
//! exact variant solves the full system (`O(p^3)`) and exists for
//! cross-checking and benchmarks. Both are safeguarded by a line search
//! enforcing the strong Wolfe conditions with `c1 = 1e-4`, `c2 = 0.9`.

use ndarray::{Array1, Array2};

use crate::linalg;
use crate::matrix::CorrelationMatrix;
use crate::{Error, Result};

/// The scaling system data: `A = (R .* C) / (1 - alpha)`.
#[derive(Debug, Clone)]
pub struct ScalingProblem {
    a: Array2<f64>,
    alpha: f64,
    lambda_min_chat: f64,
}

impl ScalingProblem {
    /// Wrap an explicit symmetric matrix (tests and benchmarks).
    pub fn from_matrix(a: Array2<f64>, alpha: f64, lambda_min_chat: f64) -> Result<Self> {
        if a.nrows() == 0 || a.nrows() != a.ncols() {
            return Err(Error::InvalidInput(
                "scaling matrix must be square and non-empty".into(),
            ));
        }
        if linalg::asymmetry(&a) > 1e-8 * linalg::inf_norm(&a).max(1.0) {
            return Err(Error::InvalidInput(
                "scaling matrix is not symmetric".into(),
            ));
        }
        if alpha >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha must be < 1, got {alpha}"
            )));
        }
        Ok(Self {
            a,
            alpha,
            lambda_min_chat: lambda_min_chat.max(0.0),
        })
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda_min_chat(&self) -> f64 {
        self.lambda_min_chat
    }

    pub fn p(&self) -> usize {
        self.a.nrows()
    }
}

/// Build `A = (R .* C) / (1 - alpha)` from a unit-diagonal `R` and a
/// correlation matrix. The Hadamard product of a positive definite `R` and a
/// correlation matrix is positive definite for any `alpha < 1`.
pub fn build_scaling_problem(
    r: &Array2<f64>,
    chat: &CorrelationMatrix,
    alpha: f64,
) -> Result<ScalingProblem> {
    if alpha >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "alpha must be < 1, got {alpha}"
        )));
    }
    let p = chat.p();
    if r.nrows() != p || r.ncols() != p {
        return Err(Error::InvalidInput(format!(
            "R is {}x{}, correlation matrix is {p}x{p}",
            r.nrows(),
            r.ncols()
        )));
    }
    let c = chat.entries();
    let scale = 1.0 / (1.0 - alpha);
    let mut a = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            a[(i, j)] = r[(i, j)] * c[(i, j)] * scale;
        }
    }
    linalg::symmetrize(&mut a);
    Ok(ScalingProblem {
        a,
        alpha,
        lambda_min_chat: chat.lambda_min().max(0.0),
    })
}

/// Tuning for the Newton solvers.
#[derive(Debug, Clone)]
pub struct DSolveConfig {
    pub max_iter: usize,
    /// Early-exit threshold on the objective drop between iterations.
    pub tol: f64,
    /// Optional extra stopping requirement on the scaled gradient norm
    /// `||A d - d^{-1}||_inf <= grad_tol * (1 + ||d||_inf)`. Off by default;
    /// the objective-drop test alone then decides.
    pub grad_tol: Option<f64>,
    /// Smallest admissible line-search step.
    pub eta_min: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for DSolveConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-10,
            grad_tol: None,
            eta_min: 1e-16,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

impl DSolveConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < c1 < c2 < 1, got c1={}, c2={}",
                self.c1, self.c2
            )));
        }
        Ok(())
    }
}

/// Outcome of a diagonal-factor solve.
#[derive(Debug, Clone)]
pub struct DSolveResult {
    pub d: Array1<f64>,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub objective_trace: Vec<f64>,
    /// Gradient infinity norm at the initial point and after every accepted
    /// step (aligned with `objective_trace`).
    pub grad_trace: Vec<f64>,
    /// Accepted line-search step sizes, one per move.
    pub step_trace: Vec<f64>,
    pub converged: bool,
    /// Smallest and largest diagonal entry visited across accepted iterates.
    pub d_box: (f64, f64),
}

/// Interval guaranteed to contain every diagonal entry of the solution
/// when the correlation matrix is positive definite:
/// `[sqrt((1-alpha) lmin) / p, sqrt(p (1-alpha) / lmin)]`.
pub fn d_bounds(lambda_min_chat: f64, alpha: f64, p: usize) -> Result<(f64, f64)> {
    if !(lambda_min_chat > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bound requires a positive smallest eigenvalue, got {lambda_min_chat}"
        )));
    }
    if alpha >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "alpha must be < 1, got {alpha}"
        )));
    }
    if p == 0 {
        return Err(Error::InvalidInput("p must be positive".into()));
    }
    let lo = ((1.0 - alpha) * lambda_min_chat).sqrt() / p as f64;
    let hi = (p as f64 * (1.0 - alpha) / lambda_min_chat).sqrt();
    Ok((lo, hi))
}

/// Newton iteration with the diagonal Hessian approximation
/// `diag(A) + D^{-2}`; each step costs `O(p^2)`.
pub fn solve_d_diagonal_newton(
    prob: &ScalingProblem,
    cfg: &DSolveConfig,
    init: &Array1<f64>,
) -> Result<DSolveResult> {
    run_newton(prob, cfg, init, false)
}

/// Newton iteration with the full Hessian `A + D^{-2}`; each step solves a
/// `p x p` SPD system.
pub fn solve_d_exact_newton(
    prob: &ScalingProblem,
    cfg: &DSolveConfig,
    init: &Array1<f64>,
) -> Result<DSolveResult> {
    run_newton(prob, cfg, init, true)
}

fn run_newton(
    prob: &ScalingProblem,
    cfg: &DSolveConfig,
    init: &Array1<f64>,
    exact: bool,
) -> Result<DSolveResult> {
    cfg.validate()?;
    let a = &prob.a;
    let p = prob.p();
    if init.len() != p {
        return Err(Error::InvalidInput(format!(
            "init has length {}, problem dimension is {p}",
            init.len()
        )));
    }
    if init.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput("init must be strictly positive".into()));
    }

    let objective = |d: &Array1<f64>, ad: &Array1<f64>| -> f64 {
        0.5 * d.dot(ad) - d.iter().map(|v| v.ln()).sum::<f64>()
    };

    let mut d = init.clone();
    let mut ad = a.dot(&d);
    let mut f = objective(&d, &ad);
    let mut trace = vec![f];
    let mut grad_trace = vec![linalg_inf(&(&ad - &d.mapv(|v| 1.0 / v)))];
    let mut step_trace: Vec<f64> = Vec::new();
    let mut box_lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut box_hi = d.iter().cloned().fold(0.0_f64, f64::max);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=cfg.max_iter {
        iterations = iter;
        let g = &ad - &d.mapv(|v| 1.0 / v);
        if let Some(gt) = cfg.grad_tol {
            let dinf = d.iter().cloned().fold(0.0_f64, f64::max);
            if linalg_inf(&g) <= gt * (1.0 + dinf) {
                converged = true;
                break;
            }
        }
        let u = if exact {
            let mut h = a.clone();
            for i in 0..p {
                h[(i, i)] += 1.0 / (d[i] * d[i]);
            }
            let l = linalg::cholesky(&h).ok_or_else(|| {
                Error::NotPositiveDefinite("Newton Hessian lost positive definiteness".into())
            })?;
            -linalg::chol_solve(&l, &g)
        } else {
            let mut u = Array1::<f64>::zeros(p);
            for i in 0..p {
                u[i] = -g[i] / (a[(i, i)] + 1.0 / (d[i] * d[i]));
            }
            u
        };
        let slope0 = g.dot(&u);
        if slope0 >= 0.0 {
            // Gradient numerically zero (or direction degenerate): stationary.
            converged = true;
            break;
        }
        let au = a.dot(&u);
        let eta = wolfe_search(cfg, &d, &u, &au, f, slope0, d.dot(&au));
        if eta == 0.0 {
            break;
        }
        d = &d + &(eta * &u);
        ad = a.dot(&d);
        let f_new = objective(&d, &ad);
        let f_delta = f - f_new;
        f = f_new;
        trace.push(f_new);
        grad_trace.push(linalg_inf(&(&ad - &d.mapv(|v| 1.0 / v))));
        step_trace.push(eta);
        box_lo = box_lo.min(d.iter().cloned().fold(f64::INFINITY, f64::min));
        box_hi = box_hi.max(d.iter().cloned().fold(0.0_f64, f64::max));

        if f_delta < cfg.tol {
            let grad_ok = match cfg.grad_tol {
                None => true,
                Some(gt) => {
                    let g = &ad - &d.mapv(|v| 1.0 / v);
                    let dinf = d.iter().cloned().fold(0.0_f64, f64::max);
                    linalg_inf(&g) <= gt * (1.0 + dinf)
                }
            };
            if grad_ok {
                converged = true;
                break;
            }
        }
    }

    let g = &ad - &d.mapv(|v| 1.0 / v);
    Ok(DSolveResult {
        final_gradient_norm: linalg_inf(&g),
        d,
        iterations,
        objective_trace: trace,
        grad_trace,
        step_trace,
        converged,
        d_box: (box_lo, box_hi),
    })
}

fn linalg_inf(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Line search on `phi(eta) = f(d + eta u)`, returning a step satisfying the
/// strong Wolfe conditions when one is found, otherwise the best
/// sufficient-decrease point seen. The quadratic part of `f` is expanded so
/// that each trial costs `O(p)`.
fn wolfe_search(
    cfg: &DSolveConfig,
    d: &Array1<f64>,
    u: &Array1<f64>,
    au: &Array1<f64>,
    f0: f64,
    slope0: f64,
    d_au: f64,
) -> f64 {
    let u_au = u.dot(au);
    let logs0: f64 = d.iter().map(|v| v.ln()).sum();
    let quad0 = f0 + logs0;

    // phi and phi' along the ray; +inf outside the positive orthant.
    let phi = |eta: f64| -> f64 {
        let mut logs = 0.0;
        for (di, ui) in d.iter().zip(u.iter()) {
            let v = di + eta * ui;
            if v <= 0.0 {
                return f64::INFINITY;
            }
            logs += v.ln();
        }
        quad0 + eta * d_au + 0.5 * eta * eta * u_au - logs
    };
    let dphi = |eta: f64| -> f64 {
        let mut s = d_au + eta * u_au;
        for (di, ui) in d.iter().zip(u.iter()) {
            s -= ui / (di + eta * ui);
        }
        s
    };

    // Largest feasible step before the log barrier.
    let mut eta_feas = f64::INFINITY;
    for (di, ui) in d.iter().zip(u.iter()) {
        if *ui < 0.0 {
            eta_feas = eta_feas.min(-di / ui);
        }
    }
    let eta_cap = if eta_feas.is_finite() {
        0.99 * eta_feas
    } else {
        1e10
    };

    let c1 = cfg.c1;
    let c2 = cfg.c2;
    // Sufficient decrease up to evaluation noise; without the fudge the
    // search stalls once true decreases drop below one ulp of f.
    let eps_f = 4.0 * f64::EPSILON * (1.0 + f0.abs());
    let armijo = |eta: f64, val: f64| val <= f0 + c1 * eta * slope0 + eps_f;

    let mut alpha_prev = 0.0_f64;
    let mut phi_prev = f0;
    let mut alpha = if eta_cap > 1.0 { 1.0 } else { 0.5 * eta_cap };
    let mut best_ok: Option<f64> = None;

    for i in 0..20 {
        let phi_a = phi(alpha);
        if !armijo(alpha, phi_a) || (i > 0 && phi_a >= phi_prev + eps_f) {
            return zoom(
                cfg, &phi, &dphi, f0, slope0, eps_f, alpha_prev, alpha, phi_prev,
            )
            .or(best_ok)
            .unwrap_or(0.0);
        }
        best_ok = Some(alpha);
        let dphi_a = dphi(alpha);
        if dphi_a.abs() <= -c2 * slope0 {
            return alpha;
        }
        if dphi_a >= 0.0 {
            return zoom(
                cfg, &phi, &dphi, f0, slope0, eps_f, alpha, alpha_prev, phi_a,
            )
            .or(best_ok)
            .unwrap_or(0.0);
        }
        if alpha >= 0.99 * eta_cap {
            // Barrier blocks further expansion; the point already has
            // sufficient decrease.
            return alpha;
        }
        alpha_prev = alpha;
        phi_prev = phi_a;
        alpha = (2.0 * alpha).min(0.99 * eta_cap);
    }
    best_ok.unwrap_or(0.0)
}

#[allow(clippy::too_many_arguments)]
fn zoom(
    cfg: &DSolveConfig,
    phi: &dyn Fn(f64) -> f64,
    dphi: &dyn Fn(f64) -> f64,
    f0: f64,
    slope0: f64,
    eps_f: f64,
    mut lo: f64,
    mut hi: f64,
    mut phi_lo: f64,
) -> Option<f64> {
    let c1 = cfg.c1;
    let c2 = cfg.c2;
    let mut best: Option<f64> = if phi_lo <= f0 + c1 * lo * slope0 + eps_f && lo > 0.0 {
        Some(lo)
    } else {
        None
    };
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() < cfg.eta_min || mid == lo || mid == hi {
            break;
        }
        let phi_m = phi(mid);
        if phi_m > f0 + c1 * mid * slope0 + eps_f || phi_m >= phi_lo + eps_f {
            hi = mid;
        } else {
            let dphi_m = dphi(mid);
            if dphi_m.abs() <= -c2 * slope0 {
                return Some(mid);
            }
            if dphi_m * (hi - lo) >= 0.0 {
                hi = lo;
            }
            lo = mid;
            phi_lo = phi_m;
            best = Some(mid);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn ones(p: usize) -> Array1<f64> {
        Array1::<f64>::ones(p)
    }

    fn tight() -> DSolveConfig {
        DSolveConfig {
            grad_tol: Some(1e-10),
            tol: 1e-14,
            max_iter: 500,
            ..Default::default()
        }
    }

    #[test]
    fn build_identity_cases() {
        let chat = CorrelationMatrix::from_entries(Array2::<f64>::eye(3)).unwrap();
        let prob = build_scaling_problem(&Array2::<f64>::eye(3), &chat, 0.0).unwrap();
        assert_eq!(prob.a(), &Array2::<f64>::eye(3));
        let prob = build_scaling_problem(&Array2::<f64>::eye(3), &chat, 0.5).unwrap();
        assert_eq!(prob.a(), &(Array2::<f64>::eye(3) * 2.0));
    }

    #[test]
    fn build_hadamard_by_hand() {
        let r = array![[1.0, 0.3], [0.3, 1.0]];
        let chat = CorrelationMatrix::from_entries(array![[1.0, 0.6], [0.6, 1.0]]).unwrap();
        let prob = build_scaling_problem(&r, &chat, 0.0).unwrap();
        assert_abs_diff_eq!(prob.a()[(0, 1)], 0.18, epsilon = 1e-15);
        assert_abs_diff_eq!(prob.a()[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn build_rejects_alpha_at_one() {
        let chat = CorrelationMatrix::from_entries(Array2::<f64>::eye(2)).unwrap();
        assert!(matches!(
            build_scaling_problem(&Array2::<f64>::eye(2), &chat, 1.0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn identity_scaling_fixed_point() {
        let prob = ScalingProblem::from_matrix(Array2::<f64>::eye(4), 0.0, 1.0).unwrap();
        for solver in [solve_d_diagonal_newton, solve_d_exact_newton] {
            let res = solver(&prob, &tight(), &ones(4)).unwrap();
            assert!(res.converged);
            for i in 0..4 {
                assert_abs_diff_eq!(res.d[i], 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn doubled_identity_matches_sqrt_half() {
        // A = 2I is the alpha = 0.5 case: d_i = sqrt(1 - alpha) = 1/sqrt(2).
        let prob = ScalingProblem::from_matrix(Array2::<f64>::eye(3) * 2.0, 0.5, 1.0).unwrap();
        for solver in [solve_d_diagonal_newton, solve_d_exact_newton] {
            let res = solver(&prob, &tight(), &ones(3)).unwrap();
            for i in 0..3 {
                assert_abs_diff_eq!(res.d[i], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn symmetric_two_by_two_fixed_point() {
        // (1 + 1/2) t = 1/t  =>  t = 1/sqrt(1.5) ~ 0.81650
        let prob = ScalingProblem::from_matrix(array![[1.0, 0.5], [0.5, 1.0]], 0.0, 0.5).unwrap();
        for solver in [solve_d_diagonal_newton, solve_d_exact_newton] {
            let res = solver(&prob, &tight(), &ones(2)).unwrap();
            let want = 1.0 / 1.5_f64.sqrt();
            assert_abs_diff_eq!(res.d[0], want, epsilon = 1e-9);
            assert_abs_diff_eq!(res.d[1], want, epsilon = 1e-9);
            assert!((res.d[0] - 0.81650).abs() < 5e-6);
        }
    }

    #[test]
    fn rejects_non_positive_init() {
        let prob = ScalingProblem::from_matrix(Array2::<f64>::eye(2), 0.0, 1.0).unwrap();
        let init = array![1.0, -1.0];
        assert!(matches!(
            solve_d_diagonal_newton(&prob, &DSolveConfig::default(), &init),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn iteration_cap_flags_non_convergence() {
        let prob = ScalingProblem::from_matrix(array![[1.0, 0.9], [0.9, 1.0]], 0.0, 0.1).unwrap();
        let cfg = DSolveConfig {
            max_iter: 1,
            tol: 1e-16,
            grad_tol: Some(1e-14),
            ..Default::default()
        };
        let init = array![5.0, 0.1];
        let res = solve_d_diagonal_newton(&prob, &cfg, &init).unwrap();
        assert!(!res.converged);
    }

    fn random_structured_problem(p: usize, rng: &mut ChaCha8Rng, alpha: f64) -> ScalingProblem {
        // A from a random unit-diagonal PD pair, so the solution box applies.
        let mut g = Array2::<f64>::zeros((p, 2 * p));
        for v in g.iter_mut() {
            *v = rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        let mut m = g.dot(&g.t());
        for i in 0..p {
            m[(i, i)] += 0.5 * p as f64;
        }
        let (chat, _) = crate::matrix::correlation_from_covariance(&m).unwrap();
        let mut g2 = Array2::<f64>::zeros((p, 2 * p));
        for v in g2.iter_mut() {
            *v = rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        let mut m2 = g2.dot(&g2.t());
        for i in 0..p {
            m2[(i, i)] += 0.5 * p as f64;
        }
        let (rmat, _) = crate::matrix::correlation_from_covariance(&m2).unwrap();
        build_scaling_problem(rmat.entries(), &chat, alpha).unwrap()
    }

    #[test]
    fn solvers_agree_and_stay_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for &p in &[2usize, 5, 11, 23] {
            let prob = random_structured_problem(p, &mut rng, 0.0);
            let diag = solve_d_diagonal_newton(&prob, &tight(), &ones(p)).unwrap();
            let exact = solve_d_exact_newton(&prob, &tight(), &ones(p)).unwrap();
            for i in 0..p {
                assert!(
                    (diag.d[i] - exact.d[i]).abs() <= 1e-8,
                    "p={p}, i={i}: {} vs {}",
                    diag.d[i],
                    exact.d[i]
                );
            }
            let (lo, hi) = d_bounds(prob.lambda_min_chat(), prob.alpha(), p).unwrap();
            for i in 0..p {
                assert!(
                    diag.d[i] >= lo && diag.d[i] <= hi,
                    "bound violated at p={p}"
                );
            }
            // Monotone descent along the trace.
            for w in diag.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
            }
            // Scaled stationarity at convergence.
            let dinf = diag.d.iter().cloned().fold(0.0_f64, f64::max);
            assert!(diag.final_gradient_norm <= 1e-6 * (1.0 + dinf));
        }
    }

    #[test]
    fn same_solution_from_distinct_inits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let prob = random_structured_problem(7, &mut rng, 0.25);
        let mut sols = Vec::new();
        for _ in 0..3 {
            let init = Array1::<f64>::from_iter((0..7).map(|_| {
                let e: f64 = rng.random_range(-1.0..1.0);
                (2.0_f64).powf(e)
            }));
            let res = solve_d_diagonal_newton(&prob, &tight(), &init).unwrap();
            assert!(res.converged);
            sols.push(res.d);
        }
        for s in &sols[1..] {
            for i in 0..7 {
                assert!((s[i] - sols[0][i]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn diagonal_hessian_condition_number_bounded() {
        // For the structured A built from correlation inputs, diag(A) = 1/(1-alpha)
        // and the visited level-set box gives kappa < 1 + (1-alpha)/eps^2.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for &alpha in &[0.0, 0.5, -1.0] {
            let prob = random_structured_problem(6, &mut rng, alpha);
            let res = solve_d_diagonal_newton(&prob, &tight(), &ones(6)).unwrap();
            let (blo, bhi) = res.d_box;
            let eps = blo.min(1.0 / bhi);
            let inv_diag = 1.0 / (1.0 - alpha);
            let kappa_worst = (1.0 / (blo * blo) + inv_diag) / (1.0 / (bhi * bhi) + inv_diag);
            let bound = 1.0 + (1.0 - alpha) / (eps * eps);
            assert!(
                kappa_worst < bound + 1e-9,
                "kappa {kappa_worst} vs bound {bound} (alpha={alpha})"
            );
        }
    }

    #[test]
    fn bound_interval_examples() {
        let (lo, hi) = d_bounds(1.0, 0.0, 4).unwrap();
        assert_abs_diff_eq!(lo, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 2.0, epsilon = 1e-15);
        let (lo, hi) = d_bounds(1.0, 0.75, 2).unwrap();
        assert_abs_diff_eq!(lo, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 0.5_f64.sqrt(), epsilon = 1e-15);
        let (lo, hi) = d_bounds(1.0, 0.5, 1).unwrap();
        assert_abs_diff_eq!(lo, 0.5_f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 0.5_f64.sqrt(), epsilon = 1e-15);
        assert!(d_bounds(0.0, 0.0, 3).is_err());
    }
}
