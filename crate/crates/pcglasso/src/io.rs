//! File formats used by the command-line front end.
//!
//! Matrices travel as headerless CSV, one row per matrix row. Datasets are
//! CSV with one observation per row and an optional header (detected by a
//! non-numeric first record). Fit results serialize to JSON; tabular outputs
//! (paths, heatmaps, studies, timings) are CSV. All writers go through a
//! temp-file-plus-rename so failures never leave partial output behind.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::fit::{FitResult, Init, SolverConfig};
use crate::irr::HeatmapCell;
use crate::rsolve::SweepStat;
use crate::select::PathResult;
use crate::sim::{BenchReport, DTraceRow, StudyReport};
use crate::{Error, Result};

/// Read a headerless numeric CSV as a matrix.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let rows = read_numeric_rows(path, false)?;
    rows_to_matrix(rows, path)
}

/// Read a dataset CSV (rows = observations), skipping one header line when
/// the first record is not fully numeric.
pub fn read_dataset_csv(path: &Path) -> Result<Array2<f64>> {
    let rows = read_numeric_rows(path, true)?;
    rows_to_matrix(rows, path)
}

fn read_numeric_rows(path: &Path, allow_header: bool) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(e) => {
                if allow_header && idx == 0 {
                    continue;
                }
                return Err(Error::Parse(format!(
                    "{}: row {}: {e}",
                    path.display(),
                    idx + 1
                )));
            }
        }
    }
    Ok(rows)
}

fn rows_to_matrix(rows: Vec<Vec<f64>>, path: &Path) -> Result<Array2<f64>> {
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    let cols = rows[0].len();
    if cols == 0 {
        return Err(Error::Parse(format!("{}: empty rows", path.display())));
    }
    let mut m = Array2::<f64>::zeros((rows.len(), cols));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Parse(format!(
                "{}: row {} has {} fields, expected {cols}",
                path.display(),
                i + 1,
                row.len()
            )));
        }
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}

/// Render a matrix as headerless CSV.
pub fn matrix_to_csv(m: &Array2<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Write a file atomically: write to a sibling temp file, then rename.
pub fn atomic_write(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp-{}",
            path.file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default(),
            std::process::id()
        )),
        None => Path::new(&format!(".{}.tmp-{}", path.display(), std::process::id())).to_path_buf(),
    };
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(e)
    })
}

/// JSON-serializable summary of a fit.
#[derive(Debug, Serialize)]
pub struct FitReport {
    pub lambda: f64,
    pub alpha: f64,
    pub converged: bool,
    pub outer_iters: usize,
    pub objective: f64,
    pub stationarity_residual: f64,
    pub nnz_offdiag: usize,
    pub wall_ms: f64,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    pub d: Vec<f64>,
    /// Precision estimate; covariance scale when the input carried one.
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    pub k_scale: &'static str,
    pub config: ConfigEcho,
}

/// Echo of the effective solver configuration.
#[derive(Debug, Serialize)]
pub struct ConfigEcho {
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    pub r_tol: Option<f64>,
    pub d_tol: f64,
    pub stat_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub init: &'static str,
    /// Sample covariances use this normalization; the correlation matrix and
    /// the estimate are invariant to the choice, likelihood values are not.
    pub covariance_normalization: &'static str,
}

pub fn fit_report(fit: &FitResult, cfg: &SolverConfig) -> FitReport {
    let (k, k_scale) = match fit.precision_cov() {
        Some(k) => (k, "covariance"),
        None => (fit.precision(), "correlation"),
    };
    FitReport {
        lambda: fit.lambda,
        alpha: fit.alpha,
        converged: fit.converged,
        outer_iters: fit.outer_iters,
        objective: fit.objective(),
        stationarity_residual: fit.stationarity_residual,
        nnz_offdiag: fit.nnz_offdiag(),
        wall_ms: fit.wall_time.as_secs_f64() * 1e3,
        r: to_rows(&fit.fact.r),
        d: fit.fact.d.to_vec(),
        k: to_rows(&k),
        k_scale,
        config: ConfigEcho {
            outer_tol: cfg.outer_tol,
            outer_max_iter: cfg.outer_max_iter,
            r_tol: cfg.r_tol,
            d_tol: cfg.d_cfg.tol,
            stat_tol: cfg.stat_tol,
            restarts: cfg.restarts,
            seed: cfg.seed,
            init: match cfg.init {
                Init::Identity => "identity",
                Init::Warm(_) => "warm",
            },
            covariance_normalization: "1/n",
        },
    }
}

fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// `lambda, edges, loglik, bic, ebic, wall_ms` — one row per grid point.
pub fn path_csv(path: &PathResult) -> String {
    let mut out = String::from("lambda,edges,loglik,bic,ebic,wall_ms\n");
    for i in 0..path.lambdas.len() {
        let lambda = path.lambdas[i];
        let edges = path.edge_counts[i]
            .map(|e| e.to_string())
            .unwrap_or_default();
        let (ll, bic, ebic) = match &path.scores[i] {
            Some(s) => (s.loglik.to_string(), s.bic.to_string(), s.ebic.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        let wall = match &path.fits[i] {
            Ok(f) => (f.wall_time.as_secs_f64() * 1e3).to_string(),
            Err(_) => String::new(),
        };
        out.push_str(&format!("{lambda},{edges},{ll},{bic},{ebic},{wall}\n"));
    }
    out
}

/// `a, c, irr_pcg, irr_glasso, pd` — plottable heatmap grid.
pub fn heatmap_csv(cells: &[HeatmapCell]) -> String {
    let mut out = String::from("a,c,irr_pcg,irr_glasso,pd\n");
    for cell in cells {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            cell.a, cell.c, cell.irr_pcg, cell.irr_glasso, cell.pd
        ));
    }
    out
}

/// `method, n, metric, mean, sd` — long-format study summary.
pub fn study_csv(report: &StudyReport) -> String {
    let mut out = String::from("method,n,metric,mean,sd\n");
    for row in &report.rows {
        let mut push = |metric: &str, s: &crate::sim::Summary| {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.method.name(),
                row.n,
                metric,
                s.mean,
                s.sd
            ));
        };
        push("rmse_full", &row.rmse_full);
        push("rmse_diag", &row.rmse_diag);
        if let Some(s) = &row.rmse_offdiag_nz {
            push("rmse_offdiag_nz", s);
        }
        push("sign_accuracy", &row.sign_accuracy);
        push("wall_ms", &row.wall_ms);
    }
    out
}

/// `p, solver, mean_ms, ci_lo, ci_hi`.
pub fn timing_csv(report: &BenchReport) -> String {
    let mut out = String::from("p,solver,mean_ms,ci_lo,ci_hi\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.p, row.solver, row.mean_ms, row.ci_lo, row.ci_hi
        ));
    }
    out
}

/// `iter, objective, grad_norm, step` — diagonal-solver iteration trace.
pub fn d_trace_csv(rows: &[DTraceRow]) -> String {
    let mut out = String::from("iter,objective,grad_norm,step\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.iter, r.objective, r.grad_norm, r.step
        ));
    }
    out
}

/// `sweep, delta_max, nnz` — correlation-solver sweep trace.
pub fn sweep_trace_csv(trace: &[SweepStat]) -> String {
    let mut out = String::from("sweep,delta_max,nnz\n");
    for s in trace {
        out.push_str(&format!("{},{},{}\n", s.sweep, s.delta_max, s.nnz_offdiag));
    }
    out
}
