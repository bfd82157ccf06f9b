//! Result file schemas: the truth sidecar written next to simulated data,
//! the fit result JSON, the evaluation metrics JSON, and the two CSV
//! exports (selection table, heatmap data).

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use swm_core::metrics::ConfusionCounts;
use swm_core::model_select::{RowOutcome, SelectionTable};
use swm_core::simulate::GroundTruth;
use swm_core::{FitResult64, Matrix64};

use crate::error::{CliError, Result};
use crate::jsonio::fmt_f64;

pub const ARTIFACT_VERSION: u32 = 1;

pub fn matrix_rows(m: &Matrix64) -> Vec<Vec<f64>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn rows_matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix64> {
    Matrix64::from_rows(rows.to_vec())
        .map_err(|e| CliError::validation(format!("{what}: {e}")))
}

/// Ground truth sidecar `truth.json`: generating parameters and labels for
/// a simulated dataset.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFile {
    pub format_version: u32,
    pub p: usize,
    pub seed: u64,
    pub tau: Vec<f64>,
    pub dofs: Vec<f64>,
    pub labels: Vec<usize>,
    /// Row-major scale matrices, one per component.
    pub sigmas: Vec<Vec<Vec<f64>>>,
}

impl TruthFile {
    pub fn new(truth: &GroundTruth<f64>, labels: Vec<usize>, p: usize, seed: u64) -> Self {
        TruthFile {
            format_version: ARTIFACT_VERSION,
            p,
            seed,
            tau: truth.tau.clone(),
            dofs: truth.components.iter().map(|c| c.dof()).collect(),
            labels,
            sigmas: truth
                .components
                .iter()
                .map(|c| matrix_rows(&c.scale().to_matrix()))
                .collect(),
        }
    }
}

/// Fit result file: full parameters, hard labels, objective trace, and the
/// settings that produced them. `timestamp` is the only field that changes
/// between identical runs.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub format_version: u32,
    pub timestamp: String,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub lambda: f64,
    pub penalty: String,
    pub seed: u64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub converged: bool,
    pub n_iter: usize,
    pub loglik: f64,
    pub penalized_loglik: f64,
    pub d0: usize,
    pub bic: f64,
    pub tau: Vec<f64>,
    pub dofs: Vec<f64>,
    /// Row-major estimated scale matrices, one per component; zeros written
    /// by the penalty are exact.
    pub sigmas: Vec<Vec<Vec<f64>>>,
    pub labels: Vec<usize>,
    pub trace: Vec<f64>,
}

impl FitFile {
    pub fn new(fit: &FitResult64, epsilon: f64, max_iter: usize, restarts: usize) -> Self {
        let params = &fit.params;
        FitFile {
            format_version: ARTIFACT_VERSION,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true),
            n: fit.resp.n(),
            p: params.dim(),
            k: params.k(),
            lambda: fit.lambda,
            penalty: fit.penalty_id.clone(),
            seed: fit.seed,
            epsilon,
            max_iter,
            restarts,
            converged: fit.converged,
            n_iter: fit.n_iter,
            loglik: fit.loglik,
            penalized_loglik: fit.pen_loglik(),
            d0: fit.d0,
            bic: fit.bic,
            tau: params.tau().to_vec(),
            dofs: (0..params.k()).map(|k| params.component(k).dof()).collect(),
            sigmas: (0..params.k())
                .map(|k| matrix_rows(&params.component(k).scale().to_matrix()))
                .collect(),
            labels: fit.resp.map_labels().to_vec(),
            trace: fit.pen_loglik_trace.clone(),
        }
    }

    pub fn sigma(&self, k: usize) -> Result<Matrix64> {
        let rows = self.sigmas.get(k).ok_or_else(|| {
            CliError::validation(format!(
                "fit file lists {} scale matrices but k = {}",
                self.sigmas.len(),
                self.k
            ))
        })?;
        rows_matrix(rows, &format!("component {k} scale"))
    }
}

/// Evaluation metrics: ARI over labels plus per-component scale comparisons
/// after cluster matching.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsFile {
    pub format_version: u32,
    pub ari: f64,
    pub include_diagonal_f1: bool,
    pub components: Vec<ComponentMetrics>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentMetrics {
    pub true_component: usize,
    pub estimated_component: usize,
    pub frobenius: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ComponentMetrics {
    pub fn new(
        true_component: usize,
        estimated_component: usize,
        frobenius: f64,
        f1: f64,
        counts: ConfusionCounts,
    ) -> Self {
        ComponentMetrics {
            true_component,
            estimated_component,
            frobenius,
            f1,
            tp: counts.tp,
            fp: counts.fp,
            fn_: counts.fn_,
            tn: counts.tn,
        }
    }
}

/// Writes the selection table as CSV, one row per grid cell in (K, lambda)
/// order. Failed cells keep their error message in the last column and
/// leave the numeric columns empty.
pub fn write_selection_csv(path: &Path, table: &SelectionTable<f64>) -> Result<()> {
    let file = fs::File::create(path)
        .map_err(|e| CliError::validation(format!("cannot create {}: {e}", path.display())))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["k", "lambda", "bic", "loglik", "d0", "converged", "n_iter", "error"])
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
    for row in table.rows() {
        let record: Vec<String> = match &row.outcome {
            RowOutcome::Fit(fit) => vec![
                row.k.to_string(),
                fmt_f64(row.lambda),
                fmt_f64(fit.bic),
                fmt_f64(fit.loglik),
                fit.d0.to_string(),
                fit.converged.to_string(),
                fit.n_iter.to_string(),
                String::new(),
            ],
            RowOutcome::Failed(msg) => vec![
                row.k.to_string(),
                fmt_f64(row.lambda),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                msg.clone(),
            ],
        };
        w.write_record(&record)
            .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
    }
    w.flush()
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Writes one component's scale matrix as long-format CSV with an exact
/// zero mask, ready for heatmap rendering elsewhere.
pub fn write_heatmap_csv(path: &Path, sigma: &Matrix64) -> Result<()> {
    let file = fs::File::create(path)
        .map_err(|e| CliError::validation(format!("cannot create {}: {e}", path.display())))?;
    let mut out = std::io::BufWriter::new(file);
    let fail = |e: std::io::Error| {
        CliError::validation(format!("cannot write {}: {e}", path.display()))
    };
    writeln!(out, "row,col,value,zero").map_err(fail)?;
    for i in 0..sigma.rows() {
        for j in 0..sigma.cols() {
            let v = sigma[(i, j)];
            writeln!(out, "{i},{j},{},{}", fmt_f64(v), v == 0.0).map_err(fail)?;
        }
    }
    out.flush().map_err(fail)
}
