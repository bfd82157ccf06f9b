//! One function per subcommand. Each returns `Ok(())` for exit code 0 or a
//! [`CliError`] carrying the failure class.

use std::path::Path;

use swm_core::em::fit_em;
use swm_core::metrics::{adjusted_rand_index, f1_support, frobenius_distance, match_clusters};
use swm_core::model_select::{grid_search, SelectionGrid};
use swm_core::simulate::sample_mixture;

use crate::artifacts::{
    rows_matrix, write_heatmap_csv, write_selection_csv, ComponentMetrics, FitFile, MetricsFile,
    TruthFile, ARTIFACT_VERSION,
};
use crate::config::{LambdaGrid, Overrides, Settings, SimSpecFile};
use crate::dataio::{load_dataset, save_dataset, PayloadFormat, TRUTH_FILE};
use crate::error::{CliError, Result};
use crate::jsonio;

/// Caps the rayon pool when `--workers` (or the config field) is given.
/// Cell results merge in grid order, so this changes wall time only.
fn install_workers(workers: Option<usize>) {
    if let Some(w) = workers {
        if w > 0 {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
                log::warn!("worker pool already configured: {e}");
            }
        }
    }
}

pub fn simulate(spec_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let file: SimSpecFile = jsonio::read_json(spec_path)?;
    let spec = file.into_spec(spec_path.parent(), seed)?;
    let seed = spec.seed;
    let (data, labels, truth) = sample_mixture(&spec)?;
    save_dataset(out_dir, &data, PayloadFormat::PerMatrix)?;
    let sidecar = TruthFile::new(&truth, labels, spec.p, seed);
    jsonio::write_json(&out_dir.join(TRUTH_FILE), &sidecar)?;
    log::info!(
        "wrote {} matrices (p = {}) and truth sidecar to {}",
        data.n(),
        data.dim(),
        out_dir.display()
    );
    Ok(())
}

pub fn fit(
    data_dir: &Path,
    config_path: Option<&Path>,
    flags: &Overrides,
    out: &Path,
) -> Result<()> {
    let settings = Settings::resolve(config_path, flags)?;
    install_workers(settings.workers);
    let (data, _) = load_dataset(data_dir)?;
    let (k, lambda) = settings.single_cell()?;
    let penalty = settings.penalty.build(data.dim(), lambda)?;
    let fit = fit_em(&data, k, &penalty, &settings.fit_config())?;
    let file = FitFile::new(&fit, settings.epsilon, settings.max_iter, settings.restarts);
    jsonio::write_json(out, &file)?;
    log::info!(
        "fit K = {k}, lambda = {lambda}: {} after {} iterations, bic {:.6}",
        if fit.converged { "converged" } else { "iteration cap" },
        fit.n_iter,
        fit.bic
    );
    Ok(())
}

pub fn select(
    data_dir: &Path,
    config_path: Option<&Path>,
    flags: &Overrides,
    out_dir: &Path,
) -> Result<()> {
    let settings = Settings::resolve(config_path, flags)?;
    install_workers(settings.workers);
    let (data, _) = load_dataset(data_dir)?;
    let k_values = settings
        .k_grid
        .clone()
        .ok_or_else(|| CliError::validation("select needs --k-grid (or k_grid in the config)"))?;
    let base_penalty = settings.penalty.build(data.dim(), 0.0)?;
    let grid = match settings
        .lambda_grid
        .clone()
        .ok_or_else(|| CliError::validation("select needs --lambda-grid (or lambda_grid in the config)"))?
    {
        LambdaGrid::Values(v) => SelectionGrid::new(k_values, v)?,
        LambdaGrid::Auto(count) => {
            let nu_max = settings.fit_config().nu_max;
            SelectionGrid::auto(&data, k_values, &base_penalty, count, nu_max)?
        }
    };
    let table = grid_search(&data, &grid, &base_penalty, &settings.fit_config())?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::validation(format!("cannot create {}: {e}", out_dir.display())))?;
    write_selection_csv(&out_dir.join("selection.csv"), &table)?;
    let best = table.best_row();
    let best_fit = table.best_fit();
    let file = FitFile::new(best_fit, settings.epsilon, settings.max_iter, settings.restarts);
    jsonio::write_json(&out_dir.join("best_fit.json"), &file)?;
    log::info!(
        "searched {} cells, best K = {}, lambda = {}",
        table.rows().len(),
        best.k,
        best.lambda
    );
    Ok(())
}

pub fn evaluate(
    data_dir: &Path,
    fit_path: &Path,
    include_diagonal_f1: bool,
    out: &Path,
) -> Result<()> {
    let truth: TruthFile = jsonio::read_json(&data_dir.join(TRUTH_FILE))?;
    let fit: FitFile = jsonio::read_json(fit_path)?;
    if truth.p != fit.p {
        return Err(CliError::validation(format!(
            "dimension mismatch: truth has p = {}, fit has p = {}",
            truth.p, fit.p
        )));
    }
    let ari = adjusted_rand_index(&fit.labels, &truth.labels)?;
    let perm = match_clusters(&fit.labels, &truth.labels)?;
    let mut components = Vec::new();
    for (t, truth_sigma) in truth.sigmas.iter().enumerate() {
        let Some(e) = (0..perm.len()).find(|&e| perm[e] == t) else {
            continue;
        };
        if e >= fit.k {
            continue;
        }
        let truth_m = rows_matrix(truth_sigma, &format!("truth component {t} scale"))?;
        let est_m = fit.sigma(e)?;
        let frobenius = frobenius_distance(&est_m, &truth_m)?;
        let (f1, counts) = f1_support(&truth_m, &est_m, include_diagonal_f1)?;
        components.push(ComponentMetrics::new(t, e, frobenius, f1, counts));
    }
    let metrics = MetricsFile {
        format_version: ARTIFACT_VERSION,
        ari,
        include_diagonal_f1,
        components,
    };
    jsonio::write_json(out, &metrics)?;
    log::info!("ari {ari:.6} over {} observations", truth.labels.len());
    Ok(())
}

pub fn export_heatmap(fit_path: &Path, component: usize, out: &Path) -> Result<()> {
    let fit: FitFile = jsonio::read_json(fit_path)?;
    if component >= fit.k {
        return Err(CliError::validation(format!(
            "component {component} out of range: fit has {} components",
            fit.k
        )));
    }
    let sigma = fit.sigma(component)?;
    write_heatmap_csv(out, &sigma)
}
