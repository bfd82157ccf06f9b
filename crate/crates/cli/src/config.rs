//! Input schemas: the run configuration shared by `fit` and `select`, the
//! simulation spec consumed by `simulate`, and the penalty choice grammar.
//! Command-line flags override file values field by field.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use swm_core::covglasso::PenaltySpec;
use swm_core::em::FitConfig;
use swm_core::linalg::SpdMatrix;
use swm_core::simulate::{BlockParity, SigmaSpec, SimSpec};
use swm_core::{FitConfig64, PenaltySpec64};

use crate::dataio::read_matrix_csv;
use crate::error::{CliError, Result};
use crate::jsonio;

/// `fit`/`select` configuration file. Every field is optional; unknown keys
/// are rejected so typos surface as errors instead of silent defaults.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub k_grid: Option<Vec<usize>>,
    pub lambda_grid: Option<LambdaGridSpec>,
    pub penalty: Option<String>,
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

/// A lambda grid is either listed outright or requested as `"auto:<count>"`,
/// which derives `count` equispaced values from the data, starting at 0.
#[derive(Deserialize, Clone)]
#[serde(untagged)]
pub enum LambdaGridSpec {
    Values(Vec<f64>),
    Auto(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum LambdaGrid {
    Values(Vec<f64>),
    Auto(usize),
}

impl LambdaGridSpec {
    fn parse(&self) -> Result<LambdaGrid> {
        match self {
            LambdaGridSpec::Values(v) => Ok(LambdaGrid::Values(v.clone())),
            LambdaGridSpec::Auto(s) => parse_lambda_grid_str(s),
        }
    }
}

pub fn parse_lambda_grid_str(s: &str) -> Result<LambdaGrid> {
    if let Some(count) = s.strip_prefix("auto:") {
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| CliError::validation(format!("bad lambda grid {s:?}: auto:<count> needs an integer")))?;
        if count == 0 {
            return Err(CliError::validation("auto lambda grid needs at least one value"));
        }
        return Ok(LambdaGrid::Auto(count));
    }
    let values = s
        .split(',')
        .map(|f| {
            f.trim().parse::<f64>().map_err(|_| {
                CliError::validation(format!("bad lambda grid value {f:?} in {s:?}"))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(LambdaGrid::Values(values))
}

pub fn parse_k_grid_str(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|f| {
            f.trim()
                .parse::<usize>()
                .map_err(|_| CliError::validation(format!("bad K grid value {f:?} in {s:?}")))
        })
        .collect()
}

/// Penalty weight choice: uniform off-diagonal weights, weights derived
/// from a prior connection-strength matrix, or an explicit weight matrix.
#[derive(Clone, Debug)]
pub enum PenaltyChoice {
    AllOnes,
    Prior(PathBuf),
    Explicit(PathBuf),
}

impl PenaltyChoice {
    /// Parses `allones | prior:<path> | explicit:<path>`, resolving relative
    /// paths against `base` (the directory of the file naming them, or the
    /// working directory for command-line flags).
    pub fn parse(s: &str, base: Option<&Path>) -> Result<Self> {
        let resolve = |raw: &str| -> PathBuf {
            let path = PathBuf::from(raw);
            match base {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path,
            }
        };
        if s == "allones" {
            Ok(PenaltyChoice::AllOnes)
        } else if let Some(path) = s.strip_prefix("prior:") {
            Ok(PenaltyChoice::Prior(resolve(path)))
        } else if let Some(path) = s.strip_prefix("explicit:") {
            Ok(PenaltyChoice::Explicit(resolve(path)))
        } else {
            Err(CliError::validation(format!(
                "bad penalty {s:?}: expected allones, prior:<path>, or explicit:<path>"
            )))
        }
    }

    pub fn build(&self, p: usize, lambda: f64) -> Result<PenaltySpec64> {
        match self {
            PenaltyChoice::AllOnes => Ok(PenaltySpec::all_ones(p, lambda)?),
            PenaltyChoice::Prior(path) => {
                let w = read_matrix_csv(path, p)?;
                Ok(PenaltySpec::from_prior(&w, lambda)?)
            }
            PenaltyChoice::Explicit(path) => {
                let w = read_matrix_csv(path, p)?;
                Ok(PenaltySpec::explicit(w, lambda)?)
            }
        }
    }
}

/// Flag values shared by `fit` and `select`; `None` means "not given".
#[derive(Default)]
pub struct Overrides {
    pub k: Option<usize>,
    pub lambda: Option<f64>,
    pub k_grid: Option<String>,
    pub lambda_grid: Option<String>,
    pub penalty: Option<String>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

/// Fully resolved settings: config file defaults with flag overrides.
pub struct Settings {
    pub k_grid: Option<Vec<usize>>,
    pub lambda_grid: Option<LambdaGrid>,
    pub penalty: PenaltyChoice,
    pub epsilon: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl Settings {
    pub fn resolve(config_path: Option<&Path>, flags: &Overrides) -> Result<Settings> {
        let (config, base) = match config_path {
            Some(path) => {
                let config: RunConfig = jsonio::read_json(path)?;
                (config, path.parent().map(Path::to_path_buf))
            }
            None => (RunConfig::default(), None),
        };
        let defaults = FitConfig::<f64>::default();

        let mut k_grid = config.k_grid;
        if let Some(s) = &flags.k_grid {
            k_grid = Some(parse_k_grid_str(s)?);
        }
        if let Some(k) = flags.k {
            k_grid = Some(vec![k]);
        }

        let mut lambda_grid = config.lambda_grid.map(|s| s.parse()).transpose()?;
        if let Some(s) = &flags.lambda_grid {
            lambda_grid = Some(parse_lambda_grid_str(s)?);
        }
        if let Some(l) = flags.lambda {
            lambda_grid = Some(LambdaGrid::Values(vec![l]));
        }

        let penalty = match (&flags.penalty, &config.penalty) {
            (Some(s), _) => PenaltyChoice::parse(s, None)?,
            (None, Some(s)) => PenaltyChoice::parse(s, base.as_deref())?,
            (None, None) => PenaltyChoice::AllOnes,
        };

        let epsilon = config.epsilon.unwrap_or(defaults.epsilon);
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(CliError::validation(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        let max_iter = config.max_iter.unwrap_or(defaults.max_iter);
        if max_iter == 0 {
            return Err(CliError::validation("max_iter must be at least 1"));
        }

        Ok(Settings {
            k_grid,
            lambda_grid,
            penalty,
            epsilon,
            max_iter,
            restarts: flags.restarts.or(config.restarts).unwrap_or(defaults.restarts),
            seed: flags.seed.or(config.seed).unwrap_or(defaults.seed),
            workers: flags.workers.or(config.workers),
        })
    }

    pub fn fit_config(&self) -> FitConfig64 {
        FitConfig {
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            restarts: self.restarts,
            seed: self.seed,
            ..FitConfig::default()
        }
    }

    /// The single (K, lambda) cell `fit` needs, or an error telling the
    /// user which side of the grid is not pinned down.
    pub fn single_cell(&self) -> Result<(usize, f64)> {
        let k = match self.k_grid.as_deref() {
            Some([k]) => *k,
            Some(_) => {
                return Err(CliError::validation(
                    "fit needs a single K: pass --k or a one-element k_grid",
                ))
            }
            None => return Err(CliError::validation("fit needs --k (or k_grid in the config)")),
        };
        let lambda = match &self.lambda_grid {
            Some(LambdaGrid::Values(v)) if v.len() == 1 => v[0],
            Some(LambdaGrid::Values(_)) => {
                return Err(CliError::validation(
                    "fit needs a single lambda: pass --lambda or a one-element lambda_grid",
                ))
            }
            Some(LambdaGrid::Auto(_)) => {
                return Err(CliError::validation(
                    "fit needs an explicit lambda, not an auto grid",
                ))
            }
            None => 0.0,
        };
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(CliError::validation(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok((k, lambda))
    }
}

/// Simulation spec file for `simulate`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpecFile {
    pub n: usize,
    pub p: usize,
    pub tau: Vec<f64>,
    pub dofs: Vec<f64>,
    pub sigmas: Vec<SigmaSpecFile>,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SigmaSpecFile {
    Blocks {
        block_size: usize,
        within: f64,
        #[serde(default)]
        between: f64,
        base_var: f64,
        active: String,
    },
    ErdosRenyi {
        edge_prob: f64,
        value_lo: f64,
        value_hi: f64,
    },
    Explicit {
        path: PathBuf,
    },
}

impl SimSpecFile {
    /// Converts to the core spec, loading any explicit scale matrices.
    /// Relative paths resolve against the spec file's directory.
    pub fn into_spec(self, base: Option<&Path>, seed_override: Option<u64>) -> Result<SimSpec<f64>> {
        let p = self.p;
        let sigma_specs = self
            .sigmas
            .into_iter()
            .map(|s| s.into_spec(p, base))
            .collect::<Result<Vec<_>>>()?;
        Ok(SimSpec {
            n: self.n,
            p: self.p,
            tau: self.tau,
            dofs: self.dofs,
            sigma_specs,
            seed: seed_override.unwrap_or(self.seed),
        })
    }
}

impl SigmaSpecFile {
    fn into_spec(self, p: usize, base: Option<&Path>) -> Result<SigmaSpec<f64>> {
        match self {
            SigmaSpecFile::Blocks {
                block_size,
                within,
                between,
                base_var,
                active,
            } => {
                let active = match active.as_str() {
                    "all" => BlockParity::All,
                    "even" => BlockParity::Even,
                    "odd" => BlockParity::Odd,
                    other => {
                        return Err(CliError::validation(format!(
                            "bad block parity {other:?}: expected all, even, or odd"
                        )))
                    }
                };
                Ok(SigmaSpec::Blocks {
                    block_size,
                    within,
                    between,
                    base_var,
                    active,
                })
            }
            SigmaSpecFile::ErdosRenyi {
                edge_prob,
                value_lo,
                value_hi,
            } => Ok(SigmaSpec::ErdosRenyi {
                edge_prob,
                value_lo,
                value_hi,
            }),
            SigmaSpecFile::Explicit { path } => {
                let path = match base {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path,
                };
                let m = read_matrix_csv(&path, p)?;
                let spd = SpdMatrix::from_matrix(&m)
                    .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
                Ok(SigmaSpec::Explicit(spd))
            }
        }
    }
}
