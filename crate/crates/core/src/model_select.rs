//! Model selection over a (cluster count, penalty strength) grid: free
//! parameter counting, the information criterion, automatic penalty grids,
//! and the parallel grid search with warm-started penalty chains.

use rayon::prelude::*;

use crate::covglasso::PenaltySpec;
use crate::dataset::Dataset;
use crate::em::{fit_em_cached, fit_em_from_init, init, FitConfig, FitResult, MixtureParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Count of free parameters in a fitted mixture: K - 1 mixing weights, K
/// degrees of freedom, and per component the p diagonal entries plus the
/// exactly-nonzero strict upper triangle of the scale matrix.
pub fn count_free_params<F: Scalar>(params: &MixtureParams<F>) -> usize {
    let k = params.k();
    let p = params.dim();
    let mut d0 = (k - 1) + k;
    for c in params.components() {
        d0 += p;
        for i in 0..p {
            for j in (i + 1)..p {
                if c.scale().at(i, j) != F::zero() {
                    d0 += 1;
                }
            }
        }
    }
    d0
}

/// Selection score 2·loglik - d0·ln(n). Larger is better. `n` must be
/// positive; it is real-valued so callers can probe the formula directly.
pub fn compute_bic<F: Scalar>(loglik: F, d0: usize, n: F) -> F {
    F::of(2.0) * loglik - F::of(d0 as f64) * n.ln()
}

/// The candidate grid: cluster counts and penalty strengths, each sorted
/// ascending and deduplicated on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionGrid<F> {
    k_values: Vec<usize>,
    lambdas: Vec<F>,
}

impl<F: Scalar> SelectionGrid<F> {
    pub fn new(k_values: Vec<usize>, lambdas: Vec<F>) -> Result<Self> {
        if k_values.is_empty() {
            return Err(Error::domain("cluster grid must be non-empty"));
        }
        if lambdas.is_empty() {
            return Err(Error::domain("penalty grid must be non-empty"));
        }
        let mut k_values = k_values;
        k_values.sort_unstable();
        k_values.dedup();
        if k_values[0] == 0 {
            return Err(Error::domain("cluster counts must be at least 1"));
        }
        let mut lambdas = lambdas;
        for &l in &lambdas {
            if !l.is_finite() || l < F::zero() {
                return Err(Error::domain(format!(
                    "penalty strengths must be finite and nonnegative, got {}",
                    l.as_f64()
                )));
            }
        }
        lambdas.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite by validation"));
        lambdas.dedup();
        Ok(SelectionGrid { k_values, lambdas })
    }

    /// Builds `count` equispaced penalty strengths from 0 to an upper bound
    /// at which every initial-partition scale estimate solves to a diagonal
    /// matrix, so the grid always spans from no shrinkage to full sparsity.
    ///
    /// The bound comes from the stationarity condition of the penalized
    /// covariance problem at its diagonal solution: the off-diagonal (j, h)
    /// stays zero once rho·W_jh >= |s_jh| / (s_jj·s_hh). Mapping rho back
    /// through rho = 2·lambda / (n̂·ν̂) and maximizing over components and
    /// weighted pairs gives the smallest lambda that silences every pair.
    /// Degenerate inputs (already-diagonal targets, all-zero weights) fall
    /// back to an upper bound of 1.
    pub fn auto(
        data: &Dataset<F>,
        k_values: Vec<usize>,
        penalty: &PenaltySpec<F>,
        count: usize,
        nu_max: F,
    ) -> Result<Self> {
        if count < 2 {
            return Err(Error::domain(
                "automatic penalty grids need at least 2 values",
            ));
        }
        if penalty.dim() != data.dim() {
            return Err(Error::dim("penalty dims", data.dim(), penalty.dim()));
        }
        let p = data.dim();
        let dist = init::distance_matrix(data)?;
        let mut lambda_max = F::zero();
        for &k in &k_values {
            if k == 0 {
                return Err(Error::domain("cluster counts must be at least 1"));
            }
            let labels = init::partition_from_distances(&dist, k)?;
            let params = init::params_from_partition(data, &labels, k, nu_max)?;
            for c in 0..k {
                let members: Vec<usize> =
                    (0..data.n()).filter(|&i| labels[i] == c).collect();
                let count_c = F::of(members.len() as f64);
                let nu = params.component(c).dof();
                let mut stilde = vec![F::zero(); p * p];
                for &i in &members {
                    for (acc, &v) in stilde.iter_mut().zip(data.mat(i).data()) {
                        *acc = *acc + v;
                    }
                }
                let denom = count_c * nu;
                for v in &mut stilde {
                    *v = *v / denom;
                }
                for j in 0..p {
                    for h in (j + 1)..p {
                        let w = penalty.weights()[(j, h)];
                        if w <= F::zero() {
                            continue;
                        }
                        let s_jh = stilde[j * p + h].abs();
                        let s_jj = stilde[j * p + j];
                        let s_hh = stilde[h * p + h];
                        if s_jj <= F::zero() || s_hh <= F::zero() {
                            continue;
                        }
                        let bound = denom / F::of(2.0) * s_jh / (s_jj * s_hh * w);
                        lambda_max = lambda_max.max(bound);
                    }
                }
            }
        }
        if !(lambda_max > F::zero()) || !lambda_max.is_finite() {
            lambda_max = F::one();
        }
        let step = lambda_max / F::of((count - 1) as f64);
        let lambdas = (0..count).map(|i| step * F::of(i as f64)).collect();
        SelectionGrid::new(k_values, lambdas)
    }

    pub fn k_values(&self) -> &[usize] {
        &self.k_values
    }

    pub fn lambdas(&self) -> &[F] {
        &self.lambdas
    }
}

/// One grid cell: either a completed fit or the error that stopped it.
#[derive(Debug, Clone)]
pub enum RowOutcome<F> {
    Fit(FitResult<F>),
    Failed(String),
}

/// A grid cell paired with its coordinates.
#[derive(Debug, Clone)]
pub struct SelectionRow<F> {
    pub k: usize,
    pub lambda: F,
    pub outcome: RowOutcome<F>,
}

impl<F> SelectionRow<F> {
    pub fn fit(&self) -> Option<&FitResult<F>> {
        match &self.outcome {
            RowOutcome::Fit(f) => Some(f),
            RowOutcome::Failed(_) => None,
        }
    }
}

/// Grid search output: every cell in (K, lambda) order plus the index of
/// the winning row. The winner holds the maximal score among converged
/// fits; iteration-capped fits are consulted only when nothing converged.
#[derive(Debug, Clone)]
pub struct SelectionTable<F> {
    rows: Vec<SelectionRow<F>>,
    best: usize,
}

impl<F: Scalar> SelectionTable<F> {
    pub fn rows(&self) -> &[SelectionRow<F>] {
        &self.rows
    }

    pub fn best_index(&self) -> usize {
        self.best
    }

    pub fn best_row(&self) -> &SelectionRow<F> {
        &self.rows[self.best]
    }

    pub fn best_fit(&self) -> &FitResult<F> {
        self.best_row()
            .fit()
            .expect("best row always holds a fit")
    }
}

/// True when `a` beats `b` for selection: converged fits outrank
/// iteration-capped ones, then higher score, then fewer free parameters,
/// then fewer clusters, then weaker penalty. The convergence tier matters:
/// a fit still climbing at the cap is often a degenerating component
/// chasing an unbounded likelihood ridge, and its inflated score should
/// not displace a clean optimum.
fn beats<F: Scalar>(a: &SelectionRow<F>, b: &SelectionRow<F>) -> bool {
    let (fa, fb) = match (a.fit(), b.fit()) {
        (Some(fa), Some(fb)) => (fa, fb),
        _ => return b.fit().is_none(),
    };
    if fa.converged != fb.converged {
        return fa.converged;
    }
    if fa.bic != fb.bic {
        return fa.bic > fb.bic;
    }
    if fa.d0 != fb.d0 {
        return fa.d0 < fb.d0;
    }
    if a.k != b.k {
        return a.k < b.k;
    }
    a.lambda < b.lambda
}

/// Fits every grid cell and picks the winner by score.
///
/// Cluster counts run in parallel; within one count the penalty chain runs
/// ascending, warm-starting each fit from the previous cell's parameters
/// and falling back to a fresh hierarchical start when the warm fit fails.
/// Failed cells are kept in the table with their error text; a fit that hit
/// the iteration cap stays in the table flagged `converged = false` and is
/// selectable only when no cell converged. Results are merged in grid
/// order, so the table and winner are independent of thread scheduling.
pub fn grid_search<F: Scalar>(
    data: &Dataset<F>,
    grid: &SelectionGrid<F>,
    penalty: &PenaltySpec<F>,
    config: &FitConfig<F>,
) -> Result<SelectionTable<F>> {
    if penalty.dim() != data.dim() {
        return Err(Error::dim("penalty dims", data.dim(), penalty.dim()));
    }
    let dist = init::distance_matrix(data)?;
    let per_k: Vec<Vec<SelectionRow<F>>> = grid
        .k_values
        .par_iter()
        .map(|&k| {
            let mut rows = Vec::with_capacity(grid.lambdas.len());
            let mut warm: Option<MixtureParams<F>> = None;
            for &lambda in &grid.lambdas {
                let cell = penalty
                    .with_lambda(lambda)
                    .and_then(|pen| match &warm {
                        Some(prev) => fit_em_from_init(data, prev, &pen, config)
                            .or_else(|_| fit_em_cached(data, &dist, k, &pen, config)),
                        None => fit_em_cached(data, &dist, k, &pen, config),
                    });
                match cell {
                    Ok(fit) => {
                        warm = Some(fit.params.clone());
                        rows.push(SelectionRow {
                            k,
                            lambda,
                            outcome: RowOutcome::Fit(fit),
                        });
                    }
                    Err(e) => rows.push(SelectionRow {
                        k,
                        lambda,
                        outcome: RowOutcome::Failed(e.to_string()),
                    }),
                }
            }
            rows
        })
        .collect();
    let rows: Vec<SelectionRow<F>> = per_k.into_iter().flatten().collect();

    let mut best: Option<usize> = None;
    for idx in 0..rows.len() {
        if rows[idx].fit().is_none() {
            continue;
        }
        best = match best {
            Some(b) if !beats(&rows[idx], &rows[b]) => Some(b),
            _ => Some(idx),
        };
    }
    match best {
        Some(best) => Ok(SelectionTable { rows, best }),
        None => Err(Error::AllFitsFailed),
    }
}
