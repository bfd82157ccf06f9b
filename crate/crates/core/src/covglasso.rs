//! Covariance graphical lasso: minimize, over positive definite Σ,
//!
//! ```text
//! g(Σ) = log|Σ| + tr(Σ⁻¹ S̃) + ρ ‖P ∗ Σ‖₁
//! ```
//!
//! where `∗` is the elementwise product and the L1 norm runs over all
//! entries. The solver is a column-wise coordinate descent. With column j
//! viewed as the last one, write Σ₁₁ for the rest, β for the off-diagonal
//! column, and γ = σ_jj - βᵀΣ₁₁⁻¹β for the Schur complement. With
//! W = Σ₁₁⁻¹, V = W S₁₁ W and u = W s₁₂ the objective separates as
//!
//! ```text
//! log γ + [βᵀVβ - 2uᵀβ + s_jj]/γ + 2ρ Σ_t P_tj |β_t| + ρ P_jj (γ + βᵀWβ) + const,
//! ```
//!
//! so each β coordinate has a closed-form soft-threshold update (producing
//! exact zeros) and γ has a closed-form positive root. Every micro-step
//! minimizes the objective exactly in its coordinate, which makes full sweeps
//! monotone: the objective never increases, and an increase beyond 1e-6 is
//! reported as a bug via `Diverged`.

use crate::error::{Error, Result};
use crate::linalg::{invert_spd_raw, Matrix, SpdMatrix};
use crate::scalar::Scalar;

/// Relative symmetry tolerance for user-supplied weight matrices.
const WEIGHT_ASYMMETRY_TOL: f64 = 1e-8;

/// Inner alternation limit per column visit.
const MAX_COLUMN_ITERS: usize = 100;

/// Elementwise penalty: level λ plus a nonnegative symmetric weight matrix P.
/// The mixture M-step passes λ scaled by soft counts; the standalone solver
/// takes the combined coefficient ρ directly.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec<F> {
    lambda: F,
    weights: Matrix<F>,
    id: String,
}

impl<F: Scalar> PenaltySpec<F> {
    pub fn new(lambda: F, weights: Matrix<F>, id: impl Into<String>) -> Result<Self> {
        if !lambda.is_finite() || lambda < F::zero() {
            return Err(Error::domain(format!(
                "penalty level must be finite and nonnegative, got {}",
                lambda.as_f64()
            )));
        }
        let weights = validate_weights(weights)?;
        Ok(PenaltySpec {
            lambda,
            weights,
            id: id.into(),
        })
    }

    /// All-ones off-diagonal weights: every off-diagonal entry penalized
    /// equally, diagonal untouched.
    pub fn all_ones(p: usize, lambda: F) -> Result<Self> {
        PenaltySpec::new(lambda, build_penalty_all_ones(p), "allones")
    }

    /// Weights derived from prior connection strengths via
    /// [`build_penalty_from_prior`].
    pub fn from_prior(w: &Matrix<F>, lambda: F) -> Result<Self> {
        PenaltySpec::new(lambda, build_penalty_from_prior(w)?, "prior")
    }

    /// Caller-supplied weight matrix.
    pub fn explicit(weights: Matrix<F>, lambda: F) -> Result<Self> {
        PenaltySpec::new(lambda, weights, "explicit")
    }

    /// Same weights at a different level.
    pub fn with_lambda(&self, lambda: F) -> Result<Self> {
        PenaltySpec::new(lambda, self.weights.clone(), self.id.clone())
    }

    pub fn lambda(&self) -> F {
        self.lambda
    }

    pub fn weights(&self) -> &Matrix<F> {
        &self.weights
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.weights.rows()
    }
}

fn validate_weights<F: Scalar>(w: Matrix<F>) -> Result<Matrix<F>> {
    if !w.is_square() {
        return Err(Error::dim("penalty weight matrix", w.rows(), w.cols()));
    }
    let n = w.rows();
    let max_abs = w.max_abs();
    for i in 0..n {
        for j in 0..n {
            if w[(i, j)] < F::zero() || !w[(i, j)].is_finite() {
                return Err(Error::domain(format!(
                    "penalty weight [{i}][{j}] = {} must be finite and nonnegative",
                    w[(i, j)].as_f64()
                )));
            }
        }
    }
    let mut asym = F::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((w[(i, j)] - w[(j, i)]).abs());
        }
    }
    if max_abs > F::zero() && asym / max_abs > F::of(WEIGHT_ASYMMETRY_TOL) {
        return Err(Error::NotSymmetric {
            rel_asymmetry: (asym / max_abs).as_f64(),
        });
    }
    // Exact symmetrization so support masks stay mirror images.
    let half = F::of(0.5);
    let sym = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            w[(i, i)]
        } else {
            (w[(i, j)] + w[(j, i)]) * half
        }
    });
    Ok(sym)
}

/// Ones off the diagonal, zeros on it.
pub fn build_penalty_all_ones<F: Scalar>(p: usize) -> Matrix<F> {
    Matrix::from_fn(p, p, |i, j| if i == j { F::zero() } else { F::one() })
}

/// Maps prior connection strengths W >= 0 to penalty weights
/// P_jh = 1 - W_jh / max(W) off the diagonal (strong prior connections get
/// weak penalties), with a zero diagonal. Entries where W attains its
/// maximum come out exactly zero and are never penalized.
pub fn build_penalty_from_prior<F: Scalar>(w: &Matrix<F>) -> Result<Matrix<F>> {
    let w = validate_weights(w.clone())?;
    let p = w.rows();
    let mut max_w = F::zero();
    for i in 0..p {
        for j in 0..p {
            if i != j {
                max_w = max_w.max(w[(i, j)]);
            }
        }
    }
    if max_w == F::zero() {
        return Err(Error::AllZeroPrior);
    }
    Ok(Matrix::from_fn(p, p, |i, j| {
        if i == j {
            F::zero()
        } else {
            F::one() - w[(i, j)] / max_w
        }
    }))
}

/// Solver knobs. `tol` is the objective decrease (relative to the objective
/// scale) below which a sweep counts as converged.
#[derive(Debug, Clone, PartialEq)]
pub struct CovglassoOptions<F> {
    pub tol: F,
    pub max_sweeps: usize,
}

impl<F: Scalar> Default for CovglassoOptions<F> {
    fn default() -> Self {
        CovglassoOptions {
            tol: F::of(1e-8),
            max_sweeps: 500,
        }
    }
}

/// Result of a coordinate descent run.
#[derive(Debug, Clone)]
pub struct CovglassoSolution<F> {
    pub sigma: SpdMatrix<F>,
    pub objective: F,
    pub sweeps: usize,
    /// Row-major p x p mask: `support[j*p + h]` iff `sigma[j][h] != 0`.
    /// Zeros are exact (written by the soft threshold), so the mask is a
    /// statement about the estimate, not a tolerance call.
    pub support: Vec<bool>,
}

/// Objective value at a positive definite candidate.
pub fn covglasso_objective<F: Scalar>(
    sigma: &SpdMatrix<F>,
    s_tilde: &SpdMatrix<F>,
    rho: F,
    weights: &Matrix<F>,
) -> Result<F> {
    let p = sigma.dim();
    if s_tilde.dim() != p {
        return Err(Error::dim("covglasso target dims", p, s_tilde.dim()));
    }
    if weights.rows() != p || !weights.is_square() {
        return Err(Error::dim("covglasso weight dims", p, weights.rows()));
    }
    let chol = sigma.cholesky()?;
    let inv = chol.inverse()?;
    let tr = crate::linalg::trace_product(&inv, s_tilde)?;
    let mut pen = F::zero();
    for i in 0..p {
        for j in 0..p {
            pen = pen + weights[(i, j)] * sigma.at(i, j).abs();
        }
    }
    Ok(chol.log_det() + tr + rho * pen)
}

/// Fits the covariance graphical lasso by column-wise coordinate descent.
///
/// `s_tilde` may be semidefinite; the default start is `s_tilde` itself when
/// positive definite, otherwise `s_tilde + 1e-3 mean(diag) I`. A supplied
/// `sigma_init` must be positive definite (`SingularInit` otherwise). Zeros
/// in the solution are exact, and the returned matrix is exactly symmetric.
pub fn covglasso_fit<F: Scalar>(
    s_tilde: &SpdMatrix<F>,
    rho: F,
    weights: &Matrix<F>,
    sigma_init: Option<&SpdMatrix<F>>,
    opts: &CovglassoOptions<F>,
) -> Result<CovglassoSolution<F>> {
    let p = s_tilde.dim();
    if !rho.is_finite() || rho < F::zero() {
        return Err(Error::domain(format!(
            "penalty coefficient must be finite and nonnegative, got {}",
            rho.as_f64()
        )));
    }
    if weights.rows() != p || weights.cols() != p {
        return Err(Error::dim("covglasso weight dims", p, weights.rows()));
    }
    let weights = validate_weights(weights.clone())?;

    let mut sigma: Vec<F> = match sigma_init {
        Some(init) => {
            if init.dim() != p {
                return Err(Error::dim("sigma_init dims", p, init.dim()));
            }
            if !init.is_positive_definite() {
                return Err(Error::SingularInit);
            }
            init.data().to_vec()
        }
        None => {
            if s_tilde.is_positive_definite() {
                s_tilde.data().to_vec()
            } else {
                let bump = F::of(1e-3) * s_tilde.trace() / F::of(p as f64);
                let jittered = s_tilde.add_scaled_identity(bump)?;
                if !jittered.is_positive_definite() {
                    return Err(Error::SingularInit);
                }
                jittered.data().to_vec()
            }
        }
    };

    // Keeps Schur complements well above the Cholesky pivot tolerance when
    // a singular target drives a diagonal toward the boundary; inert for
    // well-posed problems where the optimum is at the scale of diag(S̃).
    let s = s_tilde.data();
    let gamma_floor =
        F::of(1e-8) * (s_tilde.trace() / F::of(p as f64)).max(F::zero())
            + F::min_positive_value();

    let mut objective = objective_raw(p, &sigma, s, rho, &weights)?;
    let mut sweeps = 0;
    for sweep in 1..=opts.max_sweeps {
        for j in 0..p {
            column_update(p, &mut sigma, s, rho, &weights, j, gamma_floor)?;
        }
        sweeps = sweep;
        let next = objective_raw(p, &sigma, s, rho, &weights)?;
        let decrease = objective - next;
        if decrease < -F::of(1e-6) {
            return Err(Error::Diverged {
                sweep,
                increase: (-decrease).as_f64(),
            });
        }
        objective = next;
        if decrease.abs() <= opts.tol * objective.abs().max(F::one()) {
            break;
        }
    }

    let sigma = SpdMatrix::from_symmetric_unchecked(p, sigma);
    if !sigma.is_positive_definite() {
        return Err(Error::numerical(
            "coordinate descent finished at a non-positive-definite sigma",
        ));
    }
    let support = sigma.data().iter().map(|&x| x != F::zero()).collect();
    Ok(CovglassoSolution {
        objective,
        sweeps,
        support,
        sigma,
    })
}

/// Objective on raw buffers; sigma must be PD.
fn objective_raw<F: Scalar>(
    p: usize,
    sigma: &[F],
    s: &[F],
    rho: F,
    weights: &Matrix<F>,
) -> Result<F> {
    let spd = SpdMatrix::from_symmetric_unchecked(p, sigma.to_vec());
    let chol = spd.cholesky().map_err(|_| Error::SingularInit)?;
    let inv = chol.inverse()?;
    let mut tr = F::zero();
    for (a, b) in inv.data().iter().zip(s) {
        tr = tr + *a * *b;
    }
    let mut pen = F::zero();
    for i in 0..p {
        for j in 0..p {
            pen = pen + weights[(i, j)] * sigma[i * p + j].abs();
        }
    }
    Ok(chol.log_det() + tr + rho * pen)
}

/// One exact block update of column/row j and the diagonal entry.
fn column_update<F: Scalar>(
    p: usize,
    sigma: &mut [F],
    s: &[F],
    rho: F,
    weights: &Matrix<F>,
    j: usize,
    gamma_floor: F,
) -> Result<()> {
    let m = p - 1;
    // Reduced index -> full index, skipping j.
    let full = |t: usize| if t < j { t } else { t + 1 };

    // Σ₁₁ and its inverse W.
    let mut sub = vec![F::zero(); m * m];
    for r in 0..m {
        for c in 0..m {
            sub[r * m + c] = sigma[full(r) * p + full(c)];
        }
    }
    let w_mat = if m > 0 {
        invert_spd_raw(m, &sub)?
    } else {
        Vec::new()
    };

    let s_jj = s[j * p + j];
    let s12: Vec<F> = (0..m).map(|t| s[full(t) * p + j]).collect();
    let pen_col: Vec<F> = (0..m).map(|t| weights[(full(t), j)]).collect();
    let pen_diag = weights[(j, j)];
    let a_coef = rho * pen_diag;

    // u = W s₁₂, V = W S₁₁ W.
    let mut u = vec![F::zero(); m];
    for r in 0..m {
        let mut acc = F::zero();
        for c in 0..m {
            acc = acc + w_mat[r * m + c] * s12[c];
        }
        u[r] = acc;
    }
    let mut s11w = vec![F::zero(); m * m]; // S₁₁ W
    for r in 0..m {
        for c in 0..m {
            let mut acc = F::zero();
            for k in 0..m {
                acc = acc + s[full(r) * p + full(k)] * w_mat[k * m + c];
            }
            s11w[r * m + c] = acc;
        }
    }
    let mut v_mat = vec![F::zero(); m * m]; // W (S₁₁ W)
    for r in 0..m {
        for c in 0..m {
            let mut acc = F::zero();
            for k in 0..m {
                acc = acc + w_mat[r * m + k] * s11w[k * m + c];
            }
            v_mat[r * m + c] = acc;
        }
    }

    // Warm start from the current column.
    let mut beta: Vec<F> = (0..m).map(|t| sigma[full(t) * p + j]).collect();
    let quad = |mat: &[F], x: &[F]| -> F {
        let mut acc = F::zero();
        for r in 0..m {
            let mut row = F::zero();
            for c in 0..m {
                row = row + mat[r * m + c] * x[c];
            }
            acc = acc + row * x[r];
        }
        acc
    };
    let mut gamma = (sigma[j * p + j] - quad(&w_mat, &beta)).max(gamma_floor);

    let mut a_mat = vec![F::zero(); m * m];
    for _ in 0..MAX_COLUMN_ITERS {
        // A = V/γ + ρ P_jj W, b = u/γ.
        let inv_gamma = F::one() / gamma;
        for t in 0..m * m {
            a_mat[t] = v_mat[t] * inv_gamma + a_coef * w_mat[t];
        }
        // Residual r_t = Σ_l A_tl β_l, maintained across coordinate moves.
        let mut resid = vec![F::zero(); m];
        for t in 0..m {
            let mut acc = F::zero();
            for l in 0..m {
                acc = acc + a_mat[t * m + l] * beta[l];
            }
            resid[t] = acc;
        }
        let mut max_step = F::zero();
        for t in 0..m {
            let att = a_mat[t * m + t];
            if !(att > F::zero()) {
                continue; // degenerate direction; leaving β_t is always safe
            }
            let c_t = resid[t] - att * beta[t] - u[t] * inv_gamma;
            let thr = rho * pen_col[t];
            let new = soft_threshold(-c_t, thr) / att;
            let step = new - beta[t];
            if step != F::zero() {
                for l in 0..m {
                    resid[l] = resid[l] + a_mat[l * m + t] * step;
                }
                beta[t] = new;
                max_step = max_step.max(step.abs());
            }
        }
        // γ given β: minimize log γ + c/γ + ρ P_jj γ.
        let c_val =
            (s_jj - F::of(2.0) * dot(&u, &beta) + quad(&v_mat, &beta)).max(F::zero());
        let new_gamma = if a_coef > F::zero() {
            let four = F::of(4.0);
            ((F::one() + four * a_coef * c_val).sqrt() - F::one())
                / (F::of(2.0) * a_coef)
        } else {
            c_val
        }
        .max(gamma_floor);
        max_step = max_step.max((new_gamma - gamma).abs());
        gamma = new_gamma;

        let scale = gamma.max(s_jj.abs()).max(F::one());
        if max_step <= F::of(1e-12) * scale {
            break;
        }
    }

    // Write the column back; zeros from the soft threshold stay exact.
    for t in 0..m {
        sigma[full(t) * p + j] = beta[t];
        sigma[j * p + full(t)] = beta[t];
    }
    sigma[j * p + j] = gamma + quad(&w_mat, &beta);
    Ok(())
}

fn soft_threshold<F: Scalar>(x: F, t: F) -> F {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        F::zero()
    }
}

fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| x * y)
        .fold(F::zero(), |acc, v| acc + v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigen::sym_eigenvalues;
    use crate::testutil::{random_spd, seeded_rng};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn fit_default(
        s: &SpdMatrix<f64>,
        rho: f64,
        w: &Matrix<f64>,
    ) -> CovglassoSolution<f64> {
        covglasso_fit(s, rho, w, None, &CovglassoOptions::default()).unwrap()
    }

    #[test]
    fn objective_identity_case() {
        // Σ = S = I, zero-diagonal weights: log|I| + tr(I) + 0 = p.
        let p = 4;
        let id = SpdMatrix::identity(p);
        let w = build_penalty_all_ones::<f64>(p);
        let obj = covglasso_objective(&id, &id, 0.3, &w).unwrap();
        assert_relative_eq!(obj, p as f64, epsilon = 1e-12);
    }

    #[test]
    fn objective_matches_term_wise_assembly() {
        let mut rng = seeded_rng(6);
        let sigma = random_spd(4, &mut rng);
        let s = random_spd(4, &mut rng);
        let w = build_penalty_all_ones::<f64>(4);
        let rho = 0.17;
        let obj = covglasso_objective(&sigma, &s, rho, &w).unwrap();

        // log|Σ| from eigenvalues, trace from an explicit product.
        let logdet: f64 = sym_eigenvalues(&sigma.to_matrix())
            .unwrap()
            .iter()
            .map(|v| v.ln())
            .sum();
        let prod = sigma
            .inverse()
            .unwrap()
            .to_matrix()
            .matmul(&s.to_matrix())
            .unwrap();
        let tr: f64 = (0..4).map(|i| prod[(i, i)]).sum();
        let mut pen = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                pen += w[(i, j)] * sigma.at(i, j).abs();
            }
        }
        assert_relative_eq!(obj, logdet + tr + rho * pen, epsilon = 1e-9);
    }

    #[test]
    fn zero_penalty_returns_s_tilde() {
        let mut rng = seeded_rng(7);
        let s = random_spd(5, &mut rng);
        let w = build_penalty_all_ones::<f64>(5);
        let sol = fit_default(&s, 0.0, &w);
        let rel = sol
            .sigma
            .to_matrix()
            .sub(&s.to_matrix())
            .unwrap()
            .frobenius_norm()
            / s.to_matrix().frobenius_norm();
        assert!(rel <= 1e-6, "relative Frobenius gap {rel:e}");
    }

    #[test]
    fn zero_penalty_single_sweep_is_a_fixed_point() {
        let mut rng = seeded_rng(17);
        let s = random_spd(6, &mut rng);
        let w = build_penalty_all_ones::<f64>(6);
        let opts = CovglassoOptions {
            tol: 0.0,
            max_sweeps: 1,
        };
        let sol = covglasso_fit(&s, 0.0, &w, None, &opts).unwrap();
        let gap = sol
            .sigma
            .to_matrix()
            .sub(&s.to_matrix())
            .unwrap()
            .max_abs();
        assert!(gap <= 1e-8, "one sweep moved S̃ by {gap:e}");
    }

    #[test]
    fn huge_penalty_diagonalizes() {
        let mut rng = seeded_rng(18);
        let s = random_spd(4, &mut rng);
        let w = build_penalty_all_ones::<f64>(4);
        let sol = fit_default(&s, 1e6, &w);
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    assert_relative_eq!(
                        sol.sigma.at(i, i),
                        s.at(i, i),
                        max_relative = 1e-4
                    );
                } else {
                    assert_eq!(sol.sigma.at(i, j), 0.0, "off-diagonal must be exact zero");
                    assert!(!sol.support[i * 4 + j]);
                }
            }
        }
    }

    #[test]
    fn two_by_two_matches_brute_force_oracle() {
        let s = SpdMatrix::from_rows(vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let w = build_penalty_all_ones::<f64>(2);
        let rho = 0.1;
        let sol = fit_default(&s, rho, &w);
        let oracle = brute_force_2x2(&s, rho);
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            assert!(
                (sol.sigma.at(i, j) - oracle[(i, j)]).abs() <= 1e-3,
                "entry ({i},{j}): {} vs oracle {}",
                sol.sigma.at(i, j),
                oracle[(i, j)]
            );
        }
    }

    /// Grid scan plus cyclic golden-section refinement on the 2x2 problem
    /// with all-ones off-diagonal weights. Independent of the solver path.
    pub(super) fn brute_force_2x2(s: &SpdMatrix<f64>, rho: f64) -> Matrix<f64> {
        let obj = |s11: f64, s22: f64, s12: f64| -> f64 {
            let det = s11 * s22 - s12 * s12;
            if det <= 0.0 || s11 <= 0.0 || s22 <= 0.0 {
                return f64::INFINITY;
            }
            let tr = (s22 * s.at(0, 0) - 2.0 * s12 * s.at(0, 1) + s11 * s.at(1, 1)) / det;
            det.ln() + tr + 2.0 * rho * s12.abs()
        };
        let scale = s.at(0, 0).max(s.at(1, 1)) * 3.0;
        let (mut b11, mut b22, mut b12) = (s.at(0, 0), s.at(1, 1), 0.0);
        let mut best = obj(b11, b22, b12);
        let g = 40;
        for i in 1..=g {
            for j in 1..=g {
                let s11 = scale * i as f64 / g as f64;
                let s22 = scale * j as f64 / g as f64;
                let lim = (s11 * s22).sqrt();
                for k in 0..=g {
                    let s12 = -lim + 2.0 * lim * k as f64 / g as f64;
                    let v = obj(s11, s22, s12);
                    if v < best {
                        best = v;
                        (b11, b22, b12) = (s11, s22, s12);
                    }
                }
            }
        }
        // Cyclic golden-section refinement.
        let golden = |f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64| -> f64 {
            let r = (5.0f64.sqrt() - 1.0) / 2.0;
            let (mut x1, mut x2) = (hi - r * (hi - lo), lo + r * (hi - lo));
            let (mut f1, mut f2) = (f(x1), f(x2));
            for _ in 0..200 {
                if f1 < f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - r * (hi - lo);
                    f1 = f(x1);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + r * (hi - lo);
                    f2 = f(x2);
                }
            }
            (lo + hi) / 2.0
        };
        for _ in 0..60 {
            let (c22, c12) = (b22, b12);
            b11 = golden(&|x| obj(x, c22, c12), 1e-6, scale);
            let (c11, c12) = (b11, b12);
            b22 = golden(&|x| obj(c11, x, c12), 1e-6, scale);
            let (c11, c22) = (b11, b22);
            let lim = (c11 * c22).sqrt();
            b12 = golden(&|x| obj(c11, c22, x), -lim + 1e-9, lim - 1e-9);
            // The L1 kink attracts the minimum to exactly zero; snap if better.
            if obj(c11, c22, 0.0) <= obj(c11, c22, b12) {
                b12 = 0.0;
            }
        }
        let mut out = Matrix::zeros(2, 2);
        out[(0, 0)] = b11;
        out[(1, 1)] = b22;
        out[(0, 1)] = b12;
        out[(1, 0)] = b12;
        out
    }

    #[test]
    fn objective_is_monotone_across_sweeps() {
        // obj(k sweeps) is non-increasing in k; checked by rerunning with
        // growing sweep caps, which is deterministic.
        let mut rng = seeded_rng(19);
        for trial in 0..12 {
            let p = rng.gen_range(2..=12);
            let s = random_spd(p, &mut rng);
            let w = build_penalty_all_ones::<f64>(p);
            let rho = [0.0, 0.05, 0.2, 1.0][trial % 4];
            let mut prev = f64::INFINITY;
            for cap in 1..=4 {
                let opts = CovglassoOptions {
                    tol: 0.0,
                    max_sweeps: cap,
                };
                let sol = covglasso_fit(&s, rho, &w, None, &opts).unwrap();
                assert!(
                    sol.objective <= prev + 1e-10,
                    "objective rose from {prev} to {} at cap {cap} (p={p}, rho={rho})",
                    sol.objective
                );
                prev = sol.objective;
            }
        }
    }

    #[test]
    fn support_shrinks_along_penalty_path() {
        // Soft invariant: support size is non-increasing in rho for almost
        // all problems; tolerate at most 5% violations.
        let mut rng = seeded_rng(20);
        let rhos = [0.0, 0.02, 0.05, 0.1, 0.3, 1.0];
        let mut comparisons = 0;
        let mut violations = 0;
        for _ in 0..20 {
            let s = random_spd(6, &mut rng);
            let w = build_penalty_all_ones::<f64>(6);
            let mut prev_size = usize::MAX;
            for &rho in &rhos {
                let sol = fit_default(&s, rho, &w);
                let size = sol.support.iter().filter(|&&b| b).count();
                if prev_size != usize::MAX {
                    comparisons += 1;
                    if size > prev_size {
                        violations += 1;
                    }
                }
                prev_size = size;
            }
        }
        assert!(
            (violations as f64) <= 0.05 * comparisons as f64,
            "{violations}/{comparisons} support-monotonicity violations"
        );
    }

    #[test]
    fn solution_is_exactly_symmetric_with_matching_support() {
        let mut rng = seeded_rng(21);
        let s = random_spd(7, &mut rng);
        let w = build_penalty_all_ones::<f64>(7);
        let sol = fit_default(&s, 0.15, &w);
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(
                    sol.sigma.at(i, j).to_bits(),
                    sol.sigma.at(j, i).to_bits(),
                    "asymmetry at ({i},{j})"
                );
                assert_eq!(
                    sol.support[i * 7 + j],
                    sol.sigma.at(i, j) != 0.0,
                    "support mask out of sync at ({i},{j})"
                );
            }
        }
        assert!(sol.sigma.is_positive_definite());
    }

    #[test]
    fn scalar_problem_has_closed_form() {
        // p = 1 with zero-diagonal weight: minimizer is s itself.
        let s = SpdMatrix::diagonal(&[2.5]).unwrap();
        let w = build_penalty_all_ones::<f64>(1);
        let sol = fit_default(&s, 0.7, &w);
        assert_relative_eq!(sol.sigma.at(0, 0), 2.5, epsilon = 1e-10);
        // With a penalized diagonal the root of ργσ² + σ - s = 0 wins.
        let w1 = Matrix::from_rows(vec![vec![1.0]]).unwrap();
        let rho = 0.7;
        let sol = fit_default(&s, rho, &w1);
        let expected = ((1.0 + 4.0 * rho * 2.5f64).sqrt() - 1.0) / (2.0 * rho);
        assert_relative_eq!(sol.sigma.at(0, 0), expected, epsilon = 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = SpdMatrix::<f64>::identity(3);
        let w = build_penalty_all_ones::<f64>(3);
        assert!(matches!(
            covglasso_fit(&s, -0.1, &w, None, &CovglassoOptions::default()),
            Err(Error::DomainError { .. })
        ));
        let wrong = build_penalty_all_ones::<f64>(4);
        assert!(matches!(
            covglasso_fit(&s, 0.1, &wrong, None, &CovglassoOptions::default()),
            Err(Error::DimMismatch { .. })
        ));
        let psd = SpdMatrix::diagonal(&[1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            covglasso_fit(&s, 0.1, &w, Some(&psd), &CovglassoOptions::default()),
            Err(Error::SingularInit)
        ));
    }

    #[test]
    fn semidefinite_target_gets_default_jitter_start() {
        // Rank-1 PSD target; the default start must still be PD and the fit
        // must come back PD.
        let m = Matrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let s = SpdMatrix::from_matrix(&m).unwrap();
        assert!(!s.is_positive_definite());
        let w = build_penalty_all_ones::<f64>(2);
        let sol = fit_default(&s, 0.05, &w);
        assert!(sol.sigma.is_positive_definite());
    }

    #[test]
    fn penalty_constructors_build_expected_patterns() {
        let p = build_penalty_all_ones::<f64>(3);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(p[(i, j)], if i == j { 0.0 } else { 1.0 });
            }
        }
        let w = Matrix::from_rows(vec![
            vec![0.0, 4.0, 1.0],
            vec![4.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let p = build_penalty_from_prior(&w).unwrap();
        assert_eq!(p[(0, 1)], 0.0, "strongest connection is never penalized");
        assert_relative_eq!(p[(0, 2)], 0.75);
        assert_eq!(p[(1, 2)], 1.0);
        for i in 0..3 {
            assert_eq!(p[(i, i)], 0.0);
        }

        assert!(matches!(
            build_penalty_from_prior(&Matrix::<f64>::zeros(3, 3)),
            Err(Error::AllZeroPrior)
        ));
        assert!(PenaltySpec::all_ones(3, -1.0f64).is_err());
    }
}
