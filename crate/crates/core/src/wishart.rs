//! Wishart density, sampling, and the degrees-of-freedom estimating equation.
//!
//! The density of a p x p positive definite observation Γ with scale Σ and
//! ν > p - 1 degrees of freedom is
//!
//! ```text
//! f(Γ) = |Γ|^{(ν-p-1)/2} exp(-tr(Σ⁻¹Γ)/2) / (2^{νp/2} |Σ|^{ν/2} γ_p(ν/2))
//! ```
//!
//! with γ_p the multivariate gamma function. Sampling uses the Bartlett
//! decomposition. The estimating equation for ν given weighted observations
//! (the mixture M-step) matches the weighted mean of log|Γ Σ⁻¹ / 2| to
//! Σ_j ψ((ν - j + 1)/2); the right side is strictly increasing in ν, so the
//! root is found by bracketing and Brent's method.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::special::{digamma, log_multivariate_gamma};
use crate::linalg::{trace_product, Matrix, SpdMatrix};
use crate::scalar::Scalar;

/// Offset above p - 1 defining the smallest admissible ν.
pub const DOF_FLOOR_OFFSET: f64 = 1e-6;

/// Default upper bound for the ν search.
pub const DOF_CEILING: f64 = 1e5;

/// One mixture component: a positive definite scale matrix and degrees of
/// freedom ν > p - 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WishartComponent<F> {
    scale: SpdMatrix<F>,
    dof: F,
}

impl<F: Scalar> WishartComponent<F> {
    pub fn new(scale: SpdMatrix<F>, dof: F) -> Result<Self> {
        let p = scale.dim();
        if !scale.is_positive_definite() {
            return Err(Error::not_pd("Wishart scale matrix"));
        }
        let min = F::of((p - 1) as f64);
        if !dof.is_finite() || dof <= min {
            return Err(Error::InvalidDof {
                dof: dof.as_f64(),
                min: min.as_f64(),
            });
        }
        Ok(WishartComponent { scale, dof })
    }

    pub fn dim(&self) -> usize {
        self.scale.dim()
    }

    pub fn scale(&self) -> &SpdMatrix<F> {
        &self.scale
    }

    pub fn dof(&self) -> F {
        self.dof
    }

    /// Precomputes the quantities shared by every log-density evaluation
    /// against this component.
    pub fn prepare(&self) -> Result<PreparedComponent<F>> {
        let p = self.dim();
        let chol = self.scale.cholesky()?;
        let log_det_scale = chol.log_det();
        let inv_scale = chol.inverse()?;
        let half = F::of(0.5);
        let nu = self.dof;
        let log_norm = -half * nu * F::of(p as f64) * F::of(std::f64::consts::LN_2)
            - half * nu * log_det_scale
            - log_multivariate_gamma(p, half * nu)?;
        Ok(PreparedComponent {
            p,
            nu,
            inv_scale,
            log_det_scale,
            log_norm,
        })
    }
}

/// Cached per-component quantities: Σ⁻¹, log|Σ|, and the log normalizing
/// constant. Lets the E-step evaluate n x K densities with one Cholesky per
/// component and one cached log|Γ| per observation.
#[derive(Debug, Clone)]
pub struct PreparedComponent<F> {
    p: usize,
    nu: F,
    inv_scale: SpdMatrix<F>,
    log_det_scale: F,
    log_norm: F,
}

impl<F: Scalar> PreparedComponent<F> {
    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn log_det_scale(&self) -> F {
        self.log_det_scale
    }

    /// Log-density given the observation and its precomputed log|Γ|.
    pub fn logpdf_cached(&self, log_det_gamma: F, gamma: &SpdMatrix<F>) -> Result<F> {
        if gamma.dim() != self.p {
            return Err(Error::dim("observation dimension", self.p, gamma.dim()));
        }
        let half = F::of(0.5);
        let tr = trace_product(&self.inv_scale, gamma)?;
        Ok(half * (self.nu - F::of((self.p + 1) as f64)) * log_det_gamma - half * tr
            + self.log_norm)
    }
}

/// Wishart log-density of `gamma` under `comp`.
pub fn wishart_logpdf<F: Scalar>(
    gamma: &SpdMatrix<F>,
    comp: &WishartComponent<F>,
) -> Result<F> {
    if gamma.dim() != comp.dim() {
        return Err(Error::dim("observation dimension", comp.dim(), gamma.dim()));
    }
    let log_det_gamma = gamma
        .cholesky()
        .map_err(|_| Error::not_pd("Wishart observation"))?
        .log_det();
    comp.prepare()?.logpdf_cached(log_det_gamma, gamma)
}

/// Draws one Wishart matrix by the Bartlett decomposition: Γ = L A Aᵀ Lᵀ
/// with L the Cholesky factor of Σ, A lower triangular with χ²_{ν-j+1}
/// square roots on the diagonal (j = 1..p) and standard normals below.
///
/// All randomness is drawn in `f64` and converted, so the stream is identical
/// for every scalar width.
pub fn wishart_sample<F: Scalar, R: Rng + ?Sized>(
    comp: &WishartComponent<F>,
    rng: &mut R,
) -> Result<SpdMatrix<F>> {
    let p = comp.dim();
    let nu = comp.dof().as_f64();
    let l = comp.scale().cholesky()?.lower();
    let mut a = Matrix::<F>::zeros(p, p);
    for j in 0..p {
        let shape = (nu - j as f64) / 2.0;
        let gamma_draw = rand_distr::Gamma::new(shape, 2.0)
            .map_err(|e| Error::numerical(format!("chi-square shape {shape}: {e}")))?;
        let chi2: f64 = rng.sample(gamma_draw);
        a[(j, j)] = F::of(chi2.sqrt());
        for i in (j + 1)..p {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            a[(i, j)] = F::of(z);
        }
    }
    let b = l.matmul(&a)?;
    let gram = b.gram();
    SpdMatrix::from_matrix(&gram)
}

/// Solves the degrees-of-freedom estimating equation
///
/// ```text
/// Σ_i w_i log|Γ_i Σ⁻¹ / 2|  =  (Σ_i w_i) · Σ_{j=1..p} ψ((ν - j + 1)/2)
/// ```
///
/// given `weighted_logdet_sum` = Σ_i w_i log|Γ_i|, the total weight, and
/// log|Σ|. The equation is invariant to rescaling all weights by a positive
/// constant. Returns `NoRootInBracket` when the target lies outside the
/// range reachable on (p - 1 + 1e-6, nu_max]; callers clamp and warn.
pub fn solve_dof<F: Scalar>(
    weighted_logdet_sum: F,
    weight_sum: F,
    p: usize,
    log_det_scale: F,
    nu_max: F,
) -> Result<F> {
    if p == 0 {
        return Err(Error::domain("solve_dof requires p >= 1"));
    }
    if !(weight_sum > F::zero()) {
        return Err(Error::domain(format!(
            "solve_dof requires positive total weight, got {}",
            weight_sum.as_f64()
        )));
    }
    let p_f = F::of(p as f64);
    let target = weighted_logdet_sum / weight_sum
        - log_det_scale
        - p_f * F::of(std::f64::consts::LN_2);
    let lo = F::of((p - 1) as f64) + F::of(DOF_FLOOR_OFFSET);
    if !(nu_max > lo) {
        return Err(Error::domain("nu_max must exceed p - 1 + 1e-6"));
    }

    let g = |nu: F| -> Result<F> {
        let mut s = F::zero();
        for j in 1..=p {
            s = s + digamma((nu - F::of((j - 1) as f64)) * F::of(0.5))?;
        }
        Ok(s - target)
    };

    let g_lo = g(lo)?;
    if g_lo > F::zero() {
        return Err(Error::NoRootInBracket {
            lo: lo.as_f64(),
            hi: nu_max.as_f64(),
            below_lower: true,
        });
    }
    // Expand by doubling from p + 1 until the sign flips.
    let mut a = lo;
    let mut fa = g_lo;
    let mut b = F::of((p + 1) as f64).min(nu_max);
    let mut fb = g(b)?;
    while fb < F::zero() {
        if b >= nu_max {
            return Err(Error::NoRootInBracket {
                lo: lo.as_f64(),
                hi: nu_max.as_f64(),
                below_lower: false,
            });
        }
        a = b;
        fa = fb;
        b = (b * F::of(2.0)).min(nu_max);
        fb = g(b)?;
    }
    let resid_tol = F::of(1e-8) * target.abs() + F::of(1e-10);
    brent(g, a, b, fa, fb, resid_tol)
}

/// Brent's method on a bracket [a, b] with f(a) <= 0 <= f(b). Terminates on
/// the residual tolerance (the caller's convergence criterion) or when the
/// bracket collapses to floating point resolution.
fn brent<F: Scalar>(
    f: impl Fn(F) -> Result<F>,
    mut a: F,
    mut b: F,
    mut fa: F,
    mut fb: F,
    resid_tol: F,
) -> Result<F> {
    if fa == F::zero() {
        return Ok(a);
    }
    if fb == F::zero() {
        return Ok(b);
    }
    let two = F::of(2.0);
    let three = F::of(3.0);
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.abs() <= resid_tol {
            return Ok(b);
        }
        if (fb > F::zero()) == (fc > F::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = two * F::epsilon() * b.abs() + F::of(0.5) * F::of(1e-13);
        let xm = F::of(0.5) * (c - b);
        if xm.abs() <= tol1 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Inverse quadratic interpolation / secant.
            let s = fb / fa;
            let (mut pp, mut q);
            if a == c {
                pp = two * xm * s;
                q = F::one() - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                pp = s * (two * xm * qq * (qq - r) - (b - a) * (r - F::one()));
                q = (qq - F::one()) * (r - F::one()) * (s - F::one());
            }
            if pp > F::zero() {
                q = -q;
            }
            pp = pp.abs();
            let min1 = three * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if two * pp < min1.min(min2) {
                e = d;
                d = pp / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b = b + d;
        } else {
            b = b + if xm >= F::zero() { tol1 } else { -tol1 };
        }
        fb = f(b)?;
    }
    Err(Error::numerical(
        "Brent root search exhausted its iteration budget",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::special::digamma;
    use crate::testutil::{random_spd, seeded_rng};
    use approx::assert_relative_eq;

    // mpmath, 30 digits: Wishart log-density, p=1, nu=3, sigma=1, gamma=2.
    // Equals the chi-square(3) log-density at 2.
    const LOGPDF_1D: f64 = -1.572364942924700087072;
    // mpmath: p=2, Sigma=I, nu=4, Gamma=I.
    const LOGPDF_2D_IDENTITY: f64 = -4.224171427529236102395;

    fn comp64(scale: SpdMatrix<f64>, dof: f64) -> WishartComponent<f64> {
        WishartComponent::new(scale, dof).unwrap()
    }

    #[test]
    fn logpdf_matches_chi_square_oracle_value() {
        let comp = comp64(SpdMatrix::identity(1), 3.0);
        let gamma = SpdMatrix::diagonal(&[2.0]).unwrap();
        let lp = wishart_logpdf(&gamma, &comp).unwrap();
        assert_relative_eq!(lp, LOGPDF_1D, epsilon = 1e-9);

        // Same value through the statrs chi-square density.
        use statrs::distribution::{ChiSquared, Continuous};
        let oracle = ChiSquared::new(3.0).unwrap().ln_pdf(2.0);
        assert_relative_eq!(lp, oracle, epsilon = 1e-9);
    }

    #[test]
    fn logpdf_identity_case_assembles_constant_term() {
        let comp = comp64(SpdMatrix::identity(2), 4.0);
        let lp = wishart_logpdf(&SpdMatrix::identity(2), &comp).unwrap();
        assert_relative_eq!(lp, LOGPDF_2D_IDENTITY, epsilon = 1e-9);
    }

    #[test]
    fn logpdf_matches_term_by_term_assembly() {
        // Independent assembly: cofactor determinants, adjugate inverse,
        // statrs log-gamma for the normalizing constant.
        let mut rng = seeded_rng(5);
        let sigma = random_spd(3, &mut rng);
        let gamma = random_spd(3, &mut rng);
        let nu = 10.0;
        let lp = wishart_logpdf(&gamma, &comp64(sigma.clone(), nu)).unwrap();

        let det3 = |m: &SpdMatrix<f64>| {
            let a = m.at(0, 0);
            let b = m.at(0, 1);
            let c = m.at(0, 2);
            let d = m.at(1, 1);
            let e = m.at(1, 2);
            let f = m.at(2, 2);
            a * (d * f - e * e) - b * (b * f - e * c) + c * (b * e - d * c)
        };
        let det_s = det3(&sigma);
        let det_g = det3(&gamma);
        // tr(Σ⁻¹Γ) via the adjugate of Σ.
        let adj = [
            [
                sigma.at(1, 1) * sigma.at(2, 2) - sigma.at(1, 2) * sigma.at(2, 1),
                sigma.at(0, 2) * sigma.at(2, 1) - sigma.at(0, 1) * sigma.at(2, 2),
                sigma.at(0, 1) * sigma.at(1, 2) - sigma.at(0, 2) * sigma.at(1, 1),
            ],
            [
                sigma.at(1, 2) * sigma.at(2, 0) - sigma.at(1, 0) * sigma.at(2, 2),
                sigma.at(0, 0) * sigma.at(2, 2) - sigma.at(0, 2) * sigma.at(2, 0),
                sigma.at(0, 2) * sigma.at(1, 0) - sigma.at(0, 0) * sigma.at(1, 2),
            ],
            [
                sigma.at(1, 0) * sigma.at(2, 1) - sigma.at(1, 1) * sigma.at(2, 0),
                sigma.at(0, 1) * sigma.at(2, 0) - sigma.at(0, 0) * sigma.at(2, 1),
                sigma.at(0, 0) * sigma.at(1, 1) - sigma.at(0, 1) * sigma.at(1, 0),
            ],
        ];
        let mut tr = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                tr += adj[i][j] / det_s * gamma.at(j, i);
            }
        }
        use statrs::function::gamma::ln_gamma;
        let p = 3.0f64;
        let mut lmv = p * (p - 1.0) / 4.0 * std::f64::consts::PI.ln();
        for j in 1..=3 {
            lmv += ln_gamma(nu / 2.0 + (1.0 - j as f64) / 2.0);
        }
        let expected = 0.5 * (nu - p - 1.0) * det_g.ln() - 0.5 * tr
            - 0.5 * nu * p * 2.0f64.ln()
            - 0.5 * nu * det_s.ln()
            - lmv;
        assert_relative_eq!(lp, expected, epsilon = 1e-9, max_relative = 1e-9);
    }

    #[test]
    fn logpdf_rejects_bad_inputs() {
        let comp = comp64(SpdMatrix::identity(2), 4.0);
        let wrong_dim = SpdMatrix::identity(3);
        assert!(matches!(
            wishart_logpdf(&wrong_dim, &comp),
            Err(Error::DimMismatch { .. })
        ));
        let psd = SpdMatrix::diagonal(&[1.0, 0.0]).unwrap();
        assert!(matches!(
            wishart_logpdf(&psd, &comp),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn component_rejects_invalid_dof() {
        assert!(matches!(
            WishartComponent::new(SpdMatrix::<f64>::identity(3), 2.0),
            Err(Error::InvalidDof { .. })
        ));
        assert!(matches!(
            WishartComponent::new(SpdMatrix::<f64>::identity(3), f64::NAN),
            Err(Error::InvalidDof { .. })
        ));
        assert!(WishartComponent::new(SpdMatrix::<f64>::identity(3), 2.0 + 1e-9).is_ok());
    }

    #[test]
    fn sample_mean_matches_nu_sigma() {
        let comp = comp64(SpdMatrix::identity(2), 50.0);
        let mut rng = seeded_rng(100);
        let n = 10_000;
        let mut mean = [[0.0f64; 2]; 2];
        for _ in 0..n {
            let g = wishart_sample(&comp, &mut rng).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    mean[i][j] += g.at(i, j) / n as f64;
                }
            }
        }
        // Var(W_jj) = 2ν, Var(W_jh) = ν for Σ = I.
        let se_diag = (2.0 * 50.0 / n as f64).sqrt();
        let se_off = (50.0 / n as f64).sqrt();
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 50.0 } else { 0.0 };
                let se = if i == j { se_diag } else { se_off };
                assert!(
                    (mean[i][j] - target).abs() <= 3.0 * se,
                    "mean[{i}][{j}] = {} vs {target} (3 SE = {})",
                    mean[i][j],
                    3.0 * se
                );
            }
        }
    }

    #[test]
    fn scalar_sample_moments_match_chi_square() {
        // p = 1, Σ = 1: draws are χ²_5 with mean 5, variance 10.
        let comp = comp64(SpdMatrix::identity(1), 5.0);
        let mut rng = seeded_rng(101);
        let n = 10_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| wishart_sample(&comp, &mut rng).unwrap().at(0, 0))
            .collect();
        let mean: f64 = draws.iter().sum::<f64>() / n as f64;
        let var: f64 =
            draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
        let se_mean = (10.0 / n as f64).sqrt();
        // Var(s²) ≈ (μ₄ - σ⁴)/n with μ₄ = 12ν(ν+4) for χ²_ν.
        let mu4 = 12.0 * 5.0 * 9.0;
        let se_var = ((mu4 - 100.0) / n as f64).sqrt();
        assert!((mean - 5.0).abs() <= 3.0 * se_mean, "mean {mean}");
        assert!((var - 10.0).abs() <= 3.0 * se_var, "variance {var}");
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let mut rng = seeded_rng(7);
        let sigma = random_spd(4, &mut rng);
        let comp = comp64(sigma, 9.5);
        let a = wishart_sample(&comp, &mut seeded_rng(55)).unwrap();
        let b = wishart_sample(&comp, &mut seeded_rng(55)).unwrap();
        assert_eq!(a.data(), b.data(), "equal seeds must give identical bits");
    }

    #[test]
    fn samples_are_positive_definite() {
        let mut rng = seeded_rng(8);
        let sigma = random_spd(6, &mut rng);
        let comp = comp64(sigma, 6.5); // barely above p - 1
        for _ in 0..50 {
            let g = wishart_sample(&comp, &mut rng).unwrap();
            assert!(g.is_positive_definite());
        }
    }

    #[test]
    fn solve_dof_scalar_case_recovers_root() {
        // p = 1, weight 1, log|Σ| = 0: target ψ(ν/2) = ψ(2.5) has root ν = 5.
        let target = digamma(2.5f64).unwrap();
        let wls = target + std::f64::consts::LN_2;
        let nu = solve_dof(wls, 1.0, 1, 0.0, 1e5).unwrap();
        assert!((nu - 5.0).abs() <= 1e-6, "nu = {nu}");
    }

    #[test]
    fn solve_dof_invariant_to_weight_rescaling() {
        let target = digamma(2.5f64).unwrap();
        let wls = target + std::f64::consts::LN_2;
        let a = solve_dof(wls, 1.0, 1, 0.0, 1e5).unwrap();
        let b = solve_dof(wls * 7.25, 7.25, 1, 0.0, 1e5).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-9);
    }

    #[test]
    fn dof_equation_rhs_is_monotone() {
        // Σ_j ψ((ν-j+1)/2) strictly increases in ν; probed on a grid at p=10.
        let p = 10;
        let rhs = |nu: f64| -> f64 {
            (1..=p)
                .map(|j| digamma((nu - (j - 1) as f64) / 2.0).unwrap())
                .sum()
        };
        let mut prev = rhs(9.2);
        let mut nu = 9.7;
        while nu <= 100.0 {
            let cur = rhs(nu);
            assert!(cur > prev, "RHS not increasing at nu = {nu}");
            prev = cur;
            nu += 0.5;
        }
    }

    #[test]
    fn solve_dof_reports_bracket_misses() {
        // Target far above anything reachable below nu_max = 20.
        let err = solve_dof(1e6, 1.0, 2, 0.0, 20.0).unwrap_err();
        assert!(
            matches!(err, Error::NoRootInBracket { below_lower: false, .. }),
            "expected above-range miss, got {err:?}"
        );
        // Target below the value at the dof floor (ψ there is about -2e6).
        let err = solve_dof(-1e9, 1.0, 2, 0.0, 20.0).unwrap_err();
        assert!(
            matches!(err, Error::NoRootInBracket { below_lower: true, .. }),
            "expected below-range miss, got {err:?}"
        );
    }

    #[test]
    fn average_loglik_peaks_near_true_dof() {
        let mut rng = seeded_rng(9);
        let sigma = random_spd(3, &mut rng);
        let nu = 12.0;
        let truth = comp64(sigma.clone(), nu);
        let low = comp64(sigma.clone(), nu * 0.7);
        let high = comp64(sigma, nu * 1.3);
        let n = 5_000;
        let (mut at_truth, mut at_low, mut at_high) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let g = wishart_sample(&truth, &mut rng).unwrap();
            at_truth += wishart_logpdf(&g, &truth).unwrap();
            at_low += wishart_logpdf(&g, &low).unwrap();
            at_high += wishart_logpdf(&g, &high).unwrap();
        }
        assert!(
            at_truth > at_low && at_truth > at_high,
            "avg loglik must dominate at the truth: {at_truth} vs ({at_low}, {at_high})"
        );
    }

    #[test]
    fn scalar_density_integrates_to_one() {
        // Composite Simpson over (0, 40 ν σ²) for ν in {3, 8}, σ² in {0.5, 2}.
        for &nu in &[3.0f64, 8.0] {
            for &s2 in &[0.5f64, 2.0] {
                let comp = comp64(SpdMatrix::diagonal(&[s2]).unwrap(), nu);
                let prepared = comp.prepare().unwrap();
                let f = |x: f64| -> f64 {
                    if x <= 0.0 {
                        return 0.0;
                    }
                    let g = SpdMatrix::diagonal(&[x]).unwrap();
                    prepared.logpdf_cached(x.ln(), &g).unwrap().exp()
                };
                let hi = 40.0 * nu * s2;
                let m = 200_000;
                let h = hi / m as f64;
                let mut s = f(0.0) + f(hi);
                for i in 1..m {
                    let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                    s += w * f(i as f64 * h);
                }
                let integral = s * h / 3.0;
                assert!(
                    (integral - 1.0).abs() <= 1e-4,
                    "ν={nu}, σ²={s2}: integral {integral}"
                );
            }
        }
    }

    #[test]
    fn single_component_dof_recovery_from_draws() {
        // 500 draws from Wishart(I₅, ν=30): solving the estimating equation
        // with unit weights and the known scale recovers ν in [28, 32].
        let comp = comp64(SpdMatrix::identity(5), 30.0);
        let mut rng = seeded_rng(12);
        let n = 500;
        let mut wls = 0.0;
        for _ in 0..n {
            let g = wishart_sample(&comp, &mut rng).unwrap();
            wls += g.log_det().unwrap();
        }
        let nu = solve_dof(wls, n as f64, 5, 0.0, 1e5).unwrap();
        assert!((28.0..=32.0).contains(&nu), "recovered ν = {nu}");
    }
}
