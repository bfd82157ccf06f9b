//! Log-gamma, digamma, and the multivariate log-gamma function.
//!
//! Both scalar functions shift their argument upward by the recurrence until
//! the asymptotic (Stirling-type) series applies, then evaluate the series.
//! Accuracy is well inside 1e-10 absolute over the domains the estimators
//! visit (arguments up to 1e6 for log-gamma).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Series threshold for log-gamma.
const LGAMMA_SHIFT: f64 = 10.0;

/// Series threshold for digamma.
const DIGAMMA_SHIFT: f64 = 6.0;

/// Stirling series coefficients B_{2n} / (2n (2n-1)) for log-gamma, applied
/// to x^{-1}, x^{-3}, ..., x^{-13}.
const LGAMMA_COEFF: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
];

/// Asymptotic coefficients B_{2n} / (2n) for digamma, applied to x^{-2},
/// x^{-4}, ..., x^{-12}.
const DIGAMMA_COEFF: [f64; 6] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32_760.0,
];

/// Natural log of the gamma function for positive arguments.
pub fn log_gamma<F: Scalar>(a: F) -> Result<F> {
    if !(a > F::zero()) || !a.is_finite() {
        return Err(Error::domain(format!(
            "log_gamma requires a > 0, got {}",
            a.as_f64()
        )));
    }
    let shift = F::of(LGAMMA_SHIFT);
    let mut x = a;
    let mut correction = F::zero();
    while x < shift {
        correction = correction + x.ln();
        x = x + F::one();
    }
    // ln Γ(x) = (x - 1/2) ln x - x + ln(2π)/2 + Σ c_n x^{-(2n-1)}
    let half = F::of(0.5);
    let ln_two_pi_half = F::of(0.918_938_533_204_672_74); // ln(2π)/2
    let mut series = F::zero();
    let inv2 = (F::one() / x) * (F::one() / x);
    let mut pow = F::one() / x;
    for &c in &LGAMMA_COEFF {
        series = series + F::of(c) * pow;
        pow = pow * inv2;
    }
    Ok((x - half) * x.ln() - x + ln_two_pi_half + series - correction)
}

/// Digamma ψ = Γ'/Γ for positive arguments.
///
/// Absolute accuracy better than 1e-10 for x >= 1e-3.
pub fn digamma<F: Scalar>(x: F) -> Result<F> {
    if !(x > F::zero()) || !x.is_finite() {
        return Err(Error::domain(format!(
            "digamma requires x > 0, got {}",
            x.as_f64()
        )));
    }
    let shift = F::of(DIGAMMA_SHIFT);
    let mut y = x;
    let mut correction = F::zero();
    while y < shift {
        correction = correction + F::one() / y;
        y = y + F::one();
    }
    // ψ(y) = ln y - 1/(2y) - Σ c_n y^{-2n}
    let inv = F::one() / y;
    let inv2 = inv * inv;
    let mut series = F::zero();
    let mut pow = inv2;
    for &c in &DIGAMMA_COEFF {
        series = series + F::of(c) * pow;
        pow = pow * inv2;
    }
    Ok(y.ln() - F::of(0.5) * inv - series - correction)
}

/// Multivariate log-gamma:
/// log γ_p(a) = p(p-1)/4 · ln π + Σ_{j=1..p} log Γ(a + (1-j)/2).
///
/// The Wishart normalizing constant uses this with a = ν/2, which stays in
/// the domain exactly when ν > p - 1.
pub fn log_multivariate_gamma<F: Scalar>(p: usize, a: F) -> Result<F> {
    if p == 0 {
        return Err(Error::domain("log_multivariate_gamma requires p >= 1"));
    }
    let min = F::of((p - 1) as f64) * F::of(0.5);
    if !(a > min) {
        return Err(Error::domain(format!(
            "log_multivariate_gamma requires a > (p-1)/2 = {}, got {}",
            min.as_f64(),
            a.as_f64()
        )));
    }
    let quarter_ln_pi = F::of(std::f64::consts::PI).ln() * F::of(0.25);
    let mut s = F::of((p * (p - 1)) as f64) * quarter_ln_pi;
    for j in 1..=p {
        let arg = a + F::of((1.0 - j as f64) / 2.0);
        s = s + log_gamma(arg)?;
    }
    Ok(s)
}
