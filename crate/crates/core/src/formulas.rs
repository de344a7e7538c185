//! Closed-form large-n asymptotics of the mismatched spiked Wigner problem.
//!
//! Every quantity is piecewise in `(λ, λ')` with three branches selected by
//! [`classify_region`]. Adjacent branches agree on shared boundaries, so the
//! tie-breaking order (A, then B, then C) never changes a value.

use crate::error::{ensure, Result};
use crate::params::{ProblemParams, Region};

/// Branch of the asymptotic formulas applicable to `p`.
///
/// Conditions use non-strict inequalities; a point on a shared boundary is
/// assigned to the first matching region in the order A, B, C.
pub fn classify_region(p: &ProblemParams) -> Result<Region> {
    p.validate()?;
    Ok(region_unchecked(p))
}

pub(crate) fn region_unchecked(p: &ProblemParams) -> Region {
    let s2 = p.sigma * p.sigma;
    let sp2 = p.sigma_p * p.sigma_p;
    let weak_truth = p.lambda <= 1.0 / (s2 * s2);
    if weak_truth && p.lambda_p >= 1.0 / (sp2 * sp2) {
        Region::A
    } else if p.lambda >= 1.0 / (s2 * s2) && (p.lambda * p.lambda_p).sqrt() >= 1.0 / (s2 * sp2) {
        Region::B
    } else {
        Region::C
    }
}

/// Evaluates the MSE expression of a given branch, regardless of whether `p`
/// lies in that region. Used by the boundary-continuity checks.
pub fn mse_branch(region: Region, p: &ProblemParams) -> f64 {
    let s2 = p.sigma * p.sigma;
    let s4 = s2 * s2;
    let sp2 = p.sigma_p * p.sigma_p;
    let (l, lp) = (p.lambda, p.lambda_p);
    match region {
        Region::A => {
            let d = 1.0 / lp.sqrt() - 1.0 / (lp * sp2);
            s4 + d * d
        }
        Region::B => {
            let q = (l / lp).sqrt();
            let one_minus_q = 1.0 - q;
            s4 * one_minus_q * one_minus_q + 2.0 / (l * lp).sqrt() + 1.0 / (lp * lp * sp2 * sp2)
                + 2.0 / lp * (s2 / sp2) * one_minus_q
                - 2.0 / (l * lp * s2 * sp2)
        }
        Region::C => s4,
    }
}

/// Asymptotic mismatched matrix-MSE `lim MSE_n(σ, σ', λ, λ')`.
pub fn asymptotic_mse(p: &ProblemParams) -> Result<f64> {
    let region = classify_region(p)?;
    Ok(mse_branch(region, p))
}

/// Evaluates the free-energy expression of a given branch.
pub fn free_energy_branch(region: Region, p: &ProblemParams) -> f64 {
    let s2 = p.sigma * p.sigma;
    let s4 = s2 * s2;
    let sp2 = p.sigma_p * p.sigma_p;
    let sp4 = sp2 * sp2;
    let (l, lp) = (p.lambda, p.lambda_p);
    match region {
        Region::A => {
            -1.0 / (4.0 * lp * sp4) + 1.0 / (lp.sqrt() * sp2) - 0.75 + 0.25 * lp.ln() + p.sigma_p.ln()
        }
        Region::B => {
            let g = (l * lp).sqrt();
            0.5 * (g * s2 * sp2).ln() - 1.0 / (4.0 * lp * sp4) - l * s4 / 4.0
                + (l / lp).sqrt() * s2 / (2.0 * sp2)
                + 1.0 / (2.0 * g * s2 * sp2)
                - 0.5
        }
        Region::C => 0.0,
    }
}

/// Asymptotic mismatched free energy `lim -(1/n) E ln Z(Y)`.
pub fn asymptotic_free_energy(p: &ProblemParams) -> Result<f64> {
    let region = classify_region(p)?;
    Ok(free_energy_branch(region, p))
}

/// Bayes-optimal asymptotic MMSE.
pub fn mmse(sigma: f64, lambda: f64) -> Result<f64> {
    ensure(sigma.is_finite() && sigma > 0.0, || format!("sigma must be > 0, got {sigma}"))?;
    ensure(lambda.is_finite() && lambda >= 0.0, || format!("lambda must be >= 0, got {lambda}"))?;
    let s4 = sigma.powi(4);
    Ok(if lambda <= 1.0 / s4 {
        s4
    } else {
        2.0 / lambda - 1.0 / (lambda * lambda * s4)
    })
}

/// Asymptotic MSE when the statistician uses the true SNR (`λ' = λ`).
///
/// Evaluated from the dedicated two-case formulas (`σ' ≤ σ` and `σ' ≥ σ`)
/// rather than by delegating to [`asymptotic_mse`].
pub fn matched_snr_mse(sigma: f64, sigma_p: f64, lambda: f64) -> Result<f64> {
    ensure(sigma.is_finite() && sigma > 0.0, || format!("sigma must be > 0, got {sigma}"))?;
    ensure(sigma_p.is_finite() && sigma_p > 0.0, || format!("sigma_p must be > 0, got {sigma_p}"))?;
    ensure(lambda.is_finite() && lambda >= 0.0, || format!("lambda must be >= 0, got {lambda}"))?;
    let s2 = sigma * sigma;
    let s4 = s2 * s2;
    let sp2 = sigma_p * sigma_p;
    let informative = |l: f64| 2.0 / l - (2.0 / s2 - 1.0 / sp2) / (l * l * sp2);
    if sigma_p <= sigma {
        Ok(if lambda <= 1.0 / (s2 * sp2) { s4 } else { informative(lambda) })
    } else if lambda <= 1.0 / (sp2 * sp2) {
        Ok(s4)
    } else if lambda <= 1.0 / s4 {
        let sl = lambda.sqrt();
        Ok(s4 + 1.0 / lambda - (2.0 - 1.0 / (sl * sp2)) / (lambda * sl * sp2))
    } else {
        Ok(informative(lambda))
    }
}

/// `D_KL(N(0, σ²) ‖ N(0, σ'²))`.
pub fn kl_gaussian(sigma: f64, sigma_p: f64) -> Result<f64> {
    ensure(sigma.is_finite() && sigma > 0.0, || format!("sigma must be > 0, got {sigma}"))?;
    ensure(sigma_p.is_finite() && sigma_p > 0.0, || format!("sigma_p must be > 0, got {sigma_p}"))?;
    let r = sigma / sigma_p;
    // ln(σ'/σ) + r²/2 - 1/2, written to stay accurate as r -> 1.
    Ok(0.5 * ((r * r - 1.0) - (r * r).ln()).max(0.0))
}

/// Limiting squared overlap scale `m = σ² - 1/(λσ²)` between the signal and
/// the top eigenvector of `Y` (positive above the spectral threshold).
pub fn signal_overlap(sigma: f64, lambda: f64) -> f64 {
    let s2 = sigma * sigma;
    s2 - 1.0 / (lambda * s2)
}

/// Spike amplitude `c = σ²√(λ/λ') - 1/(λ'σ'²)` of the mismatched estimator in
/// region B.
///
/// Inside region B the MSE decomposes as `σ⁴ - 2cm + c²` with
/// `m = signal_overlap(σ, λ)`, so `MSE - MMSE = (c - m)²`.
pub fn effective_scale(p: &ProblemParams) -> f64 {
    p.sigma * p.sigma * (p.lambda / p.lambda_p).sqrt() - 1.0 / (p.lambda_p * p.sigma_p * p.sigma_p)
}

/// `σ' → ∞` limit of the region-B MSE: `σ⁴(1 - √(λ/λ'))² + 2/√(λλ')`.
///
/// For `σ = 1, λ = 2` this is `1 + 2/λ' - √(2/λ')`.
pub fn mse_large_sigma_p_limit(sigma: f64, lambda: f64, lambda_p: f64) -> f64 {
    let s4 = sigma.powi(4);
    let q = (lambda / lambda_p).sqrt();
    s4 * (1.0 - q) * (1.0 - q) + 2.0 / (lambda * lambda_p).sqrt()
}
