//! Analytic self-consistency checks of the closed-form asymptotics.

use rand::Rng;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::formulas::{
    free_energy_branch, kl_gaussian, matched_snr_mse, mmse, mse_branch, region_unchecked,
};
use crate::params::{ProblemParams, Region};
use crate::quadrature::{integrate_half_line, QuadResult, QuadratureConfig};

/// `∫₀^∞ [MSE(σ,σ',λ,λ) - MMSE(σ,λ)] dλ - 4·D_KL(N(0,σ²) ‖ N(0,σ'²))`.
pub fn sum_rule_residual(sigma: f64, sigma_p: f64, quad: &QuadratureConfig) -> Result<f64> {
    Ok(sum_rule_integral(sigma, sigma_p, quad)?.value - 4.0 * kl_gaussian(sigma, sigma_p)?)
}

/// The excess-MSE integral itself, with its quadrature error estimate.
pub fn sum_rule_integral(sigma: f64, sigma_p: f64, quad: &QuadratureConfig) -> Result<QuadResult> {
    kl_gaussian(sigma, sigma_p)?;
    let s2 = sigma * sigma;
    let sp2 = sigma_p * sigma_p;
    let kinks = [1.0 / (s2 * sp2), 1.0 / (sp2 * sp2), 1.0 / (s2 * s2)];
    // Validated arguments: the closures below cannot fail.
    integrate_half_line(
        |l| matched_snr_mse(sigma, sigma_p, l).unwrap() - mmse(sigma, l).unwrap(),
        &kinks,
        quad,
    )
}

/// Default central-difference step for [`lemma1_residual`].
pub fn default_lemma_step(p: &ProblemParams) -> f64 {
    1e-4 * 1f64.max(p.lambda).max(p.lambda_p)
}

/// Residual of the differential identity linking free energy and MSE:
///
/// `∂_{λ'} f + (2 - √(λ/λ'))√(λ/λ') ∂_λ f + σ⁴/4 - MSE/4`
///
/// with central differences of step `h`. The point must sit more than `10h`
/// from every region boundary, where the free energy is not smooth.
pub fn lemma1_residual(p: &ProblemParams, h: f64) -> Result<f64> {
    p.validate()?;
    ensure(h.is_finite() && h > 0.0, || format!("step must be positive, got {h}"))?;
    let span = 10.0 * h;
    let proximity = || Error::BoundaryProximity { lambda: p.lambda, lambda_p: p.lambda_p, span };
    if p.lambda <= span || p.lambda_p <= span {
        return Err(proximity());
    }
    let region = region_unchecked(p);
    // Each boundary is monotone in (λ, λ'), so checking the corners of the
    // box covers its interior.
    for (dl, dlp) in [(-span, -span), (-span, span), (span, -span), (span, span)] {
        let q = ProblemParams { lambda: p.lambda + dl, lambda_p: p.lambda_p + dlp, ..*p };
        if region_unchecked(&q) != region {
            return Err(proximity());
        }
    }
    let f = |l: f64, lp: f64| free_energy_branch(region, &ProblemParams { lambda: l, lambda_p: lp, ..*p });
    let d_lp = (f(p.lambda, p.lambda_p + h) - f(p.lambda, p.lambda_p - h)) / (2.0 * h);
    let d_l = (f(p.lambda + h, p.lambda_p) - f(p.lambda - h, p.lambda_p)) / (2.0 * h);
    let q = (p.lambda / p.lambda_p).sqrt();
    let s4 = p.sigma.powi(4);
    let lhs = d_lp + (2.0 - q) * q * d_l + s4 / 4.0;
    Ok(lhs - mse_branch(region, p) / 4.0)
}

/// Observed convergence order of [`lemma1_residual`] under two halvings of `h`.
///
/// Returns `None` when the residual at the smallest step is within a factor
/// 32 of the central-difference round-off `ε·max(1, |f|, MSE)/(h/4)`, where
/// no order can be read off.
pub fn lemma1_observed_order(p: &ProblemParams, h: f64) -> Result<Option<f64>> {
    let r0 = lemma1_residual(p, h)?.abs();
    let r1 = lemma1_residual(p, h / 2.0)?.abs();
    let r2 = lemma1_residual(p, h / 4.0)?.abs();
    let region = region_unchecked(p);
    let scale = 1f64.max(free_energy_branch(region, p).abs()).max(mse_branch(region, p));
    let floor = 32.0 * f64::EPSILON * scale / (h / 4.0);
    if r2 <= floor {
        return Ok(None);
    }
    Ok(Some(0.5 * ((r0 / r1).log2() + (r1 / r2).log2())))
}

/// One of the three shared boundaries of the piecewise formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Boundary {
    /// `λ = 1/σ⁴` with `λ' ≥ 1/σ'⁴`, shared by A and B.
    TrueThreshold,
    /// `λ' = 1/σ'⁴` with `λ ≤ 1/σ⁴`, shared by A and C.
    AssumedThreshold,
    /// `√(λλ') = 1/(σ²σ'²)` with `λ ≥ 1/σ⁴`, shared by B and C.
    Informative,
}

impl Boundary {
    pub const ALL: [Boundary; 3] = [Boundary::TrueThreshold, Boundary::AssumedThreshold, Boundary::Informative];

    pub fn adjacent(self) -> (Region, Region) {
        match self {
            Boundary::TrueThreshold => (Region::A, Region::B),
            Boundary::AssumedThreshold => (Region::A, Region::C),
            Boundary::Informative => (Region::B, Region::C),
        }
    }

    /// Point on this boundary. `stretch ≥ 1` moves along the boundary away
    /// from the triple point `λ = 1/σ⁴, λ' = 1/σ'⁴`.
    pub fn point(self, sigma: f64, sigma_p: f64, stretch: f64) -> ProblemParams {
        let l0 = 1.0 / sigma.powi(4);
        let lp0 = 1.0 / sigma_p.powi(4);
        let (lambda, lambda_p) = match self {
            Boundary::TrueThreshold => (l0, lp0 * stretch),
            Boundary::AssumedThreshold => (l0 / stretch, lp0),
            Boundary::Informative => {
                let l = l0 * stretch;
                (l, 1.0 / (l * sigma.powi(4) * sigma_p.powi(4)))
            }
        };
        ProblemParams { sigma, sigma_p, lambda, lambda_p }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryGap {
    pub mse: f64,
    pub free_energy: f64,
}

/// Absolute disagreement of the two adjacent branches at `p`.
pub fn boundary_gap(boundary: Boundary, p: &ProblemParams) -> BoundaryGap {
    let (r1, r2) = boundary.adjacent();
    BoundaryGap {
        mse: (mse_branch(r1, p) - mse_branch(r2, p)).abs(),
        free_energy: (free_energy_branch(r1, p) - free_energy_branch(r2, p)).abs(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    pub samples: usize,
    pub max_mse_gap: f64,
    pub max_free_energy_gap: f64,
}

/// Largest branch disagreement over `samples` random points on each
/// boundary, with `σ, σ' ∈ [0.5, 2]` and stretch in `[1, 10]`.
pub fn continuity_suite<R: Rng>(samples: usize, rng: &mut R) -> ContinuityReport {
    let mut report = ContinuityReport { samples: 0, max_mse_gap: 0.0, max_free_energy_gap: 0.0 };
    for _ in 0..samples {
        for b in Boundary::ALL {
            let sigma = rng.gen_range(0.5..2.0);
            let sigma_p = rng.gen_range(0.5..2.0);
            let stretch = rng.gen_range(1.0..10.0);
            let gap = boundary_gap(b, &b.point(sigma, sigma_p, stretch));
            report.samples += 1;
            report.max_mse_gap = report.max_mse_gap.max(gap.mse);
            report.max_free_energy_gap = report.max_free_energy_gap.max(gap.free_energy);
        }
    }
    report
}
