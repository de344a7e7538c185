//! Loci of the `(σ', λ')` phase diagram at fixed `(σ, λ)`.
//!
//! Inside region B the MSE reads `σ⁴ - 2cm + c²` where `c` is the spike
//! amplitude of the mismatched estimator ([`effective_scale`]) and `m` the
//! overlap scale ([`signal_overlap`]). The three loci are sign changes of
//! smooth functions:
//!
//! | curve            | root of            |
//! |------------------|--------------------|
//! | phase boundary   | `c` (B/C) or `λ'σ'⁴ - 1` (A/C) |
//! | MSE = σ⁴         | `c - 2m`           |
//! | MSE = MMSE       | `c - m`            |

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::formulas::{effective_scale, region_unchecked, signal_overlap};
use crate::params::{ProblemParams, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    /// Boundary between the uninformative region and the rest (solid line).
    PhaseBoundary,
    /// MSE equals the prior level `σ⁴` inside region B (dashed line).
    MseEqualsPrior,
    /// MSE attains the Bayes-optimal MMSE (dotted line).
    MseEqualsMmse,
}

impl CurveKind {
    pub const ALL: [CurveKind; 3] = [CurveKind::PhaseBoundary, CurveKind::MseEqualsPrior, CurveKind::MseEqualsMmse];

    pub fn slug(self) -> &'static str {
        match self {
            CurveKind::PhaseBoundary => "phase_boundary",
            CurveKind::MseEqualsPrior => "mse_equals_prior",
            CurveKind::MseEqualsMmse => "mse_equals_mmse",
        }
    }
}

/// Which coordinate the grid runs over; the other one is solved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    SigmaP,
    LambdaP,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub kind: CurveKind,
    pub sigma: f64,
    pub lambda: f64,
    pub sweep_axis: SweepAxis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub sigma_p: f64,
    pub lambda_p: f64,
}

/// Search window and resolution for the solved coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSearch {
    pub lo: f64,
    pub hi: f64,
    pub scan_points: usize,
    pub rel_tol: f64,
}

impl Default for RootSearch {
    fn default() -> Self {
        Self { lo: 1e-8, hi: 1e8, scan_points: 801, rel_tol: 1e-10 }
    }
}

impl CurveSpec {
    fn validate(&self) -> Result<()> {
        ensure(self.sigma.is_finite() && self.sigma > 0.0, || format!("sigma must be > 0, got {}", self.sigma))?;
        ensure(self.lambda.is_finite() && self.lambda > 0.0, || {
            format!("lambda must be > 0 for phase curves, got {}", self.lambda)
        })
    }

    fn point(&self, sigma_p: f64, lambda_p: f64) -> ProblemParams {
        ProblemParams { sigma: self.sigma, sigma_p, lambda: self.lambda, lambda_p }
    }

    /// Signed function whose zero set is the curve; `None` where the curve
    /// is not defined (outside region B for the MSE level sets).
    fn indicator(&self, sigma_p: f64, lambda_p: f64) -> Option<f64> {
        let p = self.point(sigma_p, lambda_p);
        let s4 = self.sigma.powi(4);
        match self.kind {
            CurveKind::PhaseBoundary => Some(if self.lambda * s4 >= 1.0 {
                ((self.lambda * lambda_p).sqrt() * self.sigma * self.sigma * sigma_p * sigma_p).ln()
            } else {
                (lambda_p * sigma_p.powi(4)).ln()
            }),
            CurveKind::MseEqualsPrior | CurveKind::MseEqualsMmse => {
                if region_unchecked(&p) != Region::B {
                    return None;
                }
                let m = signal_overlap(self.sigma, self.lambda);
                let target = if self.kind == CurveKind::MseEqualsPrior { 2.0 * m } else { m };
                Some(effective_scale(&p) - target)
            }
        }
    }

    fn eval_along(&self, fixed: f64, unknown: f64) -> Option<f64> {
        match self.sweep_axis {
            SweepAxis::SigmaP => self.indicator(fixed, unknown),
            SweepAxis::LambdaP => self.indicator(unknown, fixed),
        }
    }

    fn make_point(&self, fixed: f64, unknown: f64) -> CurvePoint {
        match self.sweep_axis {
            SweepAxis::SigmaP => CurvePoint { sigma_p: fixed, lambda_p: unknown },
            SweepAxis::LambdaP => CurvePoint { sigma_p: unknown, lambda_p: fixed },
        }
    }
}

/// Points of the curve for each grid value of the sweep axis.
///
/// Grid values where the curve has no crossing contribute nothing; several
/// crossings contribute several points, ordered by the solved coordinate.
/// Fails with [`Error::NoRoot`] if no grid value yields a crossing.
pub fn phase_curve(spec: &CurveSpec, grid: &[f64]) -> Result<Vec<CurvePoint>> {
    phase_curve_with(spec, grid, &RootSearch::default())
}

pub fn phase_curve_with(spec: &CurveSpec, grid: &[f64], search: &RootSearch) -> Result<Vec<CurvePoint>> {
    spec.validate()?;
    ensure(search.lo > 0.0 && search.hi > search.lo && search.scan_points >= 2, || {
        "invalid root search window".into()
    })?;
    ensure(grid.iter().all(|v| v.is_finite() && *v > 0.0), || "grid values must be positive".into())?;
    let mut out = Vec::new();
    for &v in grid {
        for root in roots_along(spec, v, search) {
            out.push(spec.make_point(v, root));
        }
    }
    if out.is_empty() && !grid.is_empty() {
        return Err(Error::NoRoot(format!(
            "{:?} has no crossing for sigma={}, lambda={} on the given grid",
            spec.kind, spec.sigma, spec.lambda
        )));
    }
    Ok(out)
}

/// Zeros of the indicator in the solved coordinate at one grid value.
pub fn roots_along(spec: &CurveSpec, fixed: f64, search: &RootSearch) -> Vec<f64> {
    let (llo, lhi) = (search.lo.ln(), search.hi.ln());
    let step = (lhi - llo) / (search.scan_points - 1) as f64;
    let xs: Vec<f64> = (0..search.scan_points).map(|i| (llo + step * i as f64).exp()).collect();
    let vals: Vec<Option<f64>> = xs.iter().map(|&x| spec.eval_along(fixed, x)).collect();
    let mut roots = Vec::new();
    for i in 0..xs.len() - 1 {
        let (Some(a), Some(b)) = (vals[i], vals[i + 1]) else { continue };
        if a == 0.0 {
            roots.push(xs[i]);
        } else if a * b < 0.0 {
            roots.push(bisect(|x| spec.eval_along(fixed, x), xs[i], xs[i + 1], a, search.rel_tol));
        }
    }
    if let Some(Some(last)) = vals.last() {
        if *last == 0.0 {
            roots.push(*xs.last().unwrap());
        }
    }
    roots
}

fn bisect<F: Fn(f64) -> Option<f64>>(f: F, mut lo: f64, mut hi: f64, f_lo: f64, rel_tol: f64) -> f64 {
    let sign_lo = f_lo.signum();
    while (hi - lo) > rel_tol * lo {
        let mid = (lo * hi).sqrt();
        if !(mid > lo && mid < hi) {
            break;
        }
        match f(mid) {
            Some(0.0) => return mid,
            Some(v) if v.signum() == sign_lo => lo = mid,
            // Outside the curve's domain counts as the far side of the bracket.
            _ => hi = mid,
        }
    }
    0.5 * (lo + hi)
}
