//! The validator suite behind `mismatchlab validate`.

use mismatch_core::formulas::{classify_region, kl_gaussian};
use mismatch_core::free_prob::{deformed_edge, gm_limit, semicircle_measure, GMInput};
use mismatch_core::quadrature::QuadratureConfig;
use mismatch_core::sim::{hciz_rank1_mc, sample_spectrum};
use mismatch_core::validators::{continuity_suite, lemma1_observed_order, lemma1_residual, sum_rule_residual};
use mismatch_core::{Error, Estimate, Exec, ProblemParams, Region, RngSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub details: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub passed: bool,
    pub seed: u64,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub seed: u64,
    /// Dimension of the BBP check.
    pub bbp_n: usize,
    pub bbp_trials: usize,
    pub hciz_n: usize,
    pub hciz_samples: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self { seed: 0, bbp_n: 1000, bbp_trials: 50, hciz_n: 500, hciz_samples: 20_000 }
    }
}

pub fn run(s: &Settings) -> Result<Report, CliError> {
    let checks = vec![continuity(s), lemma(s)?, sum_rule()?, spherical_integral(s)?, bbp(s)?];
    Ok(Report { passed: checks.iter().all(|c| c.passed), seed: s.seed, checks })
}

fn continuity(s: &Settings) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let r = continuity_suite(1000, &mut rng);
    let worst = r.max_mse_gap.max(r.max_free_energy_gap);
    Check {
        name: "boundary_continuity",
        passed: worst <= 1e-12,
        measured: worst,
        tolerance: 1e-12,
        details: json!(r),
    }
}

fn lemma(s: &Settings) -> Result<Check, CliError> {
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed.wrapping_add(1));
    let mut worst: f64 = 0.0;
    let mut points = Vec::new();
    let mut orders_ok = true;
    while points.len() < 20 {
        let p = ProblemParams::new(
            rng.gen_range(0.6..1.6),
            rng.gen_range(0.6..1.6),
            rng.gen_range(0.1..5.0),
            rng.gen_range(0.1..5.0),
        )?;
        let r = match lemma1_residual(&p, h) {
            Ok(r) => r,
            Err(Error::BoundaryProximity { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        let region = classify_region(&p)?;
        // Decay is measured from the largest admissible step whose
        // truncation error clears round-off.
        let order = if region == Region::C {
            None
        } else {
            [1e-2, 3e-3, 1e-3, h].iter().find_map(|&h0| lemma1_observed_order(&p, h0).ok().flatten())
        };
        if region != Region::C {
            orders_ok &= order.is_some_and(|o| (1.8..=2.2).contains(&o));
        }
        worst = worst.max(r.abs());
        points.push(json!({ "params": p, "region": region.label(), "residual": r, "observed_order": order }));
    }
    Ok(Check {
        name: "lemma_identity",
        passed: worst < 1e-6 && orders_ok,
        measured: worst,
        tolerance: 1e-6,
        details: json!({ "h": h, "order_range": [1.8, 2.2], "points": points }),
    })
}

fn sum_rule() -> Result<Check, CliError> {
    let quad = QuadratureConfig::default();
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for (sigma, sigma_p) in [(1.0, 2.0), (2.0, 1.0), (1.0, 0.5), (1.5, 1.5)] {
        let res = sum_rule_residual(sigma, sigma_p, &quad)?;
        let rel = res.abs() / (4.0 * kl_gaussian(sigma, sigma_p)?).max(1.0);
        worst = worst.max(rel);
        rows.push(json!({ "sigma": sigma, "sigma_p": sigma_p, "residual": res, "relative": rel }));
    }
    Ok(Check { name: "kl_sum_rule", passed: worst < 1e-4, measured: worst, tolerance: 1e-4, details: json!(rows) })
}

fn spherical_integral(s: &Settings) -> Result<Check, CliError> {
    let base = RngSpec::new(s.seed, 3);
    let gammas = sample_spectrum(s.hciz_n, 1.0, 0.0, base.child(0))?;
    let sc = semicircle_measure();
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for (k, two_theta) in [0.25, 0.5, 1.5, 2.0].into_iter().enumerate() {
        let theta = two_theta / 2.0;
        let mc = hciz_rank1_mc(&gammas, theta, s.hciz_samples, base.child(1 + k as u64))?;
        let limit = gm_limit(&GMInput::from_measure(&sc, theta)?)?;
        worst = worst.max((mc.mean - limit).abs());
        rows.push(json!({ "two_theta": two_theta, "mc": mc, "limit": limit }));
    }
    Ok(Check {
        name: "spherical_integral",
        passed: worst <= 2e-2,
        measured: worst,
        tolerance: 2e-2,
        details: json!({ "n": s.hciz_n, "top_eigenvalue": gammas[0], "points": rows }),
    })
}

fn bbp(s: &Settings) -> Result<Check, CliError> {
    let mut worst: f64 = 0.0;
    let mut max_sd: f64 = 0.0;
    let mut rows = Vec::new();
    for (k, strength) in [0.5f64, 2.0].into_iter().enumerate() {
        let lambda = strength * strength;
        let base = RngSpec::new(s.seed, 4 + k as u64);
        let tops = Exec::default()
            .try_map(s.bbp_trials, |t| sample_spectrum(s.bbp_n, 1.0, lambda, base.child(t as u64)).map(|g| g[0]))?;
        let e = Estimate::from_samples(&tops);
        let sd = e.std_error * (tops.len() as f64).sqrt();
        let target = deformed_edge(strength)?.gamma_max;
        worst = worst.max((e.mean - target).abs());
        max_sd = max_sd.max(sd);
        rows.push(json!({ "strength": strength, "target": target, "mean": e.mean, "sd": sd }));
    }
    Ok(Check {
        name: "bbp_edge",
        passed: worst <= 0.1 && max_sd <= 0.1,
        measured: worst,
        tolerance: 0.1,
        details: json!({ "n": s.bbp_n, "trials": s.bbp_trials, "points": rows }),
    })
}
