use approx::assert_abs_diff_eq;
use mismatch_core::formulas::{asymptotic_free_energy, asymptotic_mse};
use mismatch_core::linalg::SymMatrix;
use mismatch_core::posterior::*;
use mismatch_core::sim::{sample_instance, SpikedInstance};
use mismatch_core::{Error, Exec, ProblemParams, RngSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

fn cfg(seed: u64) -> ChainConfig {
    ChainConfig::default().with_rng(RngSpec::new(seed, 0))
}

#[test]
fn gradient_examples() {
    let inst = sample_instance(10, 1.0, 2.0, RngSpec::new(1, 0)).unwrap();
    let spec = PosteriorSpec::new(&inst, 0.8, 3.0).unwrap();
    let (v, g) = log_posterior_grad(&spec, &[0.0; 10]).unwrap();
    assert_eq!(v, 0.0);
    assert!(g.iter().all(|&x| x == 0.0));

    let prior = PosteriorSpec::new(&inst, 0.8, 0.0).unwrap();
    let x: Vec<f64> = (0..10).map(|i| i as f64 - 4.5).collect();
    let (_, g) = log_posterior_grad(&prior, &x).unwrap();
    for (gi, xi) in g.iter().zip(&x) {
        assert_abs_diff_eq!(*gi, -xi / 0.64, epsilon = 1e-12);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for t in 0..100 {
        let inst = sample_instance(10, 1.0, rng.gen_range(0.0..4.0), RngSpec::new(1000 + t, 0)).unwrap();
        let spec = PosteriorSpec::new(&inst, rng.gen_range(0.5..2.0), rng.gen_range(0.1..5.0)).unwrap();
        let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (_, g) = log_posterior_grad(&spec, &x).unwrap();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1e-6 * (1.0 + norm);
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        for k in 0..10 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (log_posterior_grad(&spec, &xp).unwrap().0 - log_posterior_grad(&spec, &xm).unwrap().0) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-6 * gnorm.max(1.0), "trial {t}, coord {k}: {fd} vs {}", g[k]);
        }
    }
}

#[test]
fn prior_only_posterior() {
    let inst = sample_instance(5, 1.0, 2.0, RngSpec::new(3, 0)).unwrap();
    let spec = PosteriorSpec::new(&inst, 1.3, 0.0).unwrap();
    let out = posterior_mean_outer(&spec, &cfg(3)).unwrap();
    for (m, se) in out.second_moments.iter().zip(&out.std_errors) {
        assert!((m - 1.69).abs() <= 3.0 * se, "{m} ± {se}");
    }
    // Entries mix all directions, so allow a looser band.
    let (m, se) = (out.matrix(), out.entry_std_errors());
    for i in 0..5 {
        for j in 0..5 {
            let target = if i == j { 1.69 } else { 0.0 };
            assert!((m.get(i, j) - target).abs() <= 4.0 * se.get(i, j), "({i},{j}) {} ± {}", m.get(i, j), se.get(i, j));
        }
    }
    let q = small_n_quadrature(&PosteriorSpec::new(&inst, 1.3, 0.0).unwrap());
    assert!(matches!(q, Err(Error::DimensionTooLarge(5))));
}

#[test]
fn quadrature_prior_limit() {
    let inst = sample_instance(2, 1.0, 2.0, RngSpec::new(4, 0)).unwrap();
    let m = small_n_quadrature(&PosteriorSpec::new(&inst, 0.7, 0.0).unwrap()).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert_abs_diff_eq!(m.get(i, j), if i == j { 0.49 } else { 0.0 }, epsilon = 1e-6);
        }
    }
}

#[test]
fn quadrature_two_dimensional_oracle() {
    let (gamma, sp, lp) = (1.5, 1.0, 2.0);
    let y = SymMatrix::from_diagonal(&[gamma, -gamma]);
    let inst = SpikedInstance::from_parts(y, vec![0.0, 0.0], 1.0, 0.0, RngSpec::new(0, 0)).unwrap();
    let m = small_n_quadrature(&PosteriorSpec::new(&inst, sp, lp).unwrap()).unwrap();

    // Polar coordinates: the log density is -r²/2σ'² - λ'r⁴/8 + ½√(λ'/2) γ r² cos 2φ.
    let c = (lp / 2.0f64).sqrt() * gamma / 2.0;
    let (nr, nphi, rmax) = (4000, 2000, 8.0);
    let (mut z, mut m11, mut m22) = (0.0, 0.0, 0.0);
    for a in 1..nr {
        let r = rmax * a as f64 / nr as f64;
        for b in 0..nphi {
            let phi = 2.0 * std::f64::consts::PI * b as f64 / nphi as f64;
            let w = r * (-r * r / (2.0 * sp * sp) - lp * r.powi(4) / 8.0 + c * r * r * (2.0 * phi).cos()).exp();
            z += w;
            m11 += w * (r * phi.cos()).powi(2);
            m22 += w * (r * phi.sin()).powi(2);
        }
    }
    assert_abs_diff_eq!(m.get(0, 0), m11 / z, epsilon = 1e-6);
    assert_abs_diff_eq!(m.get(1, 1), m22 / z, epsilon = 1e-6);
    assert!(m.get(0, 1).abs() < 1e-14);
    assert!(m.get(0, 0) > m.get(1, 1));
}

#[derive(Deserialize)]
struct Fixture {
    seed: u64,
    stream: u64,
    sigma: f64,
    lambda: f64,
    sigma_p: f64,
    lambda_p: f64,
    eigvals: Vec<f64>,
    outer: Vec<Vec<f64>>,
}

#[test]
fn golden_three_dimensional_quadrature() {
    let f: Fixture = serde_json::from_str(include_str!("fixtures/quadrature_n3_seed42.json")).unwrap();
    let inst = sample_instance(3, f.sigma, f.lambda, RngSpec::new(f.seed, f.stream)).unwrap();
    for (a, b) in inst.eigvals.iter().zip(&f.eigvals) {
        assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
    }
    let spec = PosteriorSpec::new(&inst, f.sigma_p, f.lambda_p).unwrap();
    let m = small_n_quadrature(&spec).unwrap();
    let finer = small_n_quadrature_with(&spec, 96).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert_abs_diff_eq!(m.get(i, j), f.outer[i][j], epsilon = 1e-10);
            assert_abs_diff_eq!(m.get(i, j), finer.get(i, j), epsilon = 1e-8);
        }
    }
}

#[test]
fn mcmc_matches_quadrature_in_three_dimensions() {
    let inst = sample_instance(3, 1.0, 3.0, RngSpec::new(55, 0)).unwrap();
    let spec = PosteriorSpec::new(&inst, 1.2, 1.5).unwrap();
    let out = posterior_mean_outer(&spec, &ChainConfig::default().with_rng(RngSpec::new(56, 0))).unwrap();
    let (m, se) = (out.matrix(), out.entry_std_errors());
    let q = small_n_quadrature(&spec).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!((m.get(i, j) - q.get(i, j)).abs() <= 3.0 * se.get(i, j), "({i},{j})");
        }
    }
}

#[test]
fn chain_diagnostics() {
    let inst = sample_instance(60, 1.0, 2.0, RngSpec::new(6, 0)).unwrap();
    let spec = PosteriorSpec::new(&inst, 1.0, 2.0).unwrap();
    let out = posterior_mean_outer(&spec, &cfg(6)).unwrap();
    assert!(out.acceptance.iter().all(|a| (0.4..=0.7).contains(a)), "{:?}", out.acceptance);
    assert!(out.max_rhat <= 1.1);
    assert_eq!(out.cross_moments.len(), 4);
    for ((i, j), e) in &out.cross_moments {
        assert!(e.mean.abs() <= 4.0 * e.std_error, "<y{i} y{j}> = {e:?}");
    }
}

#[test]
fn mirrored_starts_agree() {
    let inst = sample_instance(20, 1.0, 2.0, RngSpec::new(7, 0)).unwrap();
    let spec = PosteriorSpec::new(&inst, 1.0, 2.0).unwrap();
    let cfg = cfg(7);
    let inits = default_inits(&spec, cfg.n_chains, RngSpec::new(7, 1));
    let mirrored: Vec<Vec<f64>> = inits.iter().map(|y| y.iter().map(|v| -v).collect()).collect();
    let a = posterior_mean_outer_from(&spec, &cfg, &inits).unwrap();
    let b = posterior_mean_outer_from(&spec, &cfg.with_rng(RngSpec::new(8, 0)), &mirrored).unwrap();
    for k in 0..20 {
        let se = a.std_errors[k].hypot(b.std_errors[k]);
        assert!((a.second_moments[k] - b.second_moments[k]).abs() <= 4.0 * se, "direction {k}");
    }
}

#[test]
fn invalid_chain_configs_are_rejected() {
    let inst = sample_instance(4, 1.0, 2.0, RngSpec::new(9, 0)).unwrap();
    let spec = PosteriorSpec::new(&inst, 1.0, 2.0).unwrap();
    let few = ChainConfig { n_chains: 3, ..ChainConfig::default() };
    assert!(posterior_mean_outer(&spec, &few).is_err());
    assert!(posterior_mean_outer_from(&spec, &ChainConfig::default(), &[vec![0.0; 4]]).is_err());
    assert!(PosteriorSpec::new(&inst, 0.0, 1.0).is_err());
}

#[test]
fn mse_experiment_is_schedule_independent() {
    let p = ProblemParams::new(1.0, 1.0, 0.5, 0.5).unwrap();
    let cfg = cfg(10);
    let a = mse_experiment(&p, 12, 8, &cfg, Exec::Sequential).unwrap();
    let b = mse_experiment(&p, 12, 8, &cfg, Exec::default()).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.asymptotic, 1.0);
    assert_eq!(a.diagnostics.len(), 8);
    assert_eq!(a.z_score, (a.mse.mean - a.asymptotic) / a.mse.std_error);
    assert!(mse_experiment(&p, 12, 7, &cfg, Exec::Sequential).is_err());
}

#[test]
fn mse_report_json_shape() {
    let p = ProblemParams::new(1.0, 1.0, 2.0, 2.0).unwrap();
    let r = mse_experiment(&p, 6, 8, &cfg(11), Exec::default()).unwrap();
    let v: serde_json::Value = serde_json::to_value(&r).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["asymptotic", "mse", "n", "params", "seed", "trials", "z_score"]);
    let mut mse_keys: Vec<&str> = v["mse"].as_object().unwrap().keys().map(String::as_str).collect();
    mse_keys.sort_unstable();
    assert_eq!(mse_keys, ["mean", "samples", "stderr"]);
    let mut pkeys: Vec<&str> = v["params"].as_object().unwrap().keys().map(String::as_str).collect();
    pkeys.sort_unstable();
    assert_eq!(pkeys, ["lambda", "lambda_p", "sigma", "sigma_p"]);
    assert_eq!(v["asymptotic"], 0.75);
    assert_eq!(v["seed"], 11);
}

#[test]
fn finite_n_mse_approaches_the_limit() {
    let p = ProblemParams::new(1.0, 1.0, 2.0, 2.0).unwrap();
    let target = asymptotic_mse(&p).unwrap();
    let cfg = cfg(12);
    let errs: Vec<(f64, f64)> = [100, 200, 400]
        .iter()
        .map(|&n| {
            let r = mse_experiment(&p, n, 8, &cfg, Exec::default()).unwrap();
            ((r.mse.mean - target).abs(), r.mse.std_error)
        })
        .collect();
    for w in errs.windows(2) {
        let ((e0, s0), (e1, s1)) = (w[0], w[1]);
        assert!(e1 <= e0 + 2.0 * s0.hypot(s1), "{errs:?}");
    }
}

#[test]
fn free_energy_vanishes_without_assumed_signal() {
    let p = ProblemParams::new(1.0, 1.0, 2.0, 1e-8).unwrap();
    let e = free_energy_experiment(&p, 50, 8, RngSpec::new(13, 0)).unwrap();
    assert!(e.mean.abs() <= 3.0 * e.std_error + 1e-4, "{e:?}");
}

#[test]
fn free_energy_methods_agree() {
    let p = ProblemParams::new(1.0, 1.0, 2.0, 2.0).unwrap();
    let exact = FreeEnergyConfig { exec: Exec::Sequential, ..FreeEnergyConfig::default() };
    let mc = FreeEnergyConfig { grid_points: 60, method: HcizMethod::MonteCarlo { samples: 4000 }, exec: Exec::default() };
    let a = free_energy_experiment_with(&p, 60, 8, RngSpec::new(14, 0), &exact).unwrap();
    let b = free_energy_experiment_with(&p, 60, 8, RngSpec::new(14, 0), &mc).unwrap();
    assert_abs_diff_eq!(a.mean, b.mean, epsilon = 5e-3);
    let c = free_energy_experiment_with(&p, 60, 8, RngSpec::new(14, 0), &FreeEnergyConfig::default()).unwrap();
    assert_eq!(a, c);
    assert!((a.mean - asymptotic_free_energy(&p).unwrap()).abs() < 0.05);
}
