use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mismatch_core::posterior::{free_energy_experiment_with, mse_experiment, ChainConfig, FreeEnergyConfig};
use mismatch_core::sim::sample_spectrum;
use mismatch_core::{Exec, ProblemParams, RngSpec};

fn modes() -> Vec<(&'static str, Exec)> {
    #[cfg_attr(not(feature = "parallel"), allow(unused_mut))]
    let mut m = vec![("sequential", Exec::Sequential)];
    #[cfg(feature = "parallel")]
    m.push(("parallel", Exec::Parallel));
    m
}

fn spectra(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectra_n200_x16");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exec.map(16, |t| sample_spectrum(200, 1.0, 4.0, RngSpec::new(1, t as u64)).unwrap()[0]))
        });
    }
    g.finish();
}

fn mse_trials(c: &mut Criterion) {
    let p = ProblemParams::new(1.0, 1.0, 2.0, 2.0).unwrap();
    let cfg = ChainConfig { burn_in: 500, n_samples: 1000, ..ChainConfig::default() };
    let mut g = c.benchmark_group("mse_n100_x8");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mse_experiment(&p, 100, 8, &cfg, exec).unwrap().mse.mean)
        });
    }
    g.finish();
}

fn free_energy(c: &mut Criterion) {
    let p = ProblemParams::new(1.0, 1.0, 2.0, 2.0).unwrap();
    let mut g = c.benchmark_group("free_energy_n100_x8");
    g.sample_size(10);
    for (name, exec) in modes() {
        let cfg = FreeEnergyConfig { grid_points: 50, exec, ..FreeEnergyConfig::default() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| free_energy_experiment_with(&p, 100, 8, RngSpec::new(2, 0), &cfg).unwrap().mean)
        });
    }
    g.finish();
}

criterion_group!(benches, spectra, mse_trials, free_energy);
criterion_main!(benches);
