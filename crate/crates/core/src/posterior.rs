//! Finite-n mismatched posterior: MALA sampling, empirical MSE and the
//! finite-n free energy.
//!
//! The statistician's posterior on `x ∈ ℝⁿ` has log-density (up to a
//! constant)
//!
//! ```text
//! -‖x‖²/(2σ'²) - (λ'/4n)‖x‖⁴ + ½√(λ'/n) xᵀYx.
//! ```
//!
//! Writing `x = Q y` with `Y = Q diag(γ) Qᵀ` turns this into
//! `-½ Σ aᵢ yᵢ² - (λ'/4n)‖y‖⁴` with `aᵢ = 1/σ'² - √(λ'/n) γᵢ`, which is even
//! in every coordinate separately. Hence `⟨yᵢ yⱼ⟩ = 0` for `i ≠ j` and
//! `⟨x xᵀ⟩ = Q diag(⟨yᵢ²⟩) Qᵀ`; the samplers here estimate only the
//! diagonal moments.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{ensure, Error, Result};
use crate::estimate::Estimate;
use crate::exec::Exec;
use crate::formulas::asymptotic_mse;
use crate::linalg::SymMatrix;
use crate::params::ProblemParams;
use crate::quadrature::gauss_legendre;
use crate::rng::RngSpec;
use crate::sim::{hciz_rank1_exact, hciz_rank1_mc, sample_instance, sample_spectrum, SpikedInstance};

/// Observation plus the statistician's assumed parameters.
#[derive(Debug, Clone, Copy)]
pub struct PosteriorSpec<'a> {
    pub instance: &'a SpikedInstance,
    pub sigma_p: f64,
    pub lambda_p: f64,
}

impl<'a> PosteriorSpec<'a> {
    pub fn new(instance: &'a SpikedInstance, sigma_p: f64, lambda_p: f64) -> Result<Self> {
        ensure(sigma_p.is_finite() && sigma_p > 0.0, || format!("sigma_p must be > 0, got {sigma_p}"))?;
        ensure(lambda_p.is_finite() && lambda_p >= 0.0, || format!("lambda_p must be >= 0, got {lambda_p}"))?;
        Ok(Self { instance, sigma_p, lambda_p })
    }

    fn n(&self) -> usize {
        self.instance.n
    }

    /// `aᵢ = 1/σ'² - √(λ'/n) γᵢ` in eigenvalue order.
    pub fn eigen_precisions(&self) -> Vec<f64> {
        let c = (self.lambda_p / self.n() as f64).sqrt();
        let base = 1.0 / (self.sigma_p * self.sigma_p);
        self.instance.eigvals.iter().map(|g| base - c * g).collect()
    }
}

/// Log posterior density (constant dropped) and its gradient at `x`.
pub fn log_posterior_grad(spec: &PosteriorSpec<'_>, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = spec.n();
    ensure(x.len() == n, || format!("x has length {}, expected {n}", x.len()))?;
    ensure(x.iter().all(|v| v.is_finite()), || "x must be finite".into())?;
    let nf = n as f64;
    let r: f64 = x.iter().map(|v| v * v).sum();
    let c = (spec.lambda_p / nf).sqrt();
    let yx = spec.instance.y.matvec(x);
    let quad: f64 = yx.iter().zip(x).map(|(a, b)| a * b).sum();
    let inv_var = 1.0 / (spec.sigma_p * spec.sigma_p);
    let value = -0.5 * r * inv_var - spec.lambda_p / (4.0 * nf) * r * r + 0.5 * c * quad;
    let radial = inv_var + spec.lambda_p / nf * r;
    let grad = x.iter().zip(&yx).map(|(xi, yi)| -radial * xi + c * yi).collect();
    Ok((value, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub n_chains: usize,
    pub burn_in: usize,
    pub n_samples: usize,
    pub target_accept: f64,
    pub step_init: f64,
    pub rng: RngSpec,
    /// How chains of one posterior are dispatched.
    pub exec: Exec,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            burn_in: 3000,
            n_samples: 6000,
            target_accept: 0.574,
            step_init: 0.5,
            rng: RngSpec::new(0, 0),
            exec: Exec::Sequential,
        }
    }
}

impl ChainConfig {
    pub fn with_rng(self, rng: RngSpec) -> Self {
        Self { rng, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.n_chains >= 4, || format!("need at least 4 chains, got {}", self.n_chains))?;
        ensure(self.burn_in >= 200, || format!("burn-in must be >= 200, got {}", self.burn_in))?;
        ensure(self.n_samples >= N_BATCHES, || format!("need at least {N_BATCHES} samples, got {}", self.n_samples))?;
        ensure(self.target_accept > 0.0 && self.target_accept < 1.0, || {
            format!("target acceptance must lie in (0, 1), got {}", self.target_accept)
        })?;
        ensure(self.step_init.is_finite() && self.step_init > 0.0, || {
            format!("initial step must be > 0, got {}", self.step_init)
        })
    }
}

const N_BATCHES: usize = 20;
const RHAT_THRESHOLD: f64 = 1.1;
const PRECOND_REFRESH: usize = 100;

/// Result of [`posterior_mean_outer`]: the Rao–Blackwellized estimate of
/// `⟨x xᵀ⟩` kept in factored form.
#[derive(Debug, Clone)]
pub struct PosteriorOuter<'a> {
    spec: PosteriorSpec<'a>,
    /// `⟨yᵢ²⟩` in eigenvalue order.
    pub second_moments: Vec<f64>,
    /// Batch-means standard errors of `second_moments`.
    pub std_errors: Vec<f64>,
    /// Selected off-diagonal `⟨yᵢ yⱼ⟩` in the eigenbasis.
    pub cross_moments: Vec<((usize, usize), Estimate)>,
    /// Post-burn-in acceptance rate of each chain.
    pub acceptance: Vec<f64>,
    pub step_sizes: Vec<f64>,
    /// Largest split-R̂ among the monitored eigendirections.
    pub max_rhat: f64,
}

impl PosteriorOuter<'_> {
    pub fn matrix(&self) -> SymMatrix {
        self.spec.instance.eigvecs.congruence_diag(&self.second_moments)
    }

    /// Entrywise standard errors of [`Self::matrix`], treating the
    /// per-direction estimates as independent.
    pub fn entry_std_errors(&self) -> SymMatrix {
        let q = &self.spec.instance.eigvecs;
        let n = self.spec.n();
        SymMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| {
                    let w = q.get(i, k) * q.get(j, k) * self.std_errors[k];
                    w * w
                })
                .sum::<f64>()
                .sqrt()
        })
    }

    /// `‖s sᵀ - ⟨x xᵀ⟩‖²_F / n²`.
    pub fn squared_error(&self) -> f64 {
        let inst = self.spec.instance;
        let n = inst.n as f64;
        let proj = inst.eigvecs.transpose_matvec(&inst.s);
        let s2: f64 = inst.s.iter().map(|v| v * v).sum();
        let cross: f64 = self.second_moments.iter().zip(&proj).map(|(m, p)| m * p * p).sum();
        let sq: f64 = self.second_moments.iter().map(|m| m * m).sum();
        (s2 * s2 - 2.0 * cross + sq) / (n * n)
    }

    /// Share of [`Self::squared_error`] coming from diagonal entries.
    pub fn diagonal_error(&self) -> f64 {
        let inst = self.spec.instance;
        let q = &inst.eigvecs;
        let n = inst.n;
        let mut total = 0.0;
        for i in 0..n {
            let xi: f64 = (0..n).map(|k| q.get(i, k) * q.get(i, k) * self.second_moments[k]).sum();
            let d = inst.s[i] * inst.s[i] - xi;
            total += d * d;
        }
        total / (n * n) as f64
    }
}

struct ChainRun {
    /// `N_BATCHES × n` batch means of `yᵢ²`.
    batches: Vec<Vec<f64>>,
    /// Batch means of the monitored cross products.
    cross_batches: Vec<Vec<f64>>,
    /// Per-sample traces of `yᵢ²` for the monitored directions.
    traces: Vec<Vec<f64>>,
    acceptance: f64,
    step: f64,
}

struct Target<'s> {
    a: &'s [f64],
    quartic: f64,
}

impl Target<'_> {
    fn log_density(&self, y: &[f64]) -> f64 {
        let mut quad = 0.0;
        let mut r = 0.0;
        for (ai, yi) in self.a.iter().zip(y) {
            let y2 = yi * yi;
            quad += ai * y2;
            r += y2;
        }
        -0.5 * quad - 0.25 * self.quartic * r * r
    }

    /// Positive metric entry from a diagonal Hessian entry, which is negative
    /// near the origin along directions where the quadratic part is unstable.
    fn metric(&self, h_ii: f64) -> f64 {
        h_ii.abs().max(self.quartic.sqrt()).max(1e-6)
    }

    fn grad_into(&self, y: &[f64], out: &mut [f64]) -> f64 {
        let r: f64 = y.iter().map(|v| v * v).sum();
        let radial = self.quartic * r;
        for ((o, ai), yi) in out.iter_mut().zip(self.a).zip(y) {
            *o = -(ai + radial) * yi;
        }
        r
    }
}

fn monitored_directions(n: usize) -> Vec<usize> {
    if n <= 10 {
        (0..n).collect()
    } else {
        (0..5).chain(n - 5..n).collect()
    }
}

fn monitored_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = vec![(0, 1), (1, 2), (0, n - 1), (n - 2, n - 1)];
    pairs.retain(|&(i, j)| i < j && j < n);
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Starting points covering small, prior-sized, spike-aligned and random
/// radii, cycled when more chains are requested.
pub fn default_inits(spec: &PosteriorSpec<'_>, n_chains: usize, rng: RngSpec) -> Vec<Vec<f64>> {
    let n = spec.n();
    let sp = spec.sigma_p;
    let mut r = rng.rng();
    (0..n_chains)
        .map(|c| {
            let mut y: Vec<f64> = (0..n).map(|_| sp * r.sample::<f64, _>(StandardNormal)).collect();
            match c % 4 {
                0 => y.iter_mut().for_each(|v| *v *= 0.1),
                1 => {}
                2 => y[0] = 2.0 * sp * (n as f64).sqrt(),
                _ => {
                    let scale = r.gen_range(0.5..2.0);
                    y.iter_mut().for_each(|v| *v *= scale)
                }
            }
            y
        })
        .collect()
}

fn run_chain(target: &Target<'_>, init: &[f64], cfg: &ChainConfig, rng: RngSpec, dirs: &[usize], pairs: &[(usize, usize)]) -> ChainRun {
    let n = init.len();
    let mut r = rng.rng();
    let mut y = init.to_vec();
    let mut g = vec![0.0; n];
    let mut radius = target.grad_into(&y, &mut g);
    let mut logp = target.log_density(&y);
    let mut prec: Vec<f64> = target.a.iter().map(|a| target.metric(a + target.quartic * radius)).collect();
    let mut log_step = cfg.step_init.ln();
    let mut log_step_tail = 0.0;
    let mut tail_count = 0usize;

    let mut yp = vec![0.0; n];
    let mut gp = vec![0.0; n];
    let mut window_y2 = vec![0.0; n];
    let mut window_r = 0.0;
    let mut window_len = 0usize;

    let batch_len = cfg.n_samples / N_BATCHES;
    let kept = batch_len * N_BATCHES;
    let mut batches = vec![vec![0.0; n]; N_BATCHES];
    let mut cross_batches = vec![vec![0.0; pairs.len()]; N_BATCHES];
    let mut traces = vec![Vec::with_capacity(kept); dirs.len()];
    let mut accepted = 0usize;
    let mut step = log_step.exp();

    for it in 0..cfg.burn_in + kept {
        let burning = it < cfg.burn_in;
        if burning {
            step = log_step.exp();
        }
        let h = step * step;
        // Proposal: y' = y + ½h M⁻¹∇ + step M^{-1/2} ξ.
        for i in 0..n {
            let minv = 1.0 / prec[i];
            let xi: f64 = r.sample(StandardNormal);
            yp[i] = y[i] + 0.5 * h * minv * g[i] + step * minv.sqrt() * xi;
        }
        let rp = target.grad_into(&yp, &mut gp);
        let logp_new = target.log_density(&yp);
        let mut log_q = 0.0;
        for i in 0..n {
            let minv = 1.0 / prec[i];
            let fwd = yp[i] - y[i] - 0.5 * h * minv * g[i];
            let bwd = y[i] - yp[i] - 0.5 * h * minv * gp[i];
            log_q += (fwd * fwd - bwd * bwd) * prec[i];
        }
        let log_alpha = logp_new - logp + log_q / (2.0 * h);
        let u: f64 = r.gen();
        let accept = log_alpha >= 0.0 || u.ln() < log_alpha;
        if accept {
            std::mem::swap(&mut y, &mut yp);
            std::mem::swap(&mut g, &mut gp);
            logp = logp_new;
            radius = rp;
        }

        if burning {
            let a = if log_alpha >= 0.0 { 1.0 } else { log_alpha.exp() };
            log_step += 0.02 * (a - cfg.target_accept);
            if it >= cfg.burn_in / 2 {
                log_step_tail += log_step;
                tail_count += 1;
                if it + 1 == cfg.burn_in {
                    step = (log_step_tail / tail_count.max(1) as f64).exp();
                }
                continue;
            }
            // The metric is frozen for the second half so that the averaged
            // step matches it.
            for (w, v) in window_y2.iter_mut().zip(&y) {
                *w += v * v;
            }
            window_r += radius;
            window_len += 1;
            if window_len == PRECOND_REFRESH {
                let inv = 1.0 / window_len as f64;
                let rbar = window_r * inv;
                for i in 0..n {
                    let h_ii = target.a[i] + target.quartic * rbar + 2.0 * target.quartic * window_y2[i] * inv;
                    prec[i] = target.metric(h_ii);
                }
                window_y2.iter_mut().for_each(|w| *w = 0.0);
                window_r = 0.0;
                window_len = 0;
            }
            continue;
        }

        if accept {
            accepted += 1;
        }
        let k = (it - cfg.burn_in) / batch_len;
        for (b, v) in batches[k].iter_mut().zip(&y) {
            *b += v * v;
        }
        for (c, &(i, j)) in cross_batches[k].iter_mut().zip(pairs) {
            *c += y[i] * y[j];
        }
        for (t, &d) in traces.iter_mut().zip(dirs) {
            t.push(y[d] * y[d]);
        }
    }
    let inv = 1.0 / batch_len as f64;
    for b in batches.iter_mut().chain(cross_batches.iter_mut()) {
        b.iter_mut().for_each(|v| *v *= inv);
    }
    ChainRun { batches, cross_batches, traces, acceptance: accepted as f64 / kept as f64, step }
}

/// Split-R̂ of equal-length chains.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let half = chains.iter().map(|c| c.len() / 2).min().unwrap_or(0);
    if half < 2 {
        return f64::NAN;
    }
    let seqs: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..half], &c[half..2 * half]]).collect();
    let m = seqs.len() as f64;
    let l = half as f64;
    let means: Vec<f64> = seqs.iter().map(|s| s.iter().sum::<f64>() / l).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = l / (m - 1.0) * means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>();
    let w = seqs
        .iter()
        .zip(&means)
        .map(|(s, mu)| s.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (l - 1.0))
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    (((l - 1.0) / l * w + b / l) / w).sqrt()
}

/// Estimates `⟨x xᵀ⟩` with MALA chains started from [`default_inits`].
pub fn posterior_mean_outer<'a>(spec: &PosteriorSpec<'a>, cfg: &ChainConfig) -> Result<PosteriorOuter<'a>> {
    cfg.validate()?;
    let inits = default_inits(spec, cfg.n_chains, cfg.rng.child(u64::MAX));
    posterior_mean_outer_from(spec, cfg, &inits)
}

/// As [`posterior_mean_outer`] with explicit starting points, given in the
/// eigenbasis of `Y`.
pub fn posterior_mean_outer_from<'a>(
    spec: &PosteriorSpec<'a>,
    cfg: &ChainConfig,
    inits: &[Vec<f64>],
) -> Result<PosteriorOuter<'a>> {
    cfg.validate()?;
    let n = spec.n();
    ensure(inits.len() == cfg.n_chains, || format!("{} starting points for {} chains", inits.len(), cfg.n_chains))?;
    ensure(inits.iter().all(|y| y.len() == n && y.iter().all(|v| v.is_finite())), || {
        format!("starting points must be finite vectors of length {n}")
    })?;
    let a = spec.eigen_precisions();
    let target = Target { a: &a, quartic: spec.lambda_p / n as f64 };
    let dirs = monitored_directions(n);
    let pairs = monitored_pairs(n);
    let runs =
        cfg.exec.map(cfg.n_chains, |c| run_chain(&target, &inits[c], cfg, cfg.rng.child(c as u64), &dirs, &pairs));

    let mut second_moments = vec![0.0; n];
    let mut std_errors = vec![0.0; n];
    for i in 0..n {
        let vals: Vec<f64> = runs.iter().flat_map(|r| r.batches.iter().map(move |b| b[i])).collect();
        let e = Estimate::from_samples(&vals);
        second_moments[i] = e.mean;
        std_errors[i] = e.std_error;
    }
    let cross_moments = pairs
        .iter()
        .enumerate()
        .map(|(k, &pair)| {
            let vals: Vec<f64> = runs.iter().flat_map(|r| r.cross_batches.iter().map(move |b| b[k])).collect();
            (pair, Estimate::from_samples(&vals))
        })
        .collect();

    let mut max_rhat: f64 = 1.0;
    for (k, &d) in dirs.iter().enumerate() {
        let traces: Vec<&[f64]> = runs.iter().map(|r| r.traces[k].as_slice()).collect();
        let rhat = split_rhat(&traces);
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(rhat <= RHAT_THRESHOLD) {
            return Err(Error::NonConvergence { rhat, direction: d, threshold: RHAT_THRESHOLD });
        }
        max_rhat = max_rhat.max(rhat);
    }
    Ok(PosteriorOuter {
        spec: *spec,
        second_moments,
        std_errors,
        cross_moments,
        acceptance: runs.iter().map(|r| r.acceptance).collect(),
        step_sizes: runs.iter().map(|r| r.step).collect(),
        max_rhat,
    })
}

/// `⟨x xᵀ⟩` by tensor-product Gauss–Legendre quadrature in the eigenbasis,
/// for `n ≤ 4`.
pub fn small_n_quadrature(spec: &PosteriorSpec<'_>) -> Result<SymMatrix> {
    small_n_quadrature_with(spec, 64)
}

pub fn small_n_quadrature_with(spec: &PosteriorSpec<'_>, nodes: usize) -> Result<SymMatrix> {
    let n = spec.n();
    if n > 4 {
        return Err(Error::DimensionTooLarge(n));
    }
    ensure(nodes >= 64, || format!("need at least 64 nodes per axis, got {nodes}"))?;
    let a = spec.eigen_precisions();
    let nf = n as f64;
    let quartic = spec.lambda_p / nf;
    let half: Vec<f64> = a.iter().map(|&ai| axis_half_width(ai, quartic, spec.sigma_p)).collect();
    let (x, w) = gauss_legendre(nodes);
    let axes: Vec<Vec<(f64, f64)>> =
        half.iter().map(|&l| x.iter().zip(&w).map(|(xi, wi)| (l * xi, l * wi)).collect()).collect();
    let target = Target { a: &a, quartic };

    let total = nodes.pow(n as u32);
    let point = |mut idx: usize, y: &mut [f64]| -> f64 {
        let mut wt = 1.0;
        for d in 0..n {
            let (yi, wi) = axes[d][idx % nodes];
            y[d] = yi;
            wt *= wi;
            idx /= nodes;
        }
        wt
    };
    let mut y = vec![0.0; n];
    let mut max_log = f64::NEG_INFINITY;
    for idx in 0..total {
        point(idx, &mut y);
        max_log = max_log.max(target.log_density(&y));
    }
    let mut z = 0.0;
    let mut moments = vec![0.0; n * n];
    for idx in 0..total {
        let wt = point(idx, &mut y);
        let p = wt * (target.log_density(&y) - max_log).exp();
        z += p;
        for i in 0..n {
            for j in i..n {
                moments[i * n + j] += p * y[i] * y[j];
            }
        }
    }
    // Back to the original coordinates: Q M Qᵀ, symmetric by construction.
    let q = &spec.instance.eigvecs;
    Ok(SymMatrix::from_fn(n, |r, c| {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let m = if i <= j { moments[i * n + j] } else { moments[j * n + i] };
                acc += q.get(r, i) * m * q.get(c, j);
            }
        }
        acc / z
    }))
}

/// Half-width `L` beyond which the axis profile `-½a y² - ¼q y⁴` sits 40
/// nats below its maximum. Conditioning on the other coordinates only adds
/// to the quadratic coefficient, so every conditional is negligible outside
/// `[-L, L]`.
fn axis_half_width(a: f64, q: f64, sigma_p: f64) -> f64 {
    const DROP: f64 = 40.0;
    let profile = |y: f64| -0.5 * a * y * y - 0.25 * q * y.powi(4);
    let (mode, peak) = if a < 0.0 && q > 0.0 { ((-a / q).sqrt(), a * a / (4.0 * q)) } else { (0.0, 0.0) };
    let mut lo = mode;
    let mut hi = mode + sigma_p.max(1e-3);
    while profile(hi) > peak - DROP {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if profile(mid) > peak - DROP {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Per-trial diagnostics of [`mse_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDiagnostics {
    pub squared_error: f64,
    /// Contribution of the diagonal entries to `squared_error`.
    pub diagonal_error: f64,
    pub min_acceptance: f64,
    pub max_acceptance: f64,
    pub max_rhat: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MseReport {
    pub n: usize,
    pub trials: usize,
    pub params: ProblemParams,
    pub mse: Estimate,
    pub asymptotic: f64,
    pub z_score: f64,
    pub seed: u64,
    #[serde(skip)]
    pub diagnostics: Vec<TrialDiagnostics>,
}

/// Empirical `E‖s sᵀ - ⟨x xᵀ⟩‖²_F / n²` over independent instances.
///
/// Trial `t` draws its instance from `cfg.rng.child(t).child(0)` and its
/// chains from `cfg.rng.child(t).child(1)`; trials are dispatched through
/// `exec`.
pub fn mse_experiment(p: &ProblemParams, n: usize, trials: usize, cfg: &ChainConfig, exec: Exec) -> Result<MseReport> {
    p.validate()?;
    cfg.validate()?;
    ensure(trials >= 8, || format!("need at least 8 trials, got {trials}"))?;
    if n < 2 {
        return Err(Error::DegenerateInput(format!("need n >= 2, got {n}")));
    }
    let per_trial = exec.try_map(trials, |t| -> Result<TrialDiagnostics> {
        let base = cfg.rng.child(t as u64);
        let inst = sample_instance(n, p.sigma, p.lambda, base.child(0))?;
        let spec = PosteriorSpec::new(&inst, p.sigma_p, p.lambda_p)?;
        let out = posterior_mean_outer(&spec, &cfg.with_rng(base.child(1)))?;
        Ok(TrialDiagnostics {
            squared_error: out.squared_error(),
            diagonal_error: out.diagonal_error(),
            min_acceptance: out.acceptance.iter().copied().fold(f64::INFINITY, f64::min),
            max_acceptance: out.acceptance.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            max_rhat: out.max_rhat,
        })
    })?;
    let errors: Vec<f64> = per_trial.iter().map(|d| d.squared_error).collect();
    let mse = Estimate::from_samples(&errors);
    let asymptotic = asymptotic_mse(p)?;
    Ok(MseReport {
        n,
        trials,
        params: *p,
        mse,
        asymptotic,
        z_score: mse.z_score(asymptotic),
        seed: cfg.rng.seed,
        diagnostics: per_trial,
    })
}

/// How the spherical-integral factor of the radial integrand is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HcizMethod {
    /// Contour-integral evaluation, exact up to quadrature error.
    Exact,
    /// [`hciz_rank1_mc`] with the given number of directions.
    MonteCarlo { samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeEnergyConfig {
    pub grid_points: usize,
    pub method: HcizMethod,
    pub exec: Exec,
}

impl Default for FreeEnergyConfig {
    fn default() -> Self {
        Self { grid_points: 200, method: HcizMethod::Exact, exec: Exec::default() }
    }
}

/// `ln Z(Y)` for the spectrum `gammas` of `Y/√n` via the radial reduction.
///
/// With `r = ‖x‖²/n`, the prior makes `r ~ Gamma(n/2, 2σ'²/n)` and the
/// likelihood factor becomes `exp(-nλ'r²/4) · E_u[exp(n (√λ' r/2) uᵀ(Y/√n)u)]`.
/// The `r` integral is a trapezoid rule on a log-spaced grid over
/// `[10⁻³, 20σ'²]`.
pub fn log_partition(
    gammas: &[f64],
    sigma_p: f64,
    lambda_p: f64,
    cfg: &FreeEnergyConfig,
    rng: RngSpec,
) -> Result<f64> {
    let n = gammas.len();
    if n < 2 {
        return Err(Error::DegenerateInput(format!("need n >= 2, got {n}")));
    }
    ensure(cfg.grid_points >= 2, || "need at least 2 grid points".into())?;
    let nf = n as f64;
    let shape = nf / 2.0;
    let scale = 2.0 * sigma_p * sigma_p / nf;
    let lo = 1e-3f64.ln();
    let hi = (20.0 * sigma_p * sigma_p).ln();
    let step = (hi - lo) / (cfg.grid_points - 1) as f64;
    let mut vals = Vec::with_capacity(cfg.grid_points);
    for k in 0..cfg.grid_points {
        let lr = lo + step * k as f64;
        let r = lr.exp();
        let log_prior = -ln_gamma(shape) - shape * scale.ln() + (shape - 1.0) * lr - r / scale;
        let theta = lambda_p.sqrt() * r / 2.0;
        let j = match cfg.method {
            HcizMethod::Exact => hciz_rank1_exact(gammas, theta)?,
            HcizMethod::MonteCarlo { samples } => hciz_rank1_mc(gammas, theta, samples, rng.child(k as u64))?.mean,
        };
        // The extra `lr` is the Jacobian of r = e^{lr}.
        vals.push(log_prior + lr - nf * lambda_p * r * r / 4.0 + nf * j);
    }
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = vals.iter().map(|v| (v - max).exp()).collect();
    let sum = w.iter().sum::<f64>() - 0.5 * (w[0] + w[w.len() - 1]);
    Ok(max + (step * sum).ln())
}

/// Finite-n free energy `-(1/n) E ln Z(Y)` over independent instances.
pub fn free_energy_experiment(p: &ProblemParams, n: usize, trials: usize, rng: RngSpec) -> Result<Estimate> {
    free_energy_experiment_with(p, n, trials, rng, &FreeEnergyConfig::default())
}

pub fn free_energy_experiment_with(
    p: &ProblemParams,
    n: usize,
    trials: usize,
    rng: RngSpec,
    cfg: &FreeEnergyConfig,
) -> Result<Estimate> {
    p.validate()?;
    ensure(trials >= 8, || format!("need at least 8 trials, got {trials}"))?;
    let values = cfg.exec.try_map(trials, |t| -> Result<f64> {
        let base = rng.child(t as u64);
        let gammas = sample_spectrum(n, p.sigma, p.lambda, base.child(0))?;
        Ok(-log_partition(&gammas, p.sigma_p, p.lambda_p, cfg, base.child(1))? / n as f64)
    })?;
    Ok(Estimate::from_samples(&values))
}
