//! Finite-n spiked Wigner matrices and the rank-one spherical integral.
//!
//! An instance is `Y = √(λ/n) s sᵀ + Z` with `s_i ~ N(0, σ²)` and `Z`
//! symmetric, `N(0, 1)` off the diagonal and `N(0, 2)` on it. Draw order is
//! fixed: the `n` entries of `s`, then the upper triangle of `Z` row by row
//! (diagonal first in each row). Eigenvalues are stored for `Y` itself; the
//! spectrum of `Y/√n` is [`SpikedInstance::normalized_eigvals`].

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use crate::error::{ensure, Error, Result};
use crate::estimate::Estimate;
use crate::linalg::{symmetric_eig, symmetric_eigvals, DenseMatrix, SymMatrix};
use crate::quadrature::{integrate_half_line, QuadratureConfig};
use crate::rng::RngSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct SpikedInstance {
    pub n: usize,
    pub sigma: f64,
    pub lambda: f64,
    pub rng: RngSpec,
    pub s: Vec<f64>,
    pub y: SymMatrix,
    /// Eigenvalues of `Y`, descending.
    pub eigvals: Vec<f64>,
    /// Column `k` is the unit eigenvector for `eigvals[k]`.
    pub eigvecs: DenseMatrix,
}

impl SpikedInstance {
    /// Wraps a given observation, computing its eigendecomposition.
    pub fn from_parts(y: SymMatrix, s: Vec<f64>, sigma: f64, lambda: f64, rng: RngSpec) -> Result<Self> {
        if s.len() != y.dim() {
            return Err(Error::InvalidParameter(format!("signal length {} for dimension {}", s.len(), y.dim())));
        }
        let eig = symmetric_eig(&y)?;
        Ok(Self { n: y.dim(), sigma, lambda, rng, s, y, eigvals: eig.values, eigvecs: eig.vectors })
    }

    /// Eigenvalues of `Y/√n`, descending.
    pub fn normalized_eigvals(&self) -> Vec<f64> {
        let scale = 1.0 / (self.n as f64).sqrt();
        self.eigvals.iter().map(|g| g * scale).collect()
    }

    /// `Y - √(λ/n) s sᵀ`.
    pub fn noise(&self) -> SymMatrix {
        let c = (self.lambda / self.n as f64).sqrt();
        SymMatrix::from_fn(self.n, |i, j| self.y.get(i, j) - c * self.s[i] * self.s[j])
    }

    pub fn dump(&self) -> InstanceDump {
        InstanceDump {
            n: self.n,
            rng: self.rng,
            lambda: self.lambda,
            sigma: self.sigma,
            eigvals: self.eigvals.clone(),
        }
    }
}

fn check_sampling_args(n: usize, sigma: f64, lambda: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::DegenerateInput(format!("need n >= 2, got {n}")));
    }
    ensure(sigma.is_finite() && sigma > 0.0, || format!("sigma must be > 0, got {sigma}"))?;
    ensure(lambda.is_finite() && lambda >= 0.0, || format!("lambda must be >= 0, got {lambda}"))
}

fn sample_signal_and_observation(n: usize, sigma: f64, lambda: f64, spec: RngSpec) -> (Vec<f64>, SymMatrix) {
    let mut rng = spec.rng();
    let s: Vec<f64> = (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
    let c = (lambda / n as f64).sqrt();
    let sqrt2 = std::f64::consts::SQRT_2;
    let y = SymMatrix::from_fn(n, |i, j| {
        let z: f64 = rng.sample(StandardNormal);
        let z = if i == j { sqrt2 * z } else { z };
        c * s[i] * s[j] + z
    });
    (s, y)
}

/// Draws an instance and its full eigendecomposition.
pub fn sample_instance(n: usize, sigma: f64, lambda: f64, rng: RngSpec) -> Result<SpikedInstance> {
    check_sampling_args(n, sigma, lambda)?;
    let (s, y) = sample_signal_and_observation(n, sigma, lambda, rng);
    let eig = symmetric_eig(&y)?;
    Ok(SpikedInstance { n, sigma, lambda, rng, s, y, eigvals: eig.values, eigvecs: eig.vectors })
}

/// Same draw as [`sample_instance`] but returns only the spectrum of `Y/√n`.
pub fn sample_spectrum(n: usize, sigma: f64, lambda: f64, rng: RngSpec) -> Result<Vec<f64>> {
    check_sampling_args(n, sigma, lambda)?;
    let (_, y) = sample_signal_and_observation(n, sigma, lambda, rng);
    let scale = 1.0 / (n as f64).sqrt();
    Ok(symmetric_eigvals(&y)?.into_iter().map(|g| g * scale).collect())
}

/// Sup distance between the empirical CDF of `values` and `cdf`.
pub fn kolmogorov_distance(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Rank-one spherical integral
// ---------------------------------------------------------------------------

/// Solves `(1/n) Σ 1/(ν - γᵢ) = z` for `ν > max γ`, `z > 0`.
fn saddle(gammas: &[f64], z: f64) -> f64 {
    let n = gammas.len() as f64;
    let gmax = gammas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let excess = |v: f64| gammas.iter().map(|g| 1.0 / (v - g)).sum::<f64>() / n - z;
    let mut lo = gmax;
    // At ν = max γ + 1/z every term is below z.
    let mut hi = gmax + 1.0 / z;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_spectrum(eigvals: &[f64], theta: f64) -> Result<()> {
    if eigvals.len() < 2 {
        return Err(Error::DegenerateInput(format!("need at least 2 eigenvalues, got {}", eigvals.len())));
    }
    ensure(eigvals.iter().all(|g| g.is_finite()), || "eigenvalues must be finite".into())?;
    ensure(theta.is_finite(), || format!("theta must be finite, got {theta}"))
}

/// `(1/n) ln E_u[exp(nθ Σ γᵢ uᵢ²)]` over the unit sphere, evaluated as a
/// contour integral.
///
/// The sphere average equals `Γ(n/2) (2πi)⁻¹ ∫ e^s Π (s - nθγᵢ)^{-1/2} ds`
/// along any upward contour right of the poles. The contour used is the
/// parabola `s = c - κy² + iy` through the saddle `c` with `κ` the
/// curvature of the phase there, so the integrand is non-oscillating near
/// the saddle and decays like a Gaussian in `y`.
pub fn hciz_rank1_exact(eigvals: &[f64], theta: f64) -> Result<f64> {
    check_spectrum(eigvals, theta)?;
    if theta == 0.0 {
        return Ok(0.0);
    }
    let n = eigvals.len();
    let nf = n as f64;
    let (sign, th) = if theta > 0.0 { (1.0, theta) } else { (-1.0, -theta) };
    let t = nf * th;
    let poles: Vec<f64> = eigvals.iter().map(|g| sign * g * t).collect();
    // ½ Σ 1/(c - aᵢ) = 1  ⟺  (1/n) Σ 1/(c/t - γᵢ) = 2θ.
    let gammas: Vec<f64> = eigvals.iter().map(|g| sign * g).collect();
    let c = t * saddle(&gammas, 2.0 * th);
    let phi_c = c - 0.5 * poles.iter().map(|a| (c - a).ln()).sum::<f64>();
    let kappa = 0.5 * poles.iter().map(|a| (c - a).powi(-2)).sum::<f64>();
    let root_k = kappa.sqrt();
    let integrand = |x: f64| {
        let y = x / root_k;
        let s = Complex64::new(c - kappa * y * y, y);
        let log_prod: Complex64 = poles.iter().map(|&a| (s - a).ln()).sum();
        let phase = s - 0.5 * log_prod - phi_c;
        (phase.exp() * Complex64::new(1.0, 2.0 * kappa * y)).re / root_k
    };
    let cfg = QuadratureConfig { abs_tol: 0.0, rel_tol: 1e-11, max_intervals: 4000 };
    let val = integrate_half_line(integrand, &[1.0], &cfg)?.value / std::f64::consts::PI;
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(val > 0.0) {
        return Err(Error::DegenerateInput(format!("contour integral evaluated to {val}")));
    }
    Ok((ln_gamma(nf / 2.0) + phi_c + val.ln()) / nf)
}

/// Monte Carlo estimate of `(1/n) ln E_u[exp(nθ Σ γᵢ uᵢ²)]`.
///
/// Directions are drawn from the angular central Gaussian with precision
/// `diag(ν - γᵢ)`, where `ν` is the finite-n saddle of the integral, and
/// reweighted to the uniform measure. Uniform sampling would be exact in law
/// but, once `nθ` is large, the mean is carried by exponentially rare
/// directions. The estimate is the log-mean-exp of the log-weights divided
/// by `n`, with a jackknife standard error.
pub fn hciz_rank1_mc(eigvals: &[f64], theta: f64, samples: usize, rng: RngSpec) -> Result<Estimate> {
    check_spectrum(eigvals, theta)?;
    ensure(samples >= 1000, || format!("need at least 1000 samples, got {samples}"))?;
    if theta == 0.0 {
        return Ok(Estimate::new(0.0, 0.0, samples));
    }
    let n = eigvals.len();
    let nf = n as f64;
    let (th, gammas): (f64, Vec<f64>) =
        if theta > 0.0 { (theta, eigvals.to_vec()) } else { (-theta, eigvals.iter().map(|g| -g).collect()) };
    let nu = saddle(&gammas, 2.0 * th);
    let d: Vec<f64> = gammas.iter().map(|g| nu - g).collect();
    let sd: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let half_log_det = 0.5 * d.iter().map(|x| x.ln()).sum::<f64>();
    let mut r = rng.rng();
    let mut log_w = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut norm2 = 0.0;
        let mut q = 0.0;
        for (g, s) in gammas.iter().zip(&sd) {
            let x = s * r.sample::<f64, _>(StandardNormal);
            let x2 = x * x;
            norm2 += x2;
            q += g * x2;
        }
        q /= norm2;
        log_w.push(nf * th * q + 0.5 * nf * (nu - q).ln() - half_log_det);
    }
    Ok(Estimate::log_mean_exp(&log_w).scaled(1.0 / nf))
}

// ---------------------------------------------------------------------------
// Binary spectrum cache
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 5] = b"SPWG1";

/// Cached spectrum of an instance. Layout, all little-endian: magic
/// `SPWG1`, `n: u64`, `seed: u64`, `stream: u64`, `lambda: f64`,
/// `sigma: f64`, then `n` eigenvalues as `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceDump {
    pub n: usize,
    pub rng: RngSpec,
    pub lambda: f64,
    pub sigma: f64,
    pub eigvals: Vec<f64>,
}

impl InstanceDump {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        if self.eigvals.len() != self.n {
            return Err(Error::Format(format!("{} eigenvalues for n = {}", self.eigvals.len(), self.n)));
        }
        w.write_all(MAGIC)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&self.rng.seed.to_le_bytes())?;
        w.write_all(&self.rng.stream.to_le_bytes())?;
        w.write_all(&self.lambda.to_le_bytes())?;
        w.write_all(&self.sigma.to_le_bytes())?;
        for g in &self.eigvals {
            w.write_all(&g.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word).map_err(|_| Error::Format("truncated data".into()))?;
            Ok(word)
        };
        let n = u64::from_le_bytes(next(&mut r)?);
        let seed = u64::from_le_bytes(next(&mut r)?);
        let stream = u64::from_le_bytes(next(&mut r)?);
        let lambda = f64::from_le_bytes(next(&mut r)?);
        let sigma = f64::from_le_bytes(next(&mut r)?);
        let n = usize::try_from(n).map_err(|_| Error::Format(format!("dimension {n} too large")))?;
        let mut eigvals = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            eigvals.push(f64::from_le_bytes(next(&mut r)?));
        }
        Ok(Self { n, rng: RngSpec::new(seed, stream), lambda, sigma, eigvals })
    }
}
