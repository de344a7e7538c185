use serde::{Deserialize, Serialize};

/// A Monte Carlo scalar with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    #[serde(rename = "stderr")]
    pub std_error: f64,
    #[serde(rename = "samples")]
    pub n_samples: usize,
}

impl Estimate {
    pub fn new(mean: f64, std_error: f64, n_samples: usize) -> Self {
        Self { mean, std_error, n_samples }
    }

    pub fn exact(value: f64) -> Self {
        Self { mean: value, std_error: 0.0, n_samples: 1 }
    }

    /// Sample mean with standard error `s/√N`.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, std_error: f64::NAN, n_samples: 0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, std_error: 0.0, n_samples: 1 };
        }
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        Self { mean, std_error: (var / n as f64).sqrt(), n_samples: n }
    }

    /// `ln((1/N) Σ exp(xᵢ))` with a leave-one-out jackknife standard error.
    ///
    /// Exponentials are shifted by the maximum, so no overflow occurs for any
    /// finite input.
    pub fn log_mean_exp(log_weights: &[f64]) -> Self {
        let n = log_weights.len();
        if n == 0 {
            return Self { mean: f64::NAN, std_error: f64::NAN, n_samples: 0 };
        }
        let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_weights.iter().map(|&l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        let mean = max + (total / n as f64).ln();
        if n == 1 {
            return Self { mean, std_error: 0.0, n_samples: 1 };
        }
        let loo: Vec<f64> = w
            .iter()
            .map(|wi| {
                // Floor guards the case where one weight carries all the mass.
                let rest = (total - wi).max(total * f64::EPSILON);
                max + (rest / (n - 1) as f64).ln()
            })
            .collect();
        let loo_mean = loo.iter().sum::<f64>() / n as f64;
        let ss: f64 = loo.iter().map(|t| (t - loo_mean) * (t - loo_mean)).sum();
        let std_error = ((n - 1) as f64 / n as f64 * ss).sqrt();
        Self { mean, std_error, n_samples: n }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self { mean: self.mean * factor, std_error: self.std_error * factor.abs(), ..self }
    }

    /// `|mean - target| / std_error`; infinite when the error bar is zero and
    /// the mean differs.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if self.std_error > 0.0 {
            d / self.std_error
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    }

    pub fn within(&self, target: f64, n_sigma: f64, floor: f64) -> bool {
        (self.mean - target).abs() <= (n_sigma * self.std_error).max(floor)
    }
}
