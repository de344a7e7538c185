use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// The four scalars defining a mismatched instance.
///
/// `sigma` and `lambda` describe the data-generating process (prior standard
/// deviation and SNR); `sigma_p` and `lambda_p` are the values assumed by the
/// statistician.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub sigma: f64,
    pub sigma_p: f64,
    pub lambda: f64,
    pub lambda_p: f64,
}

impl ProblemParams {
    pub fn new(sigma: f64, sigma_p: f64, lambda: f64, lambda_p: f64) -> Result<Self> {
        let p = Self { sigma, sigma_p, lambda, lambda_p };
        p.validate()?;
        Ok(p)
    }

    /// Matched-SNR instance `λ' = λ`.
    pub fn matched_snr(sigma: f64, sigma_p: f64, lambda: f64) -> Result<Self> {
        Self::new(sigma, sigma_p, lambda, lambda)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.sigma.is_finite() && self.sigma > 0.0, || format!("sigma must be > 0, got {}", self.sigma))?;
        ensure(self.sigma_p.is_finite() && self.sigma_p > 0.0, || {
            format!("sigma_p must be > 0, got {}", self.sigma_p)
        })?;
        ensure(self.lambda.is_finite() && self.lambda >= 0.0, || {
            format!("lambda must be >= 0, got {}", self.lambda)
        })?;
        ensure(self.lambda_p.is_finite() && self.lambda_p > 0.0, || {
            format!("lambda_p must be > 0, got {}", self.lambda_p)
        })
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    pub fn with_lambda_p(self, lambda_p: f64) -> Self {
        Self { lambda_p, ..self }
    }

    pub fn with_sigma_p(self, sigma_p: f64) -> Self {
        Self { sigma_p, ..self }
    }

    /// `√λ σ²`, the almost-sure limit of `√λ ‖s‖²/n`.
    pub fn snr_strength(&self) -> f64 {
        self.lambda.sqrt() * self.sigma * self.sigma
    }
}

/// Branch of the piecewise asymptotic formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    /// Weak true signal, strong assumed signal: `λ ≤ 1/σ⁴` and `λ' ≥ 1/σ'⁴`.
    A,
    /// Informative: `λ ≥ 1/σ⁴` and `√(λλ') ≥ 1/(σ²σ'²)`.
    B,
    /// Uninformative: everything else.
    C,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::A, Region::B, Region::C];

    pub fn label(self) -> &'static str {
        match self {
            Region::A => "A",
            Region::B => "B",
            Region::C => "C",
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Region::A),
            "B" | "b" => Ok(Region::B),
            "C" | "c" => Ok(Region::C),
            _ => Err(format!("unknown region {s:?}")),
        }
    }
}
