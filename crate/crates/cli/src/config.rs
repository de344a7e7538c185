//! Run configuration: command-line flags layered over an optional flat
//! `key = value` file, layered over built-in defaults.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use mismatch_core::ProblemParams;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(CliError::Usage(format!("unknown format {s:?} (expected csv or json)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Sigma,
    SigmaP,
    Lambda,
    LambdaP,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Sigma => "sigma",
            Axis::SigmaP => "sigma_p",
            Axis::Lambda => "lambda",
            Axis::LambdaP => "lambda_p",
        }
    }

    pub fn apply(self, p: ProblemParams, v: f64) -> ProblemParams {
        match self {
            Axis::Sigma => ProblemParams { sigma: v, ..p },
            Axis::SigmaP => ProblemParams { sigma_p: v, ..p },
            Axis::Lambda => ProblemParams { lambda: v, ..p },
            Axis::LambdaP => ProblemParams { lambda_p: v, ..p },
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One `axis:lo:hi:count` sweep, linearly spaced with exact endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub axis: Axis,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.hi } else { self.lo + (self.hi - self.lo) * i as f64 / last })
            .collect()
    }
}

impl FromStr for GridAxis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = |why: &str| CliError::Usage(format!("invalid grid {s:?}: {why} (expected axis:lo:hi:count)"));
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [axis, lo, hi, count] = parts[..] else { return Err(bad("wrong number of fields")) };
        let axis = match axis.replace('-', "_").as_str() {
            "sigma" => Axis::Sigma,
            "sigma_p" => Axis::SigmaP,
            "lambda" => Axis::Lambda,
            "lambda_p" => Axis::LambdaP,
            _ => return Err(bad("unknown axis")),
        };
        let lo: f64 = lo.parse().map_err(|_| bad("lo is not a number"))?;
        let hi: f64 = hi.parse().map_err(|_| bad("hi is not a number"))?;
        let count: usize = count.parse().map_err(|_| bad("count is not an integer"))?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(bad("need finite lo < hi"));
        }
        if count < 2 {
            return Err(bad("count must be at least 2"));
        }
        Ok(GridAxis { axis, lo, hi, count })
    }
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// True prior standard deviation σ
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Assumed prior standard deviation σ'
    #[arg(long = "sigma-p", global = true)]
    pub sigma_p: Option<f64>,
    /// True SNR λ
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Assumed SNR λ'
    #[arg(long = "lambda-p", global = true)]
    pub lambda_p: Option<f64>,
    /// Matrix dimension
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// MCMC chains per posterior estimate (at least 4)
    #[arg(long, global = true)]
    pub chains: Option<usize>,
    #[arg(long = "burn-in", global = true)]
    pub burn_in: Option<usize>,
    /// Post-burn-in MCMC iterations per chain
    #[arg(long = "chain-samples", global = true)]
    pub chain_samples: Option<usize>,
    /// Directions per spherical-integral Monte Carlo estimate
    #[arg(long = "mc-samples", global = true)]
    pub mc_samples: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sweep axis as axis:lo:hi:count; repeat for two-dimensional grids
    #[arg(long, global = true)]
    pub grid: Vec<String>,
    /// Tie λ' to λ (matched-SNR sections)
    #[arg(long, global = true)]
    pub matched: bool,
    /// Spherical-integral parameter θ
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Output file; stdout if omitted
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Report z-score gates without failing the exit code
    #[arg(long = "no-gate", global = true)]
    pub no_gate: bool,
    /// Flat key=value file supplying defaults for any flag
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Fully resolved settings. Options left as `None` take command-specific
/// defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sigma: Option<f64>,
    pub sigma_p: Option<f64>,
    pub lambda: Option<f64>,
    pub lambda_p: Option<f64>,
    pub n: Option<usize>,
    pub trials: Option<usize>,
    pub chains: Option<usize>,
    pub burn_in: Option<usize>,
    pub chain_samples: Option<usize>,
    pub mc_samples: Option<usize>,
    pub seed: u64,
    pub grid: Vec<GridAxis>,
    pub matched: bool,
    pub theta: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub no_gate: bool,
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let grid_src: Vec<String> = if flags.grid.is_empty() { file.grid.clone() } else { flags.grid.clone() };
        let grid = grid_src.iter().map(|g| g.parse()).collect::<Result<Vec<GridAxis>, _>>()?;
        let mut seen = Vec::new();
        for g in &grid {
            if seen.contains(&g.axis) {
                return Err(CliError::Usage(format!("axis {} given twice in --grid", g.axis)));
            }
            seen.push(g.axis);
        }
        Ok(RunConfig {
            sigma: flags.sigma.or(file.get("sigma")?),
            sigma_p: flags.sigma_p.or(file.get("sigma_p")?),
            lambda: flags.lambda.or(file.get("lambda")?),
            lambda_p: flags.lambda_p.or(file.get("lambda_p")?),
            n: flags.n.or(file.get("n")?),
            trials: flags.trials.or(file.get("trials")?),
            chains: flags.chains.or(file.get("chains")?),
            burn_in: flags.burn_in.or(file.get("burn_in")?),
            chain_samples: flags.chain_samples.or(file.get("chain_samples")?),
            mc_samples: flags.mc_samples.or(file.get("mc_samples")?),
            seed: flags.seed.or(file.get("seed")?).unwrap_or(0),
            grid,
            matched: flags.matched || file.get("matched")?.unwrap_or(false),
            theta: flags.theta.or(file.get("theta")?),
            out: flags.out.clone().or(file.get::<String>("out")?.map(PathBuf::from)),
            format: flags.format.or(file.get("format")?).unwrap_or(Format::Csv),
            no_gate: flags.no_gate || file.get("no_gate")?.unwrap_or(false),
        })
    }

    /// Problem parameters with defaults `σ = σ' = 1`, `λ = λ' = 2`.
    pub fn params(&self) -> Result<ProblemParams, CliError> {
        let lambda = self.lambda.unwrap_or(2.0);
        let lambda_p = if self.matched { lambda } else { self.lambda_p.unwrap_or(2.0) };
        Ok(ProblemParams::new(self.sigma.unwrap_or(1.0), self.sigma_p.unwrap_or(1.0), lambda, lambda_p)?)
    }

    pub fn axis(&self, axis: Axis) -> Option<&GridAxis> {
        self.grid.iter().find(|g| g.axis == axis)
    }
}

const KEYS: [&str; 18] = [
    "sigma",
    "sigma_p",
    "lambda",
    "lambda_p",
    "n",
    "trials",
    "chains",
    "burn_in",
    "chain_samples",
    "mc_samples",
    "seed",
    "grid",
    "matched",
    "theta",
    "out",
    "format",
    "no_gate",
    "threads",
];

#[derive(Debug, Clone, Default)]
struct ConfigFile {
    values: HashMap<String, String>,
    grid: Vec<String>,
}

impl ConfigFile {
    fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn parse(text: &str) -> Result<Self, CliError> {
        let mut out = ConfigFile::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("config line {}: expected key = value", lineno + 1)));
            };
            let key = key.trim().replace('-', "_");
            let value = value.trim().to_string();
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", lineno + 1)));
            }
            if key == "grid" {
                out.grid.push(value);
            } else {
                out.values.insert(key, value);
            }
        }
        Ok(out)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.values
            .get(key)
            .map(|v| v.parse().map_err(|_| CliError::Usage(format!("config key {key}: cannot parse {v:?}"))))
            .transpose()
    }
}

/// Worker cap from the config file, used when the environment does not set one.
pub fn config_threads(flags: &Flags) -> Result<Option<usize>, CliError> {
    match &flags.config {
        Some(path) => ConfigFile::load(path)?.get("threads"),
        None => Ok(None),
    }
}
