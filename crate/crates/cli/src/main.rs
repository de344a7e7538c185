//! `mismatchlab`: evaluate the asymptotic formulas, emit phase-diagram and
//! section data, and run the finite-n experiments and validators.
//!
//! Exit codes: 0 when every gate passes, 1 on a failed gate or a numerical
//! failure, 2 on a usage error.

mod config;
mod output;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mismatch_core::curves::{phase_curve, CurveKind, CurveSpec, SweepAxis};
use mismatch_core::exec::init_thread_pool;
use mismatch_core::formulas::{asymptotic_free_energy, asymptotic_mse, classify_region, mmse};
use mismatch_core::free_prob::{deformed_edge, gm_limit, semicircle_measure, GMInput};
use mismatch_core::posterior::{free_energy_experiment, mse_experiment, ChainConfig};
use mismatch_core::sim::{hciz_rank1_exact, hciz_rank1_mc, sample_spectrum};
use mismatch_core::{Error, Exec, ProblemParams, RngSpec};
use serde_json::json;

use config::{Axis, Flags, Format, RunConfig};
use output::{emit, json, num, sibling, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(Error::InvalidParameter(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mismatchlab", version, about = "Mismatched rank-one matrix estimation: formulas and experiments")]
#[command(args_conflicts_with_subcommands = false, allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Asymptotic mismatched MSE at one parameter point
    Mse,
    /// Asymptotic free energy; with --n, also the finite-n estimate
    FreeEnergy,
    /// Bayes-optimal MMSE for (σ, λ)
    Mmse,
    /// Region of the piecewise formulas
    Region,
    /// MSE over a (σ', λ') grid plus the three phase-diagram curves
    PhaseDiagram,
    /// MSE along one swept axis, with the MMSE reference
    Section,
    /// Finite-n empirical MSE by MCMC, gated on |z| ≤ 3
    Simulate,
    /// Run the validator suite and report residuals
    Validate,
    /// Finite-n rank-one spherical integral against its large-n limit
    Hciz,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let threads = match std::env::var("MISMATCHLAB_THREADS") {
        Ok(v) => Some(v.parse().map_err(|_| CliError::Usage(format!("MISMATCHLAB_THREADS={v:?} is not a count")))?),
        Err(_) => config::config_threads(&cli.flags)?,
    };
    if let Some(t) = threads {
        init_thread_pool(t);
    }
    let cfg = RunConfig::resolve(&cli.flags)?;
    match cli.command {
        Command::Mse => cmd_point(&cfg, "mse", asymptotic_mse),
        Command::FreeEnergy => cmd_free_energy(&cfg),
        Command::Mmse => cmd_mmse(&cfg),
        Command::Region => cmd_region(&cfg),
        Command::PhaseDiagram => cmd_phase_diagram(&cfg),
        Command::Section => cmd_section(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Validate => cmd_validate(&cfg),
        Command::Hciz => cmd_hciz(&cfg),
    }
}

fn param_cells(p: &ProblemParams) -> Vec<String> {
    vec![num(p.sigma), num(p.sigma_p), num(p.lambda), num(p.lambda_p)]
}

const PARAM_HEADER: [&str; 4] = ["sigma", "sigma_p", "lambda", "lambda_p"];

fn cmd_point(cfg: &RunConfig, name: &str, f: impl Fn(&ProblemParams) -> mismatch_core::Result<f64>) -> Result<bool, CliError> {
    let p = cfg.params()?;
    let region = classify_region(&p)?;
    let v = f(&p)?;
    let content = match cfg.format {
        Format::Csv => {
            let mut t = Table::new(PARAM_HEADER.iter().copied().chain(["region", name]));
            let mut row = param_cells(&p);
            row.extend([region.label().to_string(), num(v)]);
            t.push(row);
            t.render()
        }
        Format::Json => json(&json!({ "params": p, "region": region.label(), name: v }))?,
    };
    emit(cfg.out.as_deref(), &content)?;
    Ok(true)
}

fn cmd_free_energy(cfg: &RunConfig) -> Result<bool, CliError> {
    let Some(n) = cfg.n else { return cmd_point(cfg, "free_energy", asymptotic_free_energy) };
    let p = cfg.params()?;
    let trials = cfg.trials.unwrap_or(8);
    let asymptotic = asymptotic_free_energy(&p)?;
    let est = free_energy_experiment(&p, n, trials, RngSpec::new(cfg.seed, 0))?;
    let region = classify_region(&p)?;
    let content = match cfg.format {
        Format::Csv => {
            let mut t = Table::new(
                PARAM_HEADER.iter().copied().chain(["region", "free_energy", "n", "trials", "estimate", "stderr"]),
            );
            let mut row = param_cells(&p);
            row.extend([
                region.label().to_string(),
                num(asymptotic),
                n.to_string(),
                trials.to_string(),
                num(est.mean),
                num(est.std_error),
            ]);
            t.push(row);
            t.render()
        }
        Format::Json => json(&json!({
            "params": p,
            "region": region.label(),
            "free_energy": asymptotic,
            "n": n,
            "trials": trials,
            "seed": cfg.seed,
            "estimate": est,
        }))?,
    };
    emit(cfg.out.as_deref(), &content)?;
    Ok(true)
}

fn cmd_mmse(cfg: &RunConfig) -> Result<bool, CliError> {
    let (sigma, lambda) = (cfg.sigma.unwrap_or(1.0), cfg.lambda.unwrap_or(2.0));
    let v = mmse(sigma, lambda)?;
    let content = match cfg.format {
        Format::Csv => {
            let mut t = Table::new(["sigma", "lambda", "mmse"]);
            t.push(vec![num(sigma), num(lambda), num(v)]);
            t.render()
        }
        Format::Json => json(&json!({ "sigma": sigma, "lambda": lambda, "mmse": v }))?,
    };
    emit(cfg.out.as_deref(), &content)?;
    Ok(true)
}

fn cmd_region(cfg: &RunConfig) -> Result<bool, CliError> {
    let p = cfg.params()?;
    let region = classify_region(&p)?;
    let content = match cfg.format {
        Format::Csv => {
            let mut t = Table::new(PARAM_HEADER.iter().copied().chain(["region"]));
            let mut row = param_cells(&p);
            row.push(region.label().to_string());
            t.push(row);
            t.render()
        }
        Format::Json => json(&json!({ "params": p, "region": region.label() }))?,
    };
    emit(cfg.out.as_deref(), &content)?;
    Ok(true)
}

fn cmd_phase_diagram(cfg: &RunConfig) -> Result<bool, CliError> {
    if let Some(g) = cfg.grid.iter().find(|g| !matches!(g.axis, Axis::SigmaP | Axis::LambdaP)) {
        return Err(CliError::Usage(format!("phase-diagram sweeps sigma_p and lambda_p, not {}", g.axis)));
    }
    let sp_axis = cfg.axis(Axis::SigmaP).cloned().unwrap_or("sigma_p:0.1:3:30".parse()?);
    let lp_axis = cfg.axis(Axis::LambdaP).cloned().unwrap_or("lambda_p:0.1:10:100".parse()?);
    let base = cfg.params()?;
    let (sps, lps) = (sp_axis.values(), lp_axis.values());
    let cells = Exec::default().try_map(sps.len() * lps.len(), |k| -> Result<_, Error> {
        let p = ProblemParams { sigma_p: sps[k / lps.len()], lambda_p: lps[k % lps.len()], ..base };
        Ok((p, classify_region(&p)?, asymptotic_mse(&p)?))
    })?;

    let mut curves = Vec::new();
    for kind in CurveKind::ALL {
        let spec = CurveSpec { kind, sigma: base.sigma, lambda: base.lambda, sweep_axis: SweepAxis::SigmaP };
        let points = match phase_curve(&spec, &sps) {
            Ok(pts) => pts,
            // A locus absent from this window is reported as empty.
            Err(Error::NoRoot(_)) => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        curves.push((kind, points));
    }

    match cfg.format {
        Format::Csv => {
            let mut t = Table::new(["sigma_p", "lambda_p", "region", "mse"]);
            for (p, r, v) in &cells {
                t.push(vec![num(p.sigma_p), num(p.lambda_p), r.label().to_string(), num(*v)]);
            }
            emit(cfg.out.as_deref(), &t.render())?;
            if let Some(out) = &cfg.out {
                for (kind, points) in &curves {
                    let mut c = Table::new(["sigma_p", "lambda_p"]);
                    for pt in points {
                        c.push(vec![num(pt.sigma_p), num(pt.lambda_p)]);
                    }
                    emit(Some(&sibling(out, kind.slug())), &c.render())?;
                }
            }
        }
        Format::Json => {
            let grid: Vec<_> = cells
                .iter()
                .map(|(p, r, v)| json!({ "sigma_p": p.sigma_p, "lambda_p": p.lambda_p, "region": r.label(), "mse": v }))
                .collect();
            let curves: serde_json::Map<String, serde_json::Value> =
                curves.iter().map(|(k, pts)| (k.slug().to_string(), json!(pts))).collect();
            let doc = json!({ "sigma": base.sigma, "lambda": base.lambda, "grid": grid, "curves": curves });
            emit(cfg.out.as_deref(), &json(&doc)?)?;
        }
    }
    Ok(true)
}

fn cmd_section(cfg: &RunConfig) -> Result<bool, CliError> {
    let axis = match cfg.grid.as_slice() {
        [] => "sigma_p:0.1:5:50".parse()?,
        [g] => g.clone(),
        _ => return Err(CliError::Usage("section takes exactly one --grid axis".into())),
    };
    if cfg.matched && axis.axis == Axis::LambdaP {
        return Err(CliError::Usage("--matched ties lambda_p to lambda; sweep lambda instead".into()));
    }
    let base = cfg.params()?;
    let mut rows = Vec::new();
    for v in axis.values() {
        let mut p = axis.axis.apply(base, v);
        if cfg.matched {
            p.lambda_p = p.lambda;
        }
        p.validate()?;
        rows.push((v, asymptotic_mse(&p)?, mmse(p.sigma, p.lambda)?));
    }
    let content = match cfg.format {
        Format::Csv => {
            let mut t = Table::new([axis.axis.name(), "mse", "mmse"]);
            for (v, m, r) in &rows {
                t.push(vec![num(*v), num(*m), num(*r)]);
            }
            t.render()
        }
        Format::Json => {
            let pts: Vec<_> = rows.iter().map(|(v, m, r)| json!({ axis.axis.name(): v, "mse": m, "mmse": r })).collect();
            json(&json!({ "axis": axis.axis, "matched": cfg.matched, "params": base, "points": pts }))?
        }
    };
    emit(cfg.out.as_deref(), &content)?;
    Ok(true)
}

fn cmd_simulate(cfg: &RunConfig) -> Result<bool, CliError> {
    let p = cfg.params()?;
    let defaults = ChainConfig::default();
    let chains = ChainConfig {
        n_chains: cfg.chains.unwrap_or(defaults.n_chains),
        burn_in: cfg.burn_in.unwrap_or(defaults.burn_in),
        n_samples: cfg.chain_samples.unwrap_or(defaults.n_samples),
        rng: RngSpec::new(cfg.seed, 0),
        exec: Exec::Sequential,
        ..defaults
    };
    let report = mse_experiment(&p, cfg.n.unwrap_or(400), cfg.trials.unwrap_or(16), &chains, Exec::default())?;
    emit(cfg.out.as_deref(), &json(&report)?)?;
    let ok = report.z_score.abs() <= 3.0;
    if !ok {
        eprintln!("gate: |z| = {:.3} exceeds 3{}", report.z_score.abs(), if cfg.no_gate { " (ignored)" } else { "" });
    }
    Ok(ok || cfg.no_gate)
}

fn cmd_validate(cfg: &RunConfig) -> Result<bool, CliError> {
    let d = validate::Settings::default();
    let settings = validate::Settings {
        seed: cfg.seed,
        bbp_n: cfg.n.unwrap_or(d.bbp_n),
        bbp_trials: cfg.trials.unwrap_or(d.bbp_trials),
        hciz_samples: cfg.mc_samples.unwrap_or(d.hciz_samples),
        ..d
    };
    let report = validate::run(&settings)?;
    emit(cfg.out.as_deref(), &json(&report)?)?;
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("validator {} failed: measured {:e}, tolerance {:e}", c.name, c.measured, c.tolerance);
    }
    Ok(report.passed)
}

fn cmd_hciz(cfg: &RunConfig) -> Result<bool, CliError> {
    let n = cfg.n.unwrap_or(500);
    let (sigma, lambda) = (cfg.sigma.unwrap_or(1.0), cfg.lambda.unwrap_or(0.0));
    let theta = cfg.theta.unwrap_or(0.25);
    let samples = cfg.mc_samples.unwrap_or(20_000);
    let gammas = sample_spectrum(n, sigma, lambda, RngSpec::new(cfg.seed, 0))?;
    let mc = hciz_rank1_mc(&gammas, theta, samples, RngSpec::new(cfg.seed, 1))?;
    let exact = hciz_rank1_exact(&gammas, theta)?;
    let sc = semicircle_measure();
    let edges = deformed_edge(lambda.sqrt() * sigma * sigma)?;
    let limit = gm_limit(&GMInput::with_edges(&sc, theta, edges)?)?;
    let content = match cfg.format {
        Format::Csv => {
            let mut t = Table::new(["n", "sigma", "lambda", "theta", "mc_mean", "mc_stderr", "exact", "limit"]);
            t.push(vec![
                n.to_string(),
                num(sigma),
                num(lambda),
                num(theta),
                num(mc.mean),
                num(mc.std_error),
                num(exact),
                num(limit),
            ]);
            t.render()
        }
        Format::Json => json(&json!({
            "n": n,
            "sigma": sigma,
            "lambda": lambda,
            "theta": theta,
            "seed": cfg.seed,
            "top_eigenvalue": gammas[0],
            "mc": mc,
            "exact": exact,
            "limit": limit,
        }))?,
    };
    emit(cfg.out.as_deref(), &content)?;
    Ok(true)
}
