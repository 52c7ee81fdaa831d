//! Subcommand implementations.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use domainwall::connect::{
    heteroclinic_solve, transversality, HeteroclinicConfig, HeteroclinicProfile, MatchingUnknowns,
    TransversalityReport,
};
use domainwall::inner::{boundary_family, inner_residual, picard_extend, picard_solve, InnerProblem, Side};
use domainwall::linop::spectral_report;
use domainwall::params::{
    default_nu_minus, default_nu_plus, derive_params, scaling_from_epsilon, Params, ScalingConfig,
};
use domainwall::verify::{
    check_scaling_span, fit_decay_rates, fit_scaling, verify_profile, ScalingMember, TailRates,
};

use crate::config::{CommonFlags, RunConfig};
use crate::manifest::{now, write_json, RunManifest};
use crate::{prepare_out, CliError};

/// Tolerance on the first integral used by `verify`.
const W_TOLERANCE: f64 = 1e-8;
/// Default operator spacing of `spectrum`.
const SPECTRUM_SPACING: f64 = 0.1;

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonFlags,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonFlags,
    /// Comma-separated epsilon values.
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct InnerArgs {
    #[command(flatten)]
    pub common: CommonFlags,
    /// Left end of the corner interval is `-a_minus` (defaults to `a_plus`).
    #[arg(long = "a-minus", allow_negative_numbers = true)]
    pub a_minus: Option<f64>,
    #[arg(long = "a-plus", allow_negative_numbers = true)]
    pub a_plus: Option<f64>,
    /// Stable-family coordinates of the data at `z = a_plus`.
    #[arg(long, allow_negative_numbers = true)]
    pub x10: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub x20: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub common: CommonFlags,
    /// Profile CSV written by `solve`.
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

/// Summary of a solve written to `report.json`.
#[derive(Debug, Serialize)]
struct SolveReport {
    params: Params,
    scaling: ScalingConfig,
    matching_seed: Option<MatchingUnknowns>,
    matching: Option<MatchingUnknowns>,
    corner_iterations: usize,
    newton_iterations: usize,
    residual: f64,
    mu: f64,
    sup_w: f64,
    a_at_zero: f64,
    b0_at_zero: f64,
    corner_half_width: Option<f64>,
    samples: usize,
    transversality: Option<TransversalityReport>,
    tail_rates: Option<TailRates>,
    diagnostics: Vec<String>,
}

fn params_of(cfg: &RunConfig) -> Result<Params, CliError> {
    Ok(derive_params(cfg.require_epsilon()?, cfg.require_g()?)?)
}

fn scaling_of(cfg: &RunConfig, p: &Params) -> Result<ScalingConfig, CliError> {
    let nu_m = cfg.nu_minus.unwrap_or_else(|| default_nu_minus(p.delta));
    let nu_p = cfg.nu_plus.unwrap_or_else(|| default_nu_plus(p.delta));
    Ok(scaling_from_epsilon(p, nu_m, nu_p)?)
}

fn solver_config(cfg: &RunConfig, p: &Params) -> Result<HeteroclinicConfig, CliError> {
    let mut hc = HeteroclinicConfig::new(scaling_of(cfg, p)?);
    if let Some(t) = cfg.tol {
        if !(t > 0.0) {
            return Err(CliError::Config(format!("tol must be positive, got {t}")));
        }
        hc.tol = t;
    }
    if let Some(m) = cfg.max_iter {
        hc.max_iter = m;
    }
    if let Some(h) = cfg.grid {
        if !(h > 0.0) {
            return Err(CliError::Config(format!("grid spacing must be positive, got {h}")));
        }
        hc.sample_spacing = h;
    }
    Ok(hc)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))
}

/// Solves once and writes `profile.csv` and `report.json` into `dir`.
fn solve_into(p: &Params, hc: &HeteroclinicConfig, dir: &Path) -> Result<SolveReport, CliError> {
    let sol = heteroclinic_solve(p, hc)?;
    let profile = &sol.profile;
    let mut diagnostics = Vec::new();
    let transversality = transversality(&sol)
        .map_err(|e| diagnostics.push(format!("transversality: {e}")))
        .ok();
    let tail_rates = fit_decay_rates(profile, hc.scaling.x_star_plus)
        .map_err(|e| diagnostics.push(format!("tail rates: {e}")))
        .ok();
    let report = SolveReport {
        params: *p,
        scaling: hc.scaling,
        matching_seed: profile.matching_seed,
        matching: profile.matching,
        corner_iterations: profile.corner_iterations,
        newton_iterations: profile.newton_iterations,
        residual: profile.residual,
        mu: profile.mu,
        sup_w: profile.sup_w(),
        a_at_zero: profile.a_at_zero(),
        b0_at_zero: profile.state_at(0.0).b0(),
        corner_half_width: profile.corner_half_width(),
        samples: profile.xs.len(),
        transversality,
        tail_rates,
        diagnostics,
    };
    profile.write_csv(create(&dir.join("profile.csv"))?)?;
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

pub fn solve(args: &SolveArgs, invocation: &[String]) -> Result<String, CliError> {
    let started = now();
    let cfg = RunConfig::resolve(&args.common)?;
    let p = params_of(&cfg)?;
    let hc = solver_config(&cfg, &p)?;
    let out = &args.common.out;
    prepare_out(out)?;
    let report = solve_into(&p, &hc, out)?;
    let summary = json!({
        "a_at_zero": report.a_at_zero,
        "b0_at_zero": report.b0_at_zero,
        "corner_half_width": report.corner_half_width,
        "sup_w": report.sup_w,
        "residual": report.residual,
        "newton_iterations": report.newton_iterations,
    });
    let mut m = RunManifest::new(invocation, &cfg, started);
    m.outputs = vec!["profile.csv".into(), "report.json".into()];
    m.write(out, summary)?;
    Ok(format!(
        "converged in {} iterations: A(0) = {:.10}, B0(0) = {:.12}, sup|W| = {:.3e}",
        report.newton_iterations, report.a_at_zero, report.b0_at_zero, report.sup_w
    ))
}

pub fn sweep(args: &SweepArgs, invocation: &[String]) -> Result<String, CliError> {
    let started = now();
    let mut cfg = RunConfig::resolve(&args.common)?;
    if let Some(e) = &args.epsilons {
        cfg.epsilons = Some(e.clone());
    }
    let g = cfg.require_g()?;
    let eps = cfg
        .epsilons
        .clone()
        .ok_or_else(|| CliError::Config("epsilons are required (--epsilons or config)".into()))?;
    check_scaling_span(&eps)?;
    let out = &args.common.out;
    prepare_out(out)?;
    let members: Vec<(ScalingMember, String)> = eps
        .par_iter()
        .enumerate()
        .map(|(i, &e)| {
            let name = format!("eps_{i:02}");
            let run = || -> Result<(f64, f64), CliError> {
                let mut member_cfg = cfg.clone();
                member_cfg.epsilon = Some(e);
                let p = params_of(&member_cfg)?;
                let hc = solver_config(&member_cfg, &p)?;
                let dir = out.join(&name);
                prepare_out(&dir)?;
                let r = solve_into(&p, &hc, &dir)?;
                let w = r
                    .corner_half_width
                    .ok_or_else(|| CliError::Numerical("A has no zero for x > 0".into()))?;
                Ok((r.a_at_zero, w))
            };
            let member = match run() {
                Ok((a, w)) => ScalingMember {
                    epsilon: e,
                    a_at_zero: Some(a),
                    half_width: Some(w),
                    error: None,
                },
                Err(err) => ScalingMember {
                    epsilon: e,
                    a_at_zero: None,
                    half_width: None,
                    error: Some(err.to_string()),
                },
            };
            (member, name)
        })
        .collect();
    let failed = members.iter().filter(|(m, _)| m.error.is_some()).count();
    let dirs: Vec<String> = members.iter().map(|(_, d)| d.clone()).collect();
    let members: Vec<ScalingMember> = members.into_iter().map(|(m, _)| m).collect();
    let fit = fit_scaling(g, members.clone());
    let scaling = match &fit {
        Ok(f) => serde_json::to_value(f),
        Err(e) => Ok(json!({ "g": g, "members": members, "error": e.to_string() })),
    }
    .map_err(|e| CliError::Numerical(e.to_string()))?;
    write_json(&out.join("scaling.json"), &scaling)?;
    let summary = match &fit {
        Ok(f) => json!({
            "a0_slope": f.a0_slope,
            "width_slope": f.width_slope,
            "failed": failed,
            "members": eps.len(),
        }),
        Err(_) => json!({ "failed": failed, "members": eps.len() }),
    };
    let mut m = RunManifest::new(invocation, &cfg, started);
    m.outputs = dirs;
    m.outputs.push("scaling.json".into());
    m.write(out, summary)?;
    if 2 * failed > eps.len() {
        return Err(CliError::Numerical(format!("{failed} of {} members failed", eps.len())));
    }
    let f = fit?;
    Ok(format!(
        "{} of {} members converged: A(0) slope {:.4}, half-width slope {:.4}",
        eps.len() - failed,
        eps.len(),
        f.a0_slope,
        f.width_slope
    ))
}

pub fn inner(args: &InnerArgs, invocation: &[String]) -> Result<String, CliError> {
    let started = now();
    let mut cfg = RunConfig::resolve(&args.common)?;
    macro_rules! over {
        ($($f:ident),*) => {$(if args.$f.is_some() { cfg.$f = args.$f; })*};
    }
    over!(a_minus, a_plus, x10, x20);
    let a_plus = cfg
        .a_plus
        .ok_or_else(|| CliError::Config("a_plus is required (--a-plus or config)".into()))?;
    let a_minus = cfg.a_minus.unwrap_or(a_plus);
    if !(a_plus > 0.0) || !(a_minus > 0.0) {
        return Err(CliError::Config(format!(
            "a_minus and a_plus must be positive, got {a_minus} and {a_plus}"
        )));
    }
    let tangent = [cfg.x10.unwrap_or(0.0), cfg.x20.unwrap_or(0.0)];
    let mut prob = InnerProblem::new(a_minus, a_plus, boundary_family(Side::Plus, tangent, a_plus));
    if let Some(n) = cfg.grid {
        if !(n >= 4.0) {
            return Err(CliError::Config(format!("inner grid needs at least 4 points, got {n}")));
        }
        prob.grid_points = n as usize;
    }
    if let Some(t) = cfg.tol {
        prob.tol = t;
    }
    if let Some(m) = cfg.max_iter {
        prob.max_iter = m;
    }
    let out = &args.common.out;
    prepare_out(out)?;
    let mut sol = picard_solve(&prob)?;
    if a_minus > a_plus {
        sol = picard_extend(&sol, a_minus, &prob)?;
    }
    let residual = inner_residual(&sol);
    let mut w = create(&out.join("inner.csv"))?;
    sol.write_csv(&mut w)
        .map_err(|e| CliError::Config(format!("cannot write inner.csv: {e}")))?;
    let report = json!({
        "problem": prob,
        "contraction_constant": prob.contraction_constant(),
        "residual": residual,
        "stages": sol.stages,
        "cascade_steps": sol.cascade_steps,
        "picard_history": sol.history,
    });
    write_json(&out.join("report.json"), &report)?;
    let mut m = RunManifest::new(invocation, &cfg, started);
    m.outputs = vec!["inner.csv".into(), "report.json".into()];
    m.write(out, json!({ "residual": residual, "cascade_steps": sol.cascade_steps }))?;
    Ok(format!(
        "corner layer on [{:.4}, {:.4}]: residual {:.3e}, {} cascade steps",
        -a_minus, a_plus, residual, sol.cascade_steps
    ))
}

fn load_profile(args: &ProfileArgs, cfg: &mut RunConfig) -> Result<(Params, HeteroclinicProfile), CliError> {
    if args.profile.is_some() {
        cfg.profile = args.profile.clone();
    }
    let path = cfg
        .profile
        .clone()
        .ok_or_else(|| CliError::Config("profile is required (--profile or config)".into()))?;
    let p = params_of(cfg)?;
    let file = File::open(&path)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    let profile = HeteroclinicProfile::read_csv(p, std::io::BufReader::new(file))?;
    Ok((p, profile))
}

pub fn spectrum(args: &ProfileArgs, invocation: &[String]) -> Result<String, CliError> {
    let started = now();
    let mut cfg = RunConfig::resolve(&args.common)?;
    let (_, profile) = load_profile(args, &mut cfg)?;
    let out = &args.common.out;
    prepare_out(out)?;
    let report = spectral_report(&profile, cfg.grid.unwrap_or(SPECTRUM_SPACING))?;
    write_json(&out.join("spectrum.json"), &report)?;
    let k = &report.m_kernel;
    let mut m = RunManifest::new(invocation, &cfg, started);
    m.outputs = vec!["spectrum.json".into()];
    m.write(
        out,
        json!({
            "kernel_angle": k.kernel_angle,
            "kernel_residual": k.kernel_residual,
            "separation": k.separation,
            "orthogonality_defect": k.orthogonality_defect,
        }),
    )?;
    Ok(format!(
        "kernel angle {:.3e} rad, separation {:.3e}, orthogonality defect {:.3e}",
        k.kernel_angle, k.separation, k.orthogonality_defect
    ))
}

pub fn verify(args: &ProfileArgs, invocation: &[String]) -> Result<String, CliError> {
    let started = now();
    let mut cfg = RunConfig::resolve(&args.common)?;
    let (p, profile) = load_profile(args, &mut cfg)?;
    let scaling = scaling_of(&cfg, &p)?;
    let out = &args.common.out;
    prepare_out(out)?;
    let report = verify_profile(&profile, &scaling, cfg.tol.unwrap_or(W_TOLERANCE));
    write_json(&out.join("verification.json"), &report)?;
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    let mut m = RunManifest::new(invocation, &cfg, started);
    m.outputs = vec!["verification.json".into()];
    m.write(
        out,
        json!({ "checks": report.checks.len(), "failed": failed }),
    )?;
    if failed.is_empty() {
        Ok(format!("all {} checks passed", report.checks.len()))
    } else {
        Err(CliError::Numerical(format!("failed checks: {}", failed.join(", "))))
    }
}
