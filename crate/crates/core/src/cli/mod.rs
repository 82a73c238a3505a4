//! Batch driver: reads a run config, executes one pipeline and writes CSV
//! and JSON artifacts into the output directory.
//!
//! Exit codes: 0 success, 1 configuration error, 2 solver failure,
//! 3 I/O failure. On failure `error.json` is written next to the outputs
//! when the directory is usable.

pub mod config;
pub mod output;
pub mod study;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::asymptotics::{
    fit_c, fit_log_line, q_smooth_closed, q_smooth_integral, q_wedge, wedge_q_numeric, wedge_slope, AsymptoticInputs,
};
use crate::error::{Error, Result};
use crate::geometry::{params_from_physical, with_unit_mean, Domain, FlatLayer, WedgeMapParams};
use crate::hodograph::{
    calibrate_smooth_profile, solve_hodograph, FlatSurface, HodographProblem, HodographSolution, SurfaceFunction,
    TrigSurface,
};
use crate::pnp_core::{recommended_points, solve_1d, J1dTable, NewtonOptions, SolverParams};
use crate::postproc::{
    block_reference, cumulative_current, effective_resistance, trace_trajectories, average_current_density,
    ConformalSolution,
};
use crate::spectral::Interval;
use config::{DomainConfig, Formulation, GridConfig, Mode, RunConfig, SweepConfig};
use output::{write_csv, write_json};

/// Environment variable holding the worker count for sweeps and studies.
pub const WORKERS_ENV: &str = "GLASS_PNP_WORKERS";
/// Nodes of the tabulated 1D flux used by smooth-profile runs.
const J1D_TABLE_NODES: usize = 48;

#[derive(Debug, Parser)]
#[command(name = "glass-pnp", version, about = "Drift-diffusion transport through thin glass layers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve on the conformally mapped rectangle.
    SolveConformal(RunArgs),
    /// Solve in the hodograph plane.
    SolveHodograph(RunArgs),
    /// Refine one grid direction and tabulate the change in Q.
    Converge(RunArgs),
    /// Sweep a geometric family and compare with small-gap estimates.
    AsymptoticSweep(RunArgs),
    /// Reproduce the reference convergence tables.
    Validate(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Override grid counts as `PERIODICxCHEB`, e.g. `12x31`.
    #[arg(long, value_parser = parse_grid)]
    pub seed_grid: Option<(usize, usize)>,
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', ','])
        .ok_or_else(|| format!("expected PERIODICxCHEB, got {s:?}"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

impl Command {
    fn split(&self) -> (Mode, &RunArgs) {
        match self {
            Command::SolveConformal(a) => (Mode::SolveConformal, a),
            Command::SolveHodograph(a) => (Mode::SolveHodograph, a),
            Command::Converge(a) => (Mode::Converge, a),
            Command::AsymptoticSweep(a) => (Mode::AsymptoticSweep, a),
            Command::Validate(a) => (Mode::Validate, a),
        }
    }
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) => 1,
        Error::Io(_) => 3,
        _ => 2,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) => "config",
        Error::Domain(_) => "domain",
        Error::Io(_) => "io",
        Error::NonConvergence { .. } => "non-convergence",
        Error::SingularJacobian { .. } => "singular-jacobian",
        Error::NegativeDensity { .. } => "negative-density",
        Error::StepFailure(_) => "step-failure",
        Error::Singularity(_) => "singularity",
        Error::DimensionMismatch { .. } => "dimension-mismatch",
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let (mode, args) = cli.command.split();
    match run(mode, args) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            log::error!("{e}");
            eprintln!("error: {e}");
            let body = json!({ "exit_code": code, "kind": error_kind(&e), "message": e.to_string(), "mode": mode.to_string() });
            if std::fs::create_dir_all(&args.out).is_ok() {
                if let Err(w) = write_json(&args.out.join("error.json"), &body) {
                    eprintln!("could not write error.json: {w}");
                }
            }
            code
        }
    }
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("{WORKERS_ENV} = {v:?} is not a worker count")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs `mode` with the config and output directory in `args`.
pub fn run(mode: Mode, args: &RunArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config, mode)?;
    if let Some((p, c)) = args.seed_grid {
        let g = cfg.grid.get_or_insert(GridConfig {
            n_periodic: p,
            n_cheb: c,
            reference_n_periodic: None,
            reference_n_cheb: None,
        });
        g.n_periodic = p;
        g.n_cheb = c;
    }
    std::fs::create_dir_all(&args.out)?;
    let pool = worker_pool()?;
    let start = Instant::now();
    pool.install(|| match mode {
        Mode::SolveConformal => run_conformal(&cfg, &args.out, start),
        Mode::SolveHodograph => run_hodograph(&cfg, &args.out, start),
        Mode::Converge => run_converge(&cfg, &args.out, start),
        Mode::AsymptoticSweep => run_sweep(&cfg, &args.out, start),
        Mode::Validate => run_validate(&cfg, &args.out, start),
    })
}

fn solver_params(cfg: &RunConfig) -> Result<SolverParams> {
    let mut p = SolverParams::new(cfg.physics.nu, cfg.physics.phi)?;
    p.newton = NewtonOptions {
        tol: cfg.solver.tol,
        max_iter: cfg.solver.max_iter,
        ..NewtonOptions::default()
    };
    p.continuation = cfg.solver.continuation;
    Ok(p)
}

fn grid(cfg: &RunConfig) -> Result<GridConfig> {
    cfg.grid.ok_or_else(|| Error::Config("missing [grid]".into()))
}

fn domain_config(cfg: &RunConfig) -> Result<&DomainConfig> {
    cfg.domain.as_ref().ok_or_else(|| Error::Config("missing [domain]".into()))
}

fn conformal_domain(d: &DomainConfig) -> Result<Domain> {
    Ok(match *d {
        DomainConfig::Wedge { h_min, beta, l: Some(l) } => Domain::Wedge(params_from_physical(h_min, beta, l)?),
        DomainConfig::Wedge { h_min, beta, l: None } => Domain::Wedge(with_unit_mean(h_min, beta)?),
        DomainConfig::WedgeMap { l, epsilon, eta_star } => Domain::Wedge(WedgeMapParams::new(l, epsilon, eta_star)?),
        DomainConfig::Flat { l, thickness } => {
            if !(l > 0.0 && thickness > 0.0) {
                return Err(Error::Config("flat domain needs l > 0 and thickness > 0".into()));
            }
            Domain::Flat(FlatLayer { l, thickness })
        }
        DomainConfig::Smooth { .. } | DomainConfig::Surface { .. } => {
            return Err(Error::Config(
                "smooth and surface domains are only available in the hodograph formulation".into(),
            ))
        }
    })
}

/// Resistance of a uniform layer with mean thickness `d`.
fn block_resistance(nu: f64, phi: f64, d: f64) -> Result<f64> {
    Ok(d * block_reference(nu / d, phi)?)
}

#[derive(Debug, Serialize)]
struct GridSummary {
    formulation: &'static str,
    n_periodic: usize,
    n_cheb: usize,
}

#[derive(Debug, Serialize)]
struct Summary {
    #[serde(rename = "Q")]
    q: f64,
    #[serde(rename = "R")]
    r: f64,
    #[serde(rename = "R_block")]
    r_block: f64,
    iterations: usize,
    residual_norm: f64,
    #[serde(rename = "L")]
    l: f64,
    nu: f64,
    #[serde(rename = "Phi")]
    phi: f64,
    mean_thickness: f64,
    grid: GridSummary,
    /// Relative spread of `L(v)` (hodograph only).
    #[serde(skip_serializing_if = "Option::is_none")]
    length_spread: Option<f64>,
    wall_time_s: f64,
}

fn run_conformal(cfg: &RunConfig, out: &Path, start: Instant) -> Result<()> {
    let domain = conformal_domain(domain_config(cfg)?)?;
    let g = grid(cfg)?;
    let solver = solver_params(cfg)?;
    let sol = ConformalSolution::solve(domain, g.n_periodic, g.n_cheb, solver)?;
    let q = average_current_density(&sol);
    let mean = domain.mean_thickness()?;
    write_conformal_outputs(cfg, &sol, out)?;
    let summary = Summary {
        q,
        r: effective_resistance(q, solver.phi)?,
        r_block: block_resistance(solver.nu, solver.phi, mean)?,
        iterations: sol.history.iterations(),
        residual_norm: sol.residual_norm()?,
        l: domain.l(),
        nu: solver.nu,
        phi: solver.phi,
        mean_thickness: mean,
        grid: GridSummary {
            formulation: "conformal",
            n_periodic: g.n_periodic,
            n_cheb: g.n_cheb,
        },
        length_spread: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_json(&out.join("summary.json"), &summary)
}

fn write_conformal_outputs(cfg: &RunConfig, sol: &ConformalSolution, out: &Path) -> Result<()> {
    if cfg.output.fields {
        let grid = &sol.grid;
        let mut rows = Vec::with_capacity(grid.len());
        for i in 0..grid.n_periodic {
            for j in 0..grid.n_cheb {
                let k = grid.index(i, j);
                let (xi, eta) = (grid.periodic_nodes[i], grid.cheb_nodes[j]);
                let z = sol.domain.map(Complex64::new(xi, eta))?;
                rows.push(vec![xi, eta, z.re, z.im, sol.state.phi[k], sol.state.n[k]]);
            }
        }
        write_csv(
            &out.join("fields.csv"),
            &["xi [H]", "eta [H]", "x [H]", "y [H]", "phi [kT/e]", "n [n0]"],
            rows,
        )?;
    }
    let cc = cumulative_current(sol, cfg.output.cumulative_samples)?;
    write_csv(
        &out.join("cumulative.csv"),
        &["x [H]", "C [1]"],
        cc.x.iter().zip(&cc.c).map(|(&x, &c)| vec![x, c]),
    )?;
    if cfg.output.trajectories > 0 {
        let trajs = trace_trajectories(sol, cfg.output.trajectories)?;
        let rows = trajs
            .iter()
            .flat_map(|t| t.xy.iter().map(move |&(x, y)| vec![t.id as f64, t.fraction, x, y]));
        write_csv(&out.join("trajectories.csv"), &["id [1]", "fraction [1]", "x [H]", "y [H]"], rows)?;
    }
    Ok(())
}

/// A hodograph problem plus the solution it was calibrated with, if any.
struct HodographSetup {
    problem: HodographProblem,
    calibrated: Option<HodographSolution>,
}

fn hodograph_setup(cfg: &RunConfig) -> Result<HodographSetup> {
    let solver = solver_params(cfg)?;
    let (nu, phi) = (solver.nu, solver.phi);
    let g = grid(cfg)?;
    let simple = |problem| HodographSetup {
        problem,
        calibrated: None,
    };
    match domain_config(cfg)? {
        DomainConfig::Smooth { h_min, a, l } => {
            let table = J1dTable::new(phi, J1D_TABLE_NODES)?;
            let c = calibrate_smooth_profile(
                *h_min,
                *a,
                *l,
                phi,
                nu,
                &table,
                g.n_cheb,
                g.n_periodic,
                &solver.newton,
                cfg.solver.calibration_tol,
            )?;
            Ok(HodographSetup {
                problem: c.solution.problem.clone(),
                calibrated: Some(c.solution),
            })
        }
        DomainConfig::Surface { ql, samples } => {
            if samples.len() < 2 || !(*ql > 0.0) {
                return Err(Error::Config("surface needs ql > 0 and at least two samples".into()));
            }
            let surface: Arc<dyn SurfaceFunction> =
                Arc::new(TrigSurface::new(samples, Interval::new(-0.5 * ql, 0.5 * ql)));
            Ok(simple(HodographProblem::new(phi, *ql, nu, surface)?))
        }
        DomainConfig::Flat { l, thickness } => {
            let nu_hat = nu / thickness;
            let j = solve_1d(nu_hat, phi, recommended_points(nu_hat))?.j / thickness;
            Ok(simple(HodographProblem::new(phi, j * l, nu, Arc::new(FlatSurface(*thickness)))?))
        }
        d => {
            let domain = conformal_domain(d)?;
            let reference = (
                g.reference_n_periodic.unwrap_or(study::REFERENCE_GRID.0),
                g.reference_n_cheb.unwrap_or(study::REFERENCE_GRID.1),
            );
            Ok(simple(study::hodograph_equivalent(&domain, solver, reference)?))
        }
    }
}

fn run_hodograph(cfg: &RunConfig, out: &Path, start: Instant) -> Result<()> {
    let g = grid(cfg)?;
    let solver = solver_params(cfg)?;
    let setup = hodograph_setup(cfg)?;
    let sol = match setup.calibrated {
        Some(s) if s.grid.n_periodic == g.n_periodic && s.grid.n_cheb == g.n_cheb => s,
        _ => solve_hodograph(&setup.problem, g.n_cheb, g.n_periodic, &solver.newton)?,
    };
    let q = sol.average_current_density();
    let (len, area) = sol.top_length_and_area();
    let mean = area / len;
    write_hodograph_outputs(cfg, &sol, out)?;
    let diag = sol.length_diagnostic();
    let summary = Summary {
        q,
        r: effective_resistance(q, solver.phi)?,
        r_block: block_resistance(solver.nu, solver.phi, mean)?,
        iterations: sol.history.iterations(),
        residual_norm: sol.residual_norm()?,
        l: diag.mean,
        nu: solver.nu,
        phi: solver.phi,
        mean_thickness: mean,
        grid: GridSummary {
            formulation: "hodograph",
            n_periodic: g.n_periodic,
            n_cheb: g.n_cheb,
        },
        length_spread: Some(diag.spread),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_json(&out.join("summary.json"), &summary)
}

fn write_hodograph_outputs(cfg: &RunConfig, sol: &HodographSolution, out: &Path) -> Result<()> {
    if cfg.output.fields {
        let grid = &sol.grid;
        let x = sol.recover_x();
        let half = 0.5 * sol.length();
        let mut rows = Vec::with_capacity(grid.len());
        for i in 0..grid.n_periodic {
            for j in 0..grid.n_cheb {
                let k = grid.index(i, j);
                rows.push(vec![
                    grid.periodic_nodes[i],
                    grid.cheb_nodes[j],
                    x[k] - half,
                    sol.state.y[k],
                    sol.state.n[k],
                ]);
            }
        }
        write_csv(
            &out.join("fields.csv"),
            &["psi [j0 H]", "v [kT/e]", "x [H]", "y [H]", "n [n0]"],
            rows,
        )?;
    }
    let (x, c) = sol.cumulative_current(cfg.output.cumulative_samples)?;
    write_csv(
        &out.join("cumulative.csv"),
        &["x [H]", "C [1]"],
        x.iter().zip(&c).map(|(&x, &c)| vec![x, c]),
    )?;
    let m = cfg.output.trajectories;
    if m > 0 {
        let ql = sol.problem.ql;
        let mut rows = Vec::new();
        for k in 1..=m {
            let fraction = k as f64 / (m + 1) as f64;
            for (x, y) in sol.constant_psi_curve(ql * (fraction - 0.5), cfg.output.trajectory_points) {
                rows.push(vec![k as f64, fraction, x, y]);
            }
        }
        write_csv(&out.join("trajectories.csv"), &["id [1]", "fraction [1]", "x [H]", "y [H]"], rows)?;
    }
    Ok(())
}

fn run_converge(cfg: &RunConfig, out: &Path, start: Instant) -> Result<()> {
    let conv = cfg
        .converge
        .as_ref()
        .ok_or_else(|| Error::Config("missing [converge]".into()))?;
    let g = grid(cfg)?;
    let solver = solver_params(cfg)?;
    let fixed = match conv.vary {
        config::Direction::Periodic => g.n_cheb,
        config::Direction::Cheb => g.n_periodic,
    };
    let rows = match conv.formulation {
        Formulation::Conformal => {
            let domain = conformal_domain(domain_config(cfg)?)?;
            study::conformal_convergence(&domain, solver, fixed, conv.vary, &conv.counts)?
        }
        Formulation::Hodograph => {
            let setup = hodograph_setup(cfg)?;
            study::hodograph_convergence(&setup.problem, &solver.newton, fixed, conv.vary, &conv.counts)?
        }
    };
    write_csv(
        &out.join("convergence.csv"),
        &["N [1]", "Q [j0]", "dQ [j0]"],
        rows.iter().map(|r| vec![r.n as f64, r.q, r.dq]),
    )?;
    let body = json!({
        "formulation": conv.formulation,
        "vary": conv.vary,
        "fixed": fixed,
        "rows": rows,
        "nu": solver.nu,
        "Phi": solver.phi,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    write_json(&out.join("summary.json"), &body)
}

fn run_sweep(cfg: &RunConfig, out: &Path, start: Instant) -> Result<()> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::Config("missing [sweep]".into()))?;
    let g = grid(cfg)?;
    let solver = solver_params(cfg)?;
    let (nu, phi) = (solver.nu, solver.phi);
    match sweep {
        SweepConfig::Wedge { beta, l, h_min } => {
            let qs: Vec<f64> = h_min
                .par_iter()
                .map(|&h| wedge_q_numeric(h, *beta, *l, solver, g.n_periodic, g.n_cheb))
                .collect::<Result<_>>()?;
            let samples: Vec<(f64, f64)> = h_min.iter().copied().zip(qs).collect();
            let fit = fit_c(&samples, *beta, *l, phi)?;
            let line = fit_log_line(&samples, *l)?;
            let rows = samples.iter().map(|&(h, q)| {
                let inp = AsymptoticInputs {
                    h_min: h,
                    a: 0.0,
                    beta: *beta,
                    l: *l,
                    phi,
                    nu,
                };
                vec![h, q, q_wedge(&inp, fit.c)]
            });
            write_csv(
                &out.join("sweep.csv"),
                &["h_min [H]", "Q_numeric [j0]", "Q_asymptotic [j0]"],
                rows,
            )?;
            let body = json!({
                "family": "wedge",
                "C": fit.c,
                "C_spread": fit.spread,
                "slope": line.slope,
                "slope_expected": wedge_slope(*beta, *l, phi),
                "intercept": line.intercept,
                "nu": nu,
                "Phi": phi,
                "grid": { "n_periodic": g.n_periodic, "n_cheb": g.n_cheb },
                "wall_time_s": start.elapsed().as_secs_f64(),
            });
            write_json(&out.join("summary.json"), &body)
        }
        SweepConfig::Smooth { a, l, ratios } => {
            let table = J1dTable::new(phi, J1D_TABLE_NODES)?;
            let qs: Vec<f64> = ratios
                .par_iter()
                .map(|&r| {
                    let c = calibrate_smooth_profile(
                        r * a,
                        *a,
                        *l,
                        phi,
                        nu,
                        &table,
                        g.n_cheb,
                        g.n_periodic,
                        &solver.newton,
                        cfg.solver.calibration_tol,
                    )?;
                    Ok(c.solution.average_current_density())
                })
                .collect::<Result<_>>()?;
            let mut rows = Vec::with_capacity(ratios.len());
            let mut errors = Vec::with_capacity(ratios.len());
            for (&r, &q) in ratios.iter().zip(&qs) {
                let inp = AsymptoticInputs {
                    h_min: r * a,
                    a: *a,
                    beta: 0.0,
                    l: *l,
                    phi,
                    nu,
                };
                let closed = q_smooth_closed(&inp);
                errors.push((q - closed).abs() / q);
                rows.push(vec![r * a, r, q, closed, q_smooth_integral(&inp, &table)?]);
            }
            write_csv(
                &out.join("sweep.csv"),
                &["h_min [H]", "h_min/a [1]", "Q_numeric [j0]", "Q_asymptotic [j0]", "Q_integral [j0]"],
                rows,
            )?;
            let body = json!({
                "family": "smooth",
                "relative_errors": errors,
                "max_relative_error": errors.iter().copied().fold(0.0, f64::max),
                "nu": nu,
                "Phi": phi,
                "grid": { "n_periodic": g.n_periodic, "n_cheb": g.n_cheb },
                "wall_time_s": start.elapsed().as_secs_f64(),
            });
            write_json(&out.join("summary.json"), &body)
        }
    }
}

fn run_validate(cfg: &RunConfig, out: &Path, start: Instant) -> Result<()> {
    let solver = solver_params(cfg)?;
    let domain = match &cfg.domain {
        Some(d) => conformal_domain(d)?,
        None => study::validation_domain()?,
    };
    let hodograph = study::hodograph_equivalent(&domain, solver, study::REFERENCE_GRID)?;
    let mut checks = Vec::new();
    for t in &study::REFERENCE_TABLES {
        let check = study::reproduce(t, &domain, solver, Some(&hodograph))?;
        write_csv(
            &out.join(format!("table-{}.csv", t.name)),
            &["N [1]", "Q [j0]", "dQ [j0]", "dQ_reference [j0]"],
            check.rows.iter().zip(t.rows).map(|(r, &(_, _, d))| vec![r.n as f64, r.q, r.dq, d]),
        )?;
        log::info!(
            "{}: worst log10 ratio {:.2}, monotone {}",
            t.name,
            check.worst_log_ratio,
            check.monotone
        );
        checks.push(check);
    }
    let body = json!({
        "tables": checks,
        "pass": checks.iter().all(|c| c.within_order && c.monotone),
        "nu": solver.nu,
        "Phi": solver.phi,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    write_json(&out.join("validation.json"), &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_override_parsing() {
        assert_eq!(parse_grid("12x31"), Ok((12, 31)));
        assert_eq!(parse_grid("45,48"), Ok((45, 48)));
        assert!(parse_grid("12").is_err());
        assert!(parse_grid("ax3").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(exit_code(&Error::Domain("x".into())), 1);
        assert_eq!(
            exit_code(&Error::NonConvergence {
                iterations: 3,
                update_norm: 1.0
            }),
            2
        );
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 3);
    }
}
