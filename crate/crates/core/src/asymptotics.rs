//! Small-gap estimates of the average current density.
//!
//! Slowly varying layers: the layer acts locally as a 1D cell of thickness
//! `h_min (1 + X^2)`, giving an integral over the inner coordinate `X`, and
//! in the resistor limit the closed form `(pi Phi / L) sqrt(2a / h_min)`.
//! Wedge-like layers: `Q = (2 Phi / (beta L)) log(L / h_min) + C` with an
//! order-one constant `C` fitted against full numerics.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{params_from_physical, Domain};
use crate::pnp_core::{J1dTable, SolverParams};
use crate::postproc::{average_current_density, ConformalSolution, FieldInterpolant};

const QUAD_POINTS: usize = 64;
/// Beyond this `h_min / a` the smooth estimate is outside its regime.
const SMOOTH_RATIO_LIMIT: f64 = 0.1;
/// Fitted residuals wider than this suggest the asymptote is not reached.
const FIT_SPREAD_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticInputs {
    pub h_min: f64,
    /// Radius of curvature at the minimum (smooth layers).
    pub a: f64,
    /// Wedge half-angle (wedge layers).
    pub beta: f64,
    pub l: f64,
    pub phi: f64,
    pub nu: f64,
}

fn check_smooth(inp: &AsymptoticInputs) -> Result<()> {
    let AsymptoticInputs { h_min, a, l, phi, nu, .. } = *inp;
    if !(h_min > 0.0 && a > 0.0 && l > 0.0 && phi > 0.0 && nu > 0.0) {
        return Err(Error::Domain(format!(
            "smooth estimate needs h_min, a, L, Phi, nu > 0 (got {h_min}, {a}, {l}, {phi}, {nu})"
        )));
    }
    if h_min / a >= SMOOTH_RATIO_LIMIT {
        warn!("h_min / a = {} is not small; smooth estimate is unreliable", h_min / a);
    }
    Ok(())
}

/// `(1/L) sqrt(2a/h_min) ∫ j(nu / (h_min (1+X^2))) dX / (1+X^2)` with a
/// caller-supplied 1D flux `j(nu_hat)`. After `X = tan(theta)` the
/// integrand is smooth on `(-pi/2, pi/2)`.
pub fn q_smooth_integral_with(inp: &AsymptoticInputs, j1d: &dyn Fn(f64) -> Result<f64>) -> Result<f64> {
    check_smooth(inp)?;
    let rule = GaussLegendre::new(NonZeroUsize::new(QUAD_POINTS).expect("nonzero"));
    let mut sum = 0.0;
    for &(t, w) in rule.as_node_weight_pairs() {
        let c = (0.5 * PI * t).cos();
        sum += w * j1d(inp.nu * c * c / inp.h_min)?;
    }
    Ok(0.5 * PI * sum * (2.0 * inp.a / inp.h_min).sqrt() / inp.l)
}

/// Smooth-layer estimate using the tabulated 1D flux.
pub fn q_smooth_integral(inp: &AsymptoticInputs, j1d: &J1dTable) -> Result<f64> {
    if (j1d.phi() - inp.phi).abs() > 1e-14 * inp.phi {
        return Err(Error::Domain(format!(
            "j1D table built for Phi = {}, asked for Phi = {}",
            j1d.phi(),
            inp.phi
        )));
    }
    q_smooth_integral_with(inp, &|nu_hat| Ok(j1d.get(nu_hat)))
}

/// Resistor-limit closed form `(pi Phi / L) sqrt(2a / h_min)`.
pub fn q_smooth_closed(inp: &AsymptoticInputs) -> f64 {
    PI * inp.phi / inp.l * (2.0 * inp.a / inp.h_min).sqrt()
}

/// Leading-order wedge slope `2 Phi / (beta L)` against `log(L / h_min)`.
pub fn wedge_slope(beta: f64, l: f64, phi: f64) -> f64 {
    2.0 * phi / (beta * l)
}

/// `(2 Phi / (beta L)) log(L / h_min) + C`.
pub fn q_wedge(inp: &AsymptoticInputs, c: f64) -> f64 {
    wedge_slope(inp.beta, inp.l, inp.phi) * (inp.l / inp.h_min).ln() + c
}

/// Result of fitting the wedge constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WedgeFit {
    pub c: f64,
    /// Largest deviation of a sample's residual from `c`.
    pub spread: f64,
}

/// Least-squares constant for `Q - (2 Phi / (beta L)) log(L / h_min)` over
/// `(h_min, Q)` samples.
pub fn fit_c(samples: &[(f64, f64)], beta: f64, l: f64, phi: f64) -> Result<WedgeFit> {
    check_samples(samples)?;
    let slope = wedge_slope(beta, l, phi);
    let residuals: Vec<f64> = samples.iter().map(|&(h, q)| q - slope * (l / h).ln()).collect();
    let c = residuals.iter().sum::<f64>() / residuals.len() as f64;
    let spread = residuals.iter().map(|r| (r - c).abs()).fold(0.0, f64::max);
    if spread > FIT_SPREAD_LIMIT {
        warn!("wedge fit residual spread {spread:.3} exceeds {FIT_SPREAD_LIMIT}; asymptote not reached");
    }
    Ok(WedgeFit { c, spread })
}

/// Ordinary least-squares line `Q = slope log(L / h_min) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn fit_log_line(samples: &[(f64, f64)], l: f64) -> Result<LogFit> {
    check_samples(samples)?;
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|&(h, _)| (l / h).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(samples).map(|(x, s)| (x - mx) * (s.1 - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(LogFit {
        slope,
        intercept: my - slope * mx,
    })
}

fn check_samples(samples: &[(f64, f64)]) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::Domain("fit needs at least two samples".into()));
    }
    if samples.iter().any(|&(h, q)| !(h > 0.0) || !q.is_finite()) {
        return Err(Error::Domain("samples need h_min > 0 and finite Q".into()));
    }
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    if hi < 10.0 * lo {
        return Err(Error::Domain(format!(
            "samples span h_min in [{lo}, {hi}]; need at least a decade"
        )));
    }
    Ok(())
}

/// One point of an asymptotic sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub h_min: f64,
    pub q_numeric: f64,
    pub q_asymptotic: f64,
}

/// Full conformal solve of the wedge family member at `h_min`, with the
/// period held at `l` and the mean thickness left free.
pub fn wedge_q_numeric(h_min: f64, beta: f64, l: f64, solver: SolverParams, n_xi: usize, n_eta: usize) -> Result<f64> {
    let p = params_from_physical(h_min, beta, l)?;
    let sol = ConformalSolution::solve(Domain::Wedge(p), n_xi, n_eta, solver)?;
    Ok(average_current_density(&sol))
}

/// Maps a physical point back to the computational rectangle by Newton
/// iteration on the analytic map, seeded from the nearest coarse-grid
/// image.
pub fn preimage(domain: &Domain, z: Complex64) -> Result<Complex64> {
    let l = domain.l();
    let eta_star = domain.eta_star();
    let (nx, ne) = (128, 32);
    let mut best = (f64::INFINITY, Complex64::new(0.0, 0.5 * eta_star));
    for i in 0..nx {
        for j in 1..ne {
            let zeta = Complex64::new(l * (i as f64 / nx as f64 - 0.5), eta_star * j as f64 / ne as f64);
            let d = (domain.map(zeta)? - z).norm();
            if d < best.0 {
                best = (d, zeta);
            }
        }
    }
    let mut zeta = best.1;
    for _ in 0..60 {
        let step = (domain.map(zeta)? - z) / domain.derivative(zeta)?;
        let mut next = zeta - step;
        // Keep the iterate inside the rectangle.
        next.im = next.im.clamp(0.0, eta_star);
        zeta = next;
        if step.norm() < 1e-13 * (1.0 + zeta.norm()) {
            return Ok(zeta);
        }
    }
    Err(Error::StepFailure(format!("no preimage found for {z}")))
}

/// Largest deviation, relative to `Phi`, of the potential on the arc
/// `r = radius` about the wedge corner from the outer corner field
/// `Phi (1 - theta / beta)`. Only meaningful for wedge domains with
/// `h_min << radius << L`.
pub fn corner_field_deviation(sol: &ConformalSolution, radius: f64, n_points: usize) -> Result<f64> {
    let beta = match &sol.domain {
        Domain::Wedge(p) => p.beta,
        _ => return Err(Error::Domain("corner field check needs a wedge domain".into())),
    };
    let phi_b = sol.solver.phi;
    let interp = FieldInterpolant::new(&sol.grid, &sol.state.phi);
    let mut worst: f64 = 0.0;
    for k in 0..n_points {
        let theta = beta * (k as f64 + 0.5) / n_points as f64;
        let zeta = preimage(&sol.domain, Complex64::from_polar(radius, theta))?;
        let phi = interp.eval(zeta.re, zeta.im);
        worst = worst.max((phi - phi_b * (1.0 - theta / beta)).abs() / phi_b);
    }
    Ok(worst)
}
