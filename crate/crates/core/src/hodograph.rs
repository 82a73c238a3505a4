//! Semi-inverse formulation in the hodograph plane.
//!
//! Independent variables are the electrochemical potential `v = phi + log n`
//! (Chebyshev direction, `[0, Phi]`, `v = 0` on the top electrode) and the
//! streamfunction `psi` (periodic, `[-QL/2, QL/2)`). Unknowns are the
//! density `n` and the height `y`, stacked as `[n; y]`:
//!
//! `n_vv + n_v - 2 n_v^2 / n + n^2 n_psipsi - (n^3 / nu^2)(n y_psi^2 + y_v^2 / n) = 0`,
//! `(y_v / n)_v + (n y_psi)_psi = 0`,
//!
//! with `n = 1, y = F(psi)` at `v = 0` and `n = 1, y = 0` at `v = Phi`.
//! `psi` increases with `x`; `psi = -QL/2` is the left edge of the period.

use std::collections::HashMap;
use std::fmt::Debug;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{build_smooth_profile, build_smooth_profile_with, SmoothProfile};
use crate::pnp_core::newton::{damped_newton, sup_norm, NewtonHistory, NewtonOptions, NonlinearSystem};
use crate::pnp_core::{recommended_points, solve_1d, J1dTable, OneDSolution};
use crate::postproc::{ConformalSolution, MonotoneCubic};
use crate::roots::find_root;
use crate::spectral::{
    barycentric_eval_nodes, cheb_nodes, clenshaw_curtis_weights, fourier_nodes, Grid2D, Interval, Matrix,
    TrigSeries,
};

/// Height of the top electrode as a function of the streamfunction.
pub trait SurfaceFunction: Debug + Send + Sync {
    fn eval(&self, psi: f64) -> f64;
}

/// `F(psi) = h` everywhere.
#[derive(Debug, Clone, Copy)]
pub struct FlatSurface(pub f64);

impl SurfaceFunction for FlatSurface {
    fn eval(&self, _psi: f64) -> f64 {
        self.0
    }
}

/// Trigonometric interpolant of equispaced samples of `F` over one period.
#[derive(Debug, Clone)]
pub struct TrigSurface {
    series: TrigSeries,
}

impl TrigSurface {
    pub fn new(samples: &[f64], period: Interval) -> Self {
        Self {
            series: TrigSeries::new(samples, period),
        }
    }
}

impl SurfaceFunction for TrigSurface {
    fn eval(&self, psi: f64) -> f64 {
        self.series.eval(psi)
    }
}

impl SurfaceFunction for SmoothProfile {
    fn eval(&self, psi: f64) -> f64 {
        SmoothProfile::eval(self, psi)
    }
}

/// Inputs of a hodograph solve.
#[derive(Debug, Clone)]
pub struct HodographProblem {
    pub phi: f64,
    pub ql: f64,
    pub nu: f64,
    pub surface: Arc<dyn SurfaceFunction>,
}

impl HodographProblem {
    pub fn new(phi: f64, ql: f64, nu: f64, surface: Arc<dyn SurfaceFunction>) -> Result<Self> {
        if !(phi > 0.0 && ql > 0.0 && nu > 0.0) {
            return Err(Error::Domain(format!(
                "hodograph problem needs Phi, QL, nu > 0 (got {phi}, {ql}, {nu})"
            )));
        }
        Ok(Self { phi, ql, nu, surface })
    }

    /// Grid with `n_v` Chebyshev points in `v` and `n_psi` Fourier points in `psi`.
    pub fn grid(&self, n_v: usize, n_psi: usize) -> Result<Grid2D> {
        Grid2D::new(
            n_psi,
            n_v,
            Interval::new(-0.5 * self.ql, 0.5 * self.ql),
            Interval::new(0.0, self.phi),
        )
    }

    fn surface_samples(&self, grid: &Grid2D) -> Result<Vec<f64>> {
        let f: Vec<f64> = grid.periodic_nodes.iter().map(|&p| self.surface.eval(p)).collect();
        if f.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Domain("surface function must be positive".into()));
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HodographState {
    pub n: Vec<f64>,
    pub y: Vec<f64>,
}

impl HodographState {
    pub fn from_stacked(u: &[f64]) -> Self {
        let half = u.len() / 2;
        Self {
            n: u[..half].to_vec(),
            y: u[half..].to_vec(),
        }
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut u = self.n.clone();
        u.extend_from_slice(&self.y);
        u
    }
}

struct Derivs {
    nv: Vec<f64>,
    nvv: Vec<f64>,
    npp: Vec<f64>,
    yv: Vec<f64>,
    yp: Vec<f64>,
}

fn derivs(grid: &Grid2D, s: &HodographState) -> Derivs {
    Derivs {
        nv: grid.apply_cheb(&grid.dc1, &s.n),
        nvv: grid.apply_cheb(&grid.dc2, &s.n),
        npp: grid.apply_periodic(&grid.dp2, &s.n),
        yv: grid.apply_cheb(&grid.dc1, &s.y),
        yp: grid.apply_periodic(&grid.dp1, &s.y),
    }
}

fn check_state(grid: &Grid2D, s: &HodographState) -> Result<()> {
    for len in [s.n.len(), s.y.len()] {
        if len != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: len,
            });
        }
    }
    if s.n.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("hodograph equations need n > 0 everywhere".into()));
    }
    Ok(())
}

/// Residual of both hodograph equations with Dirichlet rows replaced.
pub fn residual_hodograph(grid: &Grid2D, s: &HodographState, prob: &HodographProblem) -> Result<Vec<f64>> {
    check_state(grid, s)?;
    let f = prob.surface_samples(grid)?;
    residual_with(grid, s, prob.nu, &f)
}

fn residual_with(grid: &Grid2D, s: &HodographState, nu: f64, f: &[f64]) -> Result<Vec<f64>> {
    let nn = grid.len();
    let nu2 = nu * nu;
    let d = derivs(grid, s);
    let flux_v: Vec<f64> = (0..nn).map(|k| d.yv[k] / s.n[k]).collect();
    let flux_p: Vec<f64> = (0..nn).map(|k| s.n[k] * d.yp[k]).collect();
    let div_v = grid.apply_cheb(&grid.dc1, &flux_v);
    let div_p = grid.apply_periodic(&grid.dp1, &flux_p);
    let mut r = vec![0.0; 2 * nn];
    for k in 0..nn {
        let n = s.n[k];
        r[k] = d.nvv[k] + d.nv[k] - 2.0 * d.nv[k] * d.nv[k] / n + n * n * d.npp[k]
            - (n * n * n / nu2) * (n * d.yp[k] * d.yp[k] + d.yv[k] * d.yv[k] / n);
        r[nn + k] = div_v[k] + div_p[k];
    }
    let last = grid.n_cheb - 1;
    for (i, fi) in f.iter().enumerate() {
        let top = grid.index(i, 0);
        let bottom = grid.index(i, last);
        r[top] = s.n[top] - 1.0;
        r[bottom] = s.n[bottom] - 1.0;
        r[nn + top] = s.y[top] - fi;
        r[nn + bottom] = s.y[bottom];
    }
    Ok(r)
}

/// Adds `diag(w_row) * D_v * diag(w_col)` along every psi column.
fn add_v_op(jac: &mut Matrix, grid: &Grid2D, d: &Matrix, at: (usize, usize), w_row: &[f64], w_col: Option<&[f64]>) {
    let nc = grid.n_cheb;
    for i in 0..grid.n_periodic {
        for j in 0..nc {
            let k = grid.index(i, j);
            if w_row[k] == 0.0 {
                continue;
            }
            for jp in 0..nc {
                let kp = grid.index(i, jp);
                let c = w_col.map_or(1.0, |w| w[kp]);
                jac[(at.0 + k, at.1 + kp)] += w_row[k] * d[(j, jp)] * c;
            }
        }
    }
}

/// Adds `diag(w_row) * D_psi * diag(w_col)` along every v level.
fn add_psi_op(jac: &mut Matrix, grid: &Grid2D, d: &Matrix, at: (usize, usize), w_row: &[f64], w_col: Option<&[f64]>) {
    for i in 0..grid.n_periodic {
        for j in 0..grid.n_cheb {
            let k = grid.index(i, j);
            if w_row[k] == 0.0 {
                continue;
            }
            for ip in 0..grid.n_periodic {
                let kp = grid.index(ip, j);
                let c = w_col.map_or(1.0, |w| w[kp]);
                jac[(at.0 + k, at.1 + kp)] += w_row[k] * d[(i, ip)] * c;
            }
        }
    }
}

/// Dense `A B` for square matrices of matching size.
fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    a * b
}

/// Fréchet derivative of [`residual_hodograph`].
pub fn jacobian_hodograph(grid: &Grid2D, s: &HodographState, prob: &HodographProblem) -> Result<Matrix> {
    check_state(grid, s)?;
    Ok(jacobian_with(grid, s, prob.nu))
}

fn jacobian_with(grid: &Grid2D, s: &HodographState, nu: f64) -> Matrix {
    let nn = grid.len();
    let nu2 = nu * nu;
    let d = derivs(grid, s);
    let mut jac = Matrix::zeros(2 * nn, 2 * nn);
    let ones = vec![1.0; nn];
    let n = &s.n;

    // eq1 with respect to n.
    add_v_op(&mut jac, grid, &grid.dc2, (0, 0), &ones, None);
    let w: Vec<f64> = (0..nn).map(|k| 1.0 - 4.0 * d.nv[k] / n[k]).collect();
    add_v_op(&mut jac, grid, &grid.dc1, (0, 0), &w, None);
    let w: Vec<f64> = (0..nn).map(|k| n[k] * n[k]).collect();
    add_psi_op(&mut jac, grid, &grid.dp2, (0, 0), &w, None);
    for k in 0..nn {
        let nk = n[k];
        jac[(k, k)] += 2.0 * d.nv[k] * d.nv[k] / (nk * nk) + 2.0 * nk * d.npp[k]
            - 4.0 * nk.powi(3) * d.yp[k] * d.yp[k] / nu2
            - 2.0 * nk * d.yv[k] * d.yv[k] / nu2;
    }
    // eq1 with respect to y.
    let w: Vec<f64> = (0..nn).map(|k| -2.0 * n[k].powi(4) * d.yp[k] / nu2).collect();
    add_psi_op(&mut jac, grid, &grid.dp1, (0, nn), &w, None);
    let w: Vec<f64> = (0..nn).map(|k| -2.0 * n[k] * n[k] * d.yv[k] / nu2).collect();
    add_v_op(&mut jac, grid, &grid.dc1, (0, nn), &w, None);

    // eq2 with respect to y: D_v diag(1/n) D_v + D_psi diag(n) D_psi.
    let inv_n: Vec<f64> = n.iter().map(|v| 1.0 / v).collect();
    let nc = grid.n_cheb;
    for i in 0..grid.n_periodic {
        let mut inner = Matrix::zeros(nc, nc);
        for j in 0..nc {
            for jp in 0..nc {
                inner[(j, jp)] = inv_n[grid.index(i, j)] * grid.dc1[(j, jp)];
            }
        }
        let block = matmul(&grid.dc1, &inner);
        for j in 0..nc {
            for jp in 0..nc {
                jac[(nn + grid.index(i, j), nn + grid.index(i, jp))] += block[(j, jp)];
            }
        }
    }
    let np = grid.n_periodic;
    for j in 0..nc {
        let mut inner = Matrix::zeros(np, np);
        for i in 0..np {
            for ip in 0..np {
                inner[(i, ip)] = n[grid.index(i, j)] * grid.dp1[(i, ip)];
            }
        }
        let block = matmul(&grid.dp1, &inner);
        for i in 0..np {
            for ip in 0..np {
                jac[(nn + grid.index(i, j), nn + grid.index(ip, j))] += block[(i, ip)];
            }
        }
    }
    // eq2 with respect to n: D_v diag(-y_v / n^2) + D_psi diag(y_psi).
    let w: Vec<f64> = (0..nn).map(|k| -d.yv[k] / (n[k] * n[k])).collect();
    add_v_op(&mut jac, grid, &grid.dc1, (nn, 0), &ones, Some(&w));
    add_psi_op(&mut jac, grid, &grid.dp1, (nn, 0), &ones, Some(&d.yp));

    crate::pnp_core::dirichlet_rows(&mut jac, grid);
    jac
}

struct HodographSystem<'a> {
    grid: &'a Grid2D,
    nu: f64,
    f: Vec<f64>,
}

impl NonlinearSystem for HodographSystem<'_> {
    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        residual_with(self.grid, &HodographState::from_stacked(u), self.nu, &self.f)
    }

    fn jacobian(&self, u: &[f64]) -> Result<Matrix> {
        Ok(jacobian_with(self.grid, &HodographState::from_stacked(u), self.nu))
    }

    fn admissible(&self, u: &[f64]) -> bool {
        u[..u.len() / 2].iter().all(|&v| v > 0.0)
    }
}

/// The 1D profile written as functions of `v`: `(n(v_j), Y(v_j))` with
/// `Y` the normalized height.
fn one_d_in_v(sol: &OneDSolution, v_nodes: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let y = &sol.y;
    let v: Vec<f64> = sol.phi.iter().zip(&sol.n).map(|(p, n)| p + n.ln()).collect();
    let v_at = |t: f64| barycentric_eval_nodes(&v, y, t);
    let phi_b = v[0];
    let mut ns = Vec::with_capacity(v_nodes.len());
    let mut ys = Vec::with_capacity(v_nodes.len());
    for &vj in v_nodes {
        let t = if vj <= 0.0 {
            1.0
        } else if vj >= phi_b {
            0.0
        } else {
            find_root(|t| Ok(v_at(t) - vj), 0.0, 1.0, 1e-15, 300)?
        };
        ns.push(barycentric_eval_nodes(&sol.n, y, t));
        ys.push(t);
    }
    Ok((ns, ys))
}

/// Quasi-1D initial guess: every `psi` column is the 1D solution at the
/// local thickness `F(psi)`, written in terms of `v`.
pub fn initial_guess_hodograph(grid: &Grid2D, prob: &HodographProblem) -> Result<HodographState> {
    let f = prob.surface_samples(grid)?;
    let nc = grid.n_cheb;
    let mut memo: HashMap<u64, (Vec<f64>, Vec<f64>)> = HashMap::new();
    let mut n = vec![0.0; grid.len()];
    let mut y = vec![0.0; grid.len()];
    for (i, &fi) in f.iter().enumerate() {
        let nu_hat = prob.nu / fi;
        let key = (nu_hat * 1e12).round().to_bits();
        if let std::collections::hash_map::Entry::Vacant(e) = memo.entry(key) {
            let sol = solve_1d(nu_hat, prob.phi, nc.max(recommended_points(nu_hat)))?;
            e.insert(one_d_in_v(&sol, &grid.cheb_nodes)?);
        }
        let (ns, ys) = &memo[&key];
        for j in 0..nc {
            let k = grid.index(i, j);
            n[k] = ns[j].max(1e-12);
            y[k] = fi * ys[j];
        }
        n[grid.index(i, 0)] = 1.0;
        n[grid.index(i, nc - 1)] = 1.0;
        y[grid.index(i, 0)] = fi;
        y[grid.index(i, nc - 1)] = 0.0;
    }
    Ok(HodographState { n, y })
}

/// A converged hodograph solution.
#[derive(Debug, Clone)]
pub struct HodographSolution {
    pub problem: HodographProblem,
    pub grid: Grid2D,
    pub state: HodographState,
    pub history: NewtonHistory,
}

/// Newton solve from the quasi-1D guess.
pub fn solve_hodograph(prob: &HodographProblem, n_v: usize, n_psi: usize, opts: &NewtonOptions) -> Result<HodographSolution> {
    let grid = prob.grid(n_v, n_psi)?;
    let guess = initial_guess_hodograph(&grid, prob)?;
    solve_hodograph_from(prob, grid, guess, opts)
}

/// Newton solve from an explicit guess on `grid`.
pub fn solve_hodograph_from(
    prob: &HodographProblem,
    grid: Grid2D,
    guess: HodographState,
    opts: &NewtonOptions,
) -> Result<HodographSolution> {
    let f = prob.surface_samples(&grid)?;
    let sys = HodographSystem {
        grid: &grid,
        nu: prob.nu,
        f,
    };
    let (u, history) = damped_newton(&sys, guess.stacked(), opts)?;
    Ok(HodographSolution {
        problem: prob.clone(),
        grid,
        state: HodographState::from_stacked(&u),
        history,
    })
}

/// `L(v)` samples and their relative spread.
#[derive(Debug, Clone)]
pub struct LengthDiagnostic {
    pub v: Vec<f64>,
    pub l: Vec<f64>,
    /// Clenshaw–Curtis mean over `v`.
    pub mean: f64,
    pub spread: f64,
}

impl HodographSolution {
    /// `-y_v / n`, the density of `x` along `psi`.
    fn x_density(&self) -> Vec<f64> {
        let yv = self.grid.apply_cheb(&self.grid.dc1, &self.state.y);
        yv.iter().zip(&self.state.n).map(|(a, b)| -a / b).collect()
    }

    fn level_series(&self, u: &[f64], j: usize) -> TrigSeries {
        TrigSeries::new(&self.grid.level(u, j), self.grid.periodic_interval)
    }

    /// `x(v, psi) = -∫_{-QL/2}^{psi} y_v / n dpsi'` at every node.
    pub fn recover_x(&self) -> Vec<f64> {
        let dens = self.x_density();
        let mut x = vec![0.0; self.grid.len()];
        for j in 0..self.grid.n_cheb {
            let s = self.level_series(&dens, j);
            for (i, &p) in self.grid.periodic_nodes.iter().enumerate() {
                x[self.grid.index(i, j)] = s.antiderivative(p);
            }
        }
        x
    }

    pub fn length_diagnostic(&self) -> LengthDiagnostic {
        let dens = self.x_density();
        let period = self.grid.periodic_interval.length();
        let l: Vec<f64> = (0..self.grid.n_cheb)
            .map(|j| self.grid.level(&dens, j).iter().sum::<f64>() / self.grid.n_periodic as f64 * period)
            .collect();
        let w = clenshaw_curtis_weights(self.grid.n_cheb, self.grid.cheb_interval);
        let mean = l.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / self.grid.cheb_interval.length();
        let spread = l.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max) / mean;
        LengthDiagnostic {
            v: self.grid.cheb_nodes.clone(),
            l,
            mean,
            spread,
        }
    }

    /// Period length (mean of `L(v)`).
    pub fn length(&self) -> f64 {
        self.length_diagnostic().mean
    }

    /// Average current density `QL / L`.
    pub fn average_current_density(&self) -> f64 {
        self.problem.ql / self.length()
    }

    pub fn residual_norm(&self) -> Result<f64> {
        Ok(sup_norm(&residual_hodograph(&self.grid, &self.state, &self.problem)?))
    }

    /// Physical curve of constant `psi` from the top (`v = 0`) to the bottom
    /// (`v = Phi`), sampled at `n_points` values of `v`. Physical `x` is
    /// measured from the centre of the period.
    pub fn constant_psi_curve(&self, psi: f64, n_points: usize) -> Vec<(f64, f64)> {
        let dens = self.x_density();
        let half = 0.5 * self.length();
        let nodes = &self.grid.cheb_nodes;
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..self.grid.n_cheb)
            .map(|j| {
                let sx = self.level_series(&dens, j);
                let sy = self.level_series(&self.state.y, j);
                (sx.antiderivative(psi), sy.eval(psi))
            })
            .unzip();
        let vs = cheb_nodes(n_points, self.grid.cheb_interval);
        vs.iter()
            .map(|&v| {
                (
                    barycentric_eval_nodes(&xs, nodes, v) - half,
                    barycentric_eval_nodes(&ys, nodes, v),
                )
            })
            .collect()
    }

    /// `(L(0), ∫ F x_psi(0, psi) dpsi)`: period and area seen from the top edge.
    pub fn top_length_and_area(&self) -> (f64, f64) {
        let dens = self.grid.level(&self.x_density(), 0);
        let f = self.grid.level(&self.state.y, 0);
        let h = self.grid.periodic_interval.length() / self.grid.n_periodic as f64;
        let len = dens.iter().sum::<f64>() * h;
        let area = dens.iter().zip(&f).map(|(d, f)| d * f).sum::<f64>() * h;
        (len, area)
    }

    /// Top surface `(x, F)` recovered from `x(0, psi)`.
    pub fn top_surface(&self) -> Vec<(f64, f64)> {
        let x = self.recover_x();
        let half = 0.5 * self.length();
        (0..self.grid.n_periodic)
            .map(|i| {
                let k = self.grid.index(i, 0);
                (x[k] - half, self.state.y[k])
            })
            .collect()
    }

    /// `C(x)` on `[0, L/2]` by monotone inversion of `x(Phi, psi)`.
    pub fn cumulative_current(&self, n_samples: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let dens = self.x_density();
        let bottom = self.grid.n_cheb - 1;
        let s = self.level_series(&dens, bottom);
        let lb = s.mean() * self.grid.periodic_interval.length();
        let half_ql = 0.5 * self.problem.ql;
        let fine = 8 * self.grid.n_periodic + 1;
        let psis = fourier_nodes(fine - 1, self.grid.periodic_interval)
            .into_iter()
            .chain(std::iter::once(half_ql))
            .collect::<Vec<_>>();
        let xs: Vec<f64> = psis.iter().map(|&p| s.antiderivative(p) - 0.5 * lb).collect();
        let interp = MonotoneCubic::new(xs, psis)?;
        let x: Vec<f64> = (0..n_samples).map(|i| 0.5 * lb * i as f64 / (n_samples - 1) as f64).collect();
        let mut c: Vec<f64> = x.iter().map(|&x| interp.eval(x) / half_ql).collect();
        c[0] = 0.0;
        c[n_samples - 1] = 1.0;
        Ok((x, c))
    }
}

/// Hodograph inputs derived from a converged conformal solution.
#[derive(Debug, Clone)]
pub struct ExtractedInputs {
    pub ql: f64,
    pub surface: TrigSurface,
    /// Samples `(psi, F)` used to build the interpolant.
    pub samples: Vec<(f64, f64)>,
}

/// Builds `QL` and `F(psi)` from a conformal solution. `F` is sampled at
/// `n_samples` equispaced `psi` values by inverting the streamfunction
/// along the top boundary.
pub fn extract_hodograph_inputs(sol: &ConformalSolution, n_samples: usize) -> Result<ExtractedInputs> {
    let l = sol.domain.l();
    let q = crate::postproc::average_current_density(sol);
    let ql = q * l;
    let (_, je) = sol.flux();
    let top = sol.grid.level(&je, sol.grid.n_cheb - 1);
    if top.iter().any(|&j| !(j > 0.0)) {
        return Err(Error::Domain(
            "streamfunction is not monotone along the top boundary (flux reversal)".into(),
        ));
    }
    let series = TrigSeries::new(&top, sol.grid.periodic_interval);
    let lo = sol.grid.periodic_interval.lo;
    let total = series.mean() * l;
    let base = series.antiderivative(lo);
    let psi_of = |xi: f64| ql * ((series.antiderivative(xi) - base) / total - 0.5);
    let eta = sol.domain.eta_star();
    let period = Interval::new(-0.5 * ql, 0.5 * ql);
    let psis = fourier_nodes(n_samples, period);
    let mut samples = Vec::with_capacity(n_samples);
    for &p in &psis {
        let xi = find_root(|xi| Ok(psi_of(xi) - p), lo, lo + l, 1e-14 * l, 400)?;
        let y = sol.domain.map(Complex64::new(xi, eta))?.im;
        samples.push((p, y));
    }
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    Ok(ExtractedInputs {
        ql,
        surface: TrigSurface::new(&values, period),
        samples,
    })
}

/// A smooth profile tuned so that the full hodograph solution has the
/// requested period and unit mean thickness.
#[derive(Debug, Clone)]
pub struct CalibratedProfile {
    pub profile: SmoothProfile,
    pub solution: HodographSolution,
    pub iterations: usize,
}

/// Builds the slowly varying profile for `(h_min, a, L, Phi)` at Debye
/// length `nu`.
///
/// The quasi-1D model `x_psi = F / j1D(nu / F, Phi)` gives the first guess;
/// each full solve then rescales the model's length and area targets by the
/// observed mismatch until the period is `l` and the mean thickness is one
/// to `tol` relative.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_smooth_profile(
    h_min: f64,
    a: f64,
    l: f64,
    phi: f64,
    nu: f64,
    table: &J1dTable,
    n_v: usize,
    n_psi: usize,
    opts: &NewtonOptions,
    tol: f64,
) -> Result<CalibratedProfile> {
    build_smooth_profile(h_min, a, l, phi, nu, table)?;
    let weight = |f: f64| Ok(1.0 / table.get(nu / f));
    let (mut t_len, mut t_area) = (l, l);
    let mut prev: Option<HodographSolution> = None;
    for it in 1..=12 {
        let profile = build_smooth_profile_with(h_min, a, l, phi, t_len, t_area, &weight)?;
        let prob = HodographProblem::new(phi, profile.ql, nu, Arc::new(profile.clone()))?;
        let sol = match &prev {
            Some(p) => rescaled_solve(p, prob.clone(), opts).or_else(|_| solve_hodograph(&prob, n_v, n_psi, opts))?,
            None => solve_hodograph(&prob, n_v, n_psi, opts)?,
        };
        let (len, area) = sol.top_length_and_area();
        log::debug!("calibration {it}: L = {len}, mean thickness = {}", area / len);
        if (len - l).abs() < tol * l && (area / len - 1.0).abs() < tol {
            return Ok(CalibratedProfile {
                profile,
                solution: sol,
                iterations: it,
            });
        }
        t_len *= l / len;
        t_area *= l / area;
        prev = Some(sol);
    }
    Err(Error::NonConvergence {
        iterations: 12,
        update_norm: f64::NAN,
    })
}

/// Solves for the `QL` that yields period `target_l` by secant iteration,
/// warm-starting each solve from the previous one.
#[allow(clippy::too_many_arguments)]
pub fn solve_for_length(
    phi: f64,
    nu: f64,
    surface: Arc<dyn SurfaceFunction>,
    ql0: f64,
    target_l: f64,
    n_v: usize,
    n_psi: usize,
    opts: &NewtonOptions,
) -> Result<HodographSolution> {
    let make = |ql: f64| HodographProblem::new(phi, ql, nu, surface.clone());
    let first = solve_hodograph(&make(ql0)?, n_v, n_psi, opts)?;
    let mut a = (ql0, first.length() - target_l);
    let ql1 = ql0 * target_l / first.length();
    let mut best = first;
    let second = rescaled_solve(&best, make(ql1)?, opts)?;
    let mut b = (ql1, second.length() - target_l);
    best = second;
    for _ in 0..30 {
        if b.1.abs() < 1e-10 * target_l {
            return Ok(best);
        }
        let ql = b.0 - b.1 * (b.0 - a.0) / (b.1 - a.1);
        let next = rescaled_solve(&best, make(ql)?, opts)?;
        a = b;
        b = (ql, next.length() - target_l);
        best = next;
    }
    Err(Error::NonConvergence {
        iterations: 30,
        update_norm: b.1.abs(),
    })
}

/// Solves `prob` starting from `prev` stretched to the new `psi` period.
pub fn rescaled_solve(prev: &HodographSolution, prob: HodographProblem, opts: &NewtonOptions) -> Result<HodographSolution> {
    let grid = prob.grid(prev.grid.n_cheb, prev.grid.n_periodic)?;
    let f = prob.surface_samples(&grid)?;
    let mut state = prev.state.clone();
    let nc = grid.n_cheb;
    for (i, fi) in f.iter().enumerate() {
        state.y[grid.index(i, 0)] = *fi;
        state.y[grid.index(i, nc - 1)] = 0.0;
        // Keep the interior column shape, rescaled to the new top height.
        let old_top = prev.state.y[prev.grid.index(i, 0)];
        for j in 1..nc - 1 {
            state.y[grid.index(i, j)] *= fi / old_top;
        }
    }
    solve_hodograph_from(&prob, grid, state, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wavy(ql: f64) -> Arc<dyn SurfaceFunction> {
        let samples: Vec<f64> = fourier_nodes(16, Interval::new(-0.5 * ql, 0.5 * ql))
            .iter()
            .map(|p| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * p / ql).cos())
            .collect();
        Arc::new(TrigSurface::new(&samples, Interval::new(-0.5 * ql, 0.5 * ql)))
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let prob = HodographProblem::new(1.0, 3.0, 0.3, wavy(3.0)).unwrap();
        let grid = prob.grid(9, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let s = HodographState {
                n: (0..grid.len()).map(|_| rng.gen_range(0.3..2.0)).collect(),
                y: (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            let u = s.stacked();
            let dir: Vec<f64> = (0..u.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let jac = jacobian_hodograph(&grid, &s, &prob).unwrap();
            let jd: Vec<f64> = (0..u.len()).map(|i| (0..u.len()).map(|k| jac[(i, k)] * dir[k]).sum()).collect();
            let h = 1e-6;
            let at = |sign: f64| {
                let w: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + sign * h * b).collect();
                residual_hodograph(&grid, &HodographState::from_stacked(&w), &prob).unwrap()
            };
            let (rp, rm) = (at(1.0), at(-1.0));
            let err = (0..u.len())
                .map(|i| ((rp[i] - rm[i]) / (2.0 * h) - jd[i]).abs())
                .fold(0.0, f64::max);
            let scale = jd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err < 1e-6 * scale, "{err} vs {scale}");
        }
    }

    #[test]
    fn unit_density_gives_laplacian_block() {
        let prob = HodographProblem::new(1.0, 2.0, 0.5, Arc::new(FlatSurface(1.0))).unwrap();
        let grid = prob.grid(6, 6).unwrap();
        let s = HodographState {
            n: vec![1.0; grid.len()],
            y: vec![0.2; grid.len()],
        };
        let jac = jacobian_hodograph(&grid, &s, &prob).unwrap();
        let nn = grid.len();
        let dv2 = &grid.dc1 * &grid.dc1;
        let dp2 = &grid.dp1 * &grid.dp1;
        let (i, j) = (2, 3);
        let k = grid.index(i, j);
        for ip in 0..6 {
            for jp in 0..6 {
                let kp = grid.index(ip, jp);
                let mut expected = 0.0;
                if ip == i {
                    expected += dv2[(j, jp)];
                }
                if jp == j {
                    expected += dp2[(i, ip)];
                }
                assert!((jac[(nn + k, nn + kp)] - expected).abs() < 1e-10);
            }
        }
        let row = grid.index(1, 0);
        for c in 0..2 * nn {
            assert_eq!(jac[(row, c)], if c == row { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn flat_layer_is_the_1d_solution() {
        let nu = 0.25;
        let one = solve_1d(nu, 1.0, 80).unwrap();
        let ql = one.j * 2.0;
        let prob = HodographProblem::new(1.0, ql, nu, Arc::new(FlatSurface(1.0))).unwrap();
        let grid = prob.grid(60, 8).unwrap();
        let (ns, ys) = one_d_in_v(&one, &grid.cheb_nodes).unwrap();
        let mut s = HodographState {
            n: vec![0.0; grid.len()],
            y: vec![0.0; grid.len()],
        };
        for i in 0..8 {
            for j in 0..60 {
                s.n[grid.index(i, j)] = ns[j];
                s.y[grid.index(i, j)] = ys[j];
            }
        }
        let r = residual_hodograph(&grid, &s, &prob).unwrap();
        let worst = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-6, "{worst}");

        let sol = solve_hodograph(&prob, 60, 8, &NewtonOptions::default()).unwrap();
        let diag = sol.length_diagnostic();
        assert!(diag.spread < 1e-10);
        assert!((diag.mean - 2.0).abs() < 1e-8);
        assert!((sol.average_current_density() - one.j).abs() < 1e-8);
        let x = sol.recover_x();
        for j in 0..60 {
            for i in 0..8 {
                let expected = (grid.periodic_nodes[i] + 0.5 * ql) / ql * 2.0;
                assert!((x[grid.index(i, j)] - expected).abs() < 1e-8);
            }
        }
        let (cx, c) = sol.cumulative_current(9).unwrap();
        for (a, b) in cx.iter().zip(&c) {
            assert!((b - a).abs() < 1e-8);
        }
    }

    #[test]
    fn manufactured_residual() {
        let ql = 2.0 * std::f64::consts::PI;
        let nu = 0.5;
        let prob = HodographProblem::new(1.0, ql, nu, Arc::new(FlatSurface(1.0))).unwrap();
        let grid = prob.grid(20, 16).unwrap();
        let mut s = HodographState {
            n: vec![0.0; grid.len()],
            y: vec![0.0; grid.len()],
        };
        let mut expected = vec![0.0; 2 * grid.len()];
        let nn = grid.len();
        let nu2 = nu * nu;
        for i in 0..16 {
            for j in 0..20 {
                let (p, v) = (grid.periodic_nodes[i], grid.cheb_nodes[j]);
                let k = grid.index(i, j);
                let n = 1.0 + 0.3 * v * (1.0 - v) * (1.0 + 0.5 * p.cos());
                let nv = 0.3 * (1.0 - 2.0 * v) * (1.0 + 0.5 * p.cos());
                let nvv = -0.6 * (1.0 + 0.5 * p.cos());
                let npp = -0.15 * v * (1.0 - v) * p.cos();
                let np = -0.15 * v * (1.0 - v) * p.sin();
                let y = (1.0 - v) * (1.0 + 0.2 * p.sin());
                let yv = -(1.0 + 0.2 * p.sin());
                let yvv = 0.0;
                let yp = 0.2 * (1.0 - v) * p.cos();
                let ypp = -0.2 * (1.0 - v) * p.sin();
                s.n[k] = n;
                s.y[k] = y;
                expected[k] = nvv + nv - 2.0 * nv * nv / n + n * n * npp
                    - (n * n * n / nu2) * (n * yp * yp + yv * yv / n);
                expected[nn + k] = (yvv * n - yv * nv) / (n * n) + np * yp + n * ypp;
            }
        }
        let r = residual_hodograph(&grid, &s, &prob).unwrap();
        for i in 0..16 {
            for j in 1..19 {
                let k = grid.index(i, j);
                assert!((r[k] - expected[k]).abs() < 1e-10, "{} {}", r[k], expected[k]);
                assert!((r[nn + k] - expected[nn + k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_nonpositive_density() {
        let prob = HodographProblem::new(1.0, 2.0, 0.5, Arc::new(FlatSurface(1.0))).unwrap();
        let grid = prob.grid(5, 4).unwrap();
        let s = HodographState {
            n: vec![0.0; grid.len()],
            y: vec![0.0; grid.len()],
        };
        assert!(residual_hodograph(&grid, &s, &prob).is_err());
    }

    #[test]
    fn wavy_surface_solves() {
        let prob = HodographProblem::new(1.0, 1.5, 0.3, wavy(1.5)).unwrap();
        let sol = solve_hodograph(&prob, 33, 16, &NewtonOptions::default()).unwrap();
        assert!(sol.residual_norm().unwrap() < 1e-8);
        let diag = sol.length_diagnostic();
        assert!(diag.spread < 1e-6, "{}", diag.spread);
        let x = sol.recover_x();
        for j in 0..33 {
            assert!(x[sol.grid.index(0, j)].abs() < 1e-12);
        }
        let top = sol.top_surface();
        assert!(top.windows(2).all(|w| w[1].0 > w[0].0));
    }
}
