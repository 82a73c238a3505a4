//! Drift-diffusion system on the conformally mapped rectangle:
//!
//! `nu^2 (phi_xx + phi_ee) + G n = 0`,
//! `n_xx + n_ee + n_x phi_x + n_e phi_e - G n^2 / nu^2 = 0`,
//!
//! with `phi = Phi, n = 1` on `eta = 0` and `phi = 0, n = 1` on `eta = eta_star`.
//! Unknowns are stacked as `[phi; n]`, each flattened on a [`Grid2D`].

pub mod newton;
pub mod one_d;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::spectral::{barycentric_eval_nodes, cheb_cumulative, cheb_nodes, Grid2D, Interval, Matrix};

pub use newton::{damped_newton, NewtonHistory, NewtonOptions, NewtonRecord, NonlinearSystem};
pub use one_d::{recommended_points, solve_1d, J1dCache, J1dTable, OneDSolution};

/// Below this Debye length the optional continuation kicks in.
pub const CONTINUATION_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub phi: Vec<f64>,
    pub n: Vec<f64>,
}

impl FieldState {
    pub fn from_stacked(u: &[f64]) -> Self {
        let half = u.len() / 2;
        Self {
            phi: u[..half].to_vec(),
            n: u[half..].to_vec(),
        }
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut u = self.phi.clone();
        u.extend_from_slice(&self.n);
        u
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub nu: f64,
    pub phi: f64,
    pub newton: NewtonOptions,
    pub continuation: bool,
}

impl SolverParams {
    pub fn new(nu: f64, phi: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Domain(format!("nu = {nu} must be positive")));
        }
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(Error::Domain(format!("Phi = {phi} must be positive")));
        }
        Ok(Self {
            nu,
            phi,
            newton: NewtonOptions::default(),
            continuation: false,
        })
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Derivatives of a field: `(u_x, u_xx, u_e, u_ee)`.
pub(crate) fn derivatives(grid: &Grid2D, u: &[f64]) -> [Vec<f64>; 4] {
    [
        grid.apply_periodic(&grid.dp1, u),
        grid.apply_periodic(&grid.dp2, u),
        grid.apply_cheb(&grid.dc1, u),
        grid.apply_cheb(&grid.dc2, u),
    ]
}

/// Residual of both equations with Dirichlet rows replaced.
pub fn residual_conformal(grid: &Grid2D, state: &FieldState, g: &[f64], p: &SolverParams) -> Result<Vec<f64>> {
    let n_nodes = grid.len();
    check_len(n_nodes, state.phi.len())?;
    check_len(n_nodes, state.n.len())?;
    check_len(n_nodes, g.len())?;
    let nu2 = p.nu * p.nu;
    let [px, pxx, pe, pee] = derivatives(grid, &state.phi);
    let [nx, nxx, ne, nee] = derivatives(grid, &state.n);
    let mut r = vec![0.0; 2 * n_nodes];
    for k in 0..n_nodes {
        let n = state.n[k];
        r[k] = nu2 * (pxx[k] + pee[k]) + g[k] * n;
        r[n_nodes + k] = nxx[k] + nee[k] + nx[k] * px[k] + ne[k] * pe[k] - g[k] * n * n / nu2;
    }
    let top = grid.n_cheb - 1;
    for i in 0..grid.n_periodic {
        let b = grid.index(i, 0);
        let t = grid.index(i, top);
        r[b] = state.phi[b] - p.phi;
        r[t] = state.phi[t];
        r[n_nodes + b] = state.n[b] - 1.0;
        r[n_nodes + t] = state.n[t] - 1.0;
    }
    Ok(r)
}

/// Adds `scale * (A ⊗ I)` (periodic direction) into a block of `jac`,
/// optionally weighted per row.
fn add_periodic(jac: &mut Matrix, grid: &Grid2D, d: &Matrix, row0: usize, col0: usize, weight: &dyn Fn(usize) -> f64) {
    let nc = grid.n_cheb;
    for i in 0..grid.n_periodic {
        for j in 0..nc {
            let k = grid.index(i, j);
            let w = weight(k);
            if w == 0.0 {
                continue;
            }
            for ip in 0..grid.n_periodic {
                jac[(row0 + k, col0 + ip * nc + j)] += w * d[(i, ip)];
            }
        }
    }
}

fn add_cheb(jac: &mut Matrix, grid: &Grid2D, d: &Matrix, row0: usize, col0: usize, weight: &dyn Fn(usize) -> f64) {
    let nc = grid.n_cheb;
    for i in 0..grid.n_periodic {
        for j in 0..nc {
            let k = grid.index(i, j);
            let w = weight(k);
            if w == 0.0 {
                continue;
            }
            for jp in 0..nc {
                jac[(row0 + k, col0 + i * nc + jp)] += w * d[(j, jp)];
            }
        }
    }
}

/// Replaces boundary rows of both blocks with unit selector rows.
pub(crate) fn dirichlet_rows(jac: &mut Matrix, grid: &Grid2D) {
    let n_nodes = grid.len();
    let top = grid.n_cheb - 1;
    for i in 0..grid.n_periodic {
        for j in [0, top] {
            for block in 0..2 {
                let row = block * n_nodes + grid.index(i, j);
                for c in 0..2 * n_nodes {
                    jac[(row, c)] = 0.0;
                }
                jac[(row, row)] = 1.0;
            }
        }
    }
}

/// Fréchet derivative of [`residual_conformal`].
pub fn jacobian_conformal(grid: &Grid2D, state: &FieldState, g: &[f64], p: &SolverParams) -> Result<Matrix> {
    let n_nodes = grid.len();
    check_len(n_nodes, state.phi.len())?;
    check_len(n_nodes, state.n.len())?;
    check_len(n_nodes, g.len())?;
    let nu2 = p.nu * p.nu;
    let [px, _, pe, _] = derivatives(grid, &state.phi);
    let [nx, _, ne, _] = derivatives(grid, &state.n);
    let mut jac = Matrix::zeros(2 * n_nodes, 2 * n_nodes);
    let nn = n_nodes;
    // Poisson block.
    add_periodic(&mut jac, grid, &grid.dp2, 0, 0, &|_| nu2);
    add_cheb(&mut jac, grid, &grid.dc2, 0, 0, &|_| nu2);
    for k in 0..nn {
        jac[(k, nn + k)] = g[k];
    }
    // Transport with respect to phi.
    add_periodic(&mut jac, grid, &grid.dp1, nn, 0, &|k| nx[k]);
    add_cheb(&mut jac, grid, &grid.dc1, nn, 0, &|k| ne[k]);
    // Transport with respect to n.
    add_periodic(&mut jac, grid, &grid.dp2, nn, nn, &|_| 1.0);
    add_cheb(&mut jac, grid, &grid.dc2, nn, nn, &|_| 1.0);
    add_periodic(&mut jac, grid, &grid.dp1, nn, nn, &|k| px[k]);
    add_cheb(&mut jac, grid, &grid.dc1, nn, nn, &|k| pe[k]);
    for k in 0..nn {
        jac[(nn + k, nn + k)] -= 2.0 * state.n[k] * g[k] / nu2;
    }
    dirichlet_rows(&mut jac, grid);
    Ok(jac)
}

/// The conformal problem as a [`NonlinearSystem`].
pub struct ConformalSystem<'a> {
    pub grid: &'a Grid2D,
    pub g: &'a [f64],
    pub params: SolverParams,
}

impl NonlinearSystem for ConformalSystem<'_> {
    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        residual_conformal(self.grid, &FieldState::from_stacked(u), self.g, &self.params)
    }

    fn jacobian(&self, u: &[f64]) -> Result<Matrix> {
        jacobian_conformal(self.grid, &FieldState::from_stacked(u), self.g, &self.params)
    }

    fn admissible(&self, u: &[f64]) -> bool {
        u[u.len() / 2..].iter().all(|&v| v > 0.0)
    }
}

/// Resolution used for the 1D slice solves behind initial guesses.
pub(crate) fn slice_points(n_cheb: usize, nu_hat: f64) -> usize {
    n_cheb.max(one_d::recommended_points(nu_hat))
}

/// Quasi-1D initial guess.
///
/// Every periodic column gets the 1D solution for its own local thickness
/// `H = ∫ sqrt(G) deta`, evaluated at the normalized arc length along the
/// column. Boundary values are exact.
pub fn initial_guess_2d(p: &SolverParams, grid: &Grid2D, g: &[f64]) -> Result<FieldState> {
    check_len(grid.len(), g.len())?;
    let nc = grid.n_cheb;
    let mut memo: HashMap<u64, (OneDSolution, Vec<f64>)> = HashMap::new();
    let mut phi = vec![0.0; grid.len()];
    let mut n = vec![0.0; grid.len()];
    for i in 0..grid.n_periodic {
        let col: Vec<f64> = (0..nc).map(|j| g[grid.index(i, j)].sqrt()).collect();
        let arc = cheb_cumulative(&col, grid.cheb_interval);
        let h = arc[nc - 1];
        if !(h > 0.0) {
            return Err(Error::Domain("non-positive local thickness in initial guess".into()));
        }
        let nu_hat = p.nu / h;
        let key = (nu_hat * 1e12).round().to_bits();
        let (sol, nodes) = memo.entry(key).or_insert_with(|| {
            let npts = slice_points(nc, nu_hat);
            (OneDSolution::default(), cheb_nodes(npts, Interval::new(0.0, 1.0)))
        });
        if sol.y.is_empty() {
            *sol = solve_1d(nu_hat, p.phi, nodes.len())?;
        }
        for j in 0..nc {
            let s = (arc[j] / h).clamp(0.0, 1.0);
            let k = grid.index(i, j);
            phi[k] = barycentric_eval_nodes(&sol.phi, nodes, s);
            n[k] = barycentric_eval_nodes(&sol.n, nodes, s).max(1e-12);
        }
        phi[grid.index(i, 0)] = p.phi;
        phi[grid.index(i, nc - 1)] = 0.0;
        n[grid.index(i, 0)] = 1.0;
        n[grid.index(i, nc - 1)] = 1.0;
    }
    Ok(FieldState { phi, n })
}

/// Newton solve of the conformal problem from a given guess; with
/// `continuation` set and `nu` below [`CONTINUATION_THRESHOLD`], first
/// solves at the threshold and steps `nu` down geometrically.
pub fn solve_conformal_from(
    grid: &Grid2D,
    g: &[f64],
    p: &SolverParams,
    guess: FieldState,
) -> Result<(FieldState, NewtonHistory)> {
    if p.continuation && p.nu < CONTINUATION_THRESHOLD {
        let mut nu = CONTINUATION_THRESHOLD;
        let mut state = guess;
        let mut stage = *p;
        stage.nu = nu;
        let (s, mut history) = {
            let sys = ConformalSystem { grid, g, params: stage };
            damped_newton(&sys, state.stacked(), &p.newton)?
        };
        state = FieldState::from_stacked(&s);
        while nu > p.nu {
            nu = (nu * 0.8).max(p.nu);
            stage.nu = nu;
            let sys = ConformalSystem { grid, g, params: stage };
            let (s, h) = damped_newton(&sys, state.stacked(), &p.newton)?;
            state = FieldState::from_stacked(&s);
            history.records.extend(h.records);
        }
        return Ok((state, history));
    }
    let sys = ConformalSystem { grid, g, params: *p };
    let (u, history) = damped_newton(&sys, guess.stacked(), &p.newton)?;
    Ok((FieldState::from_stacked(&u), history))
}

/// Newton solve from the quasi-1D guess.
pub fn solve_conformal(grid: &Grid2D, g: &[f64], p: &SolverParams) -> Result<(FieldState, NewtonHistory)> {
    let guess = if p.continuation && p.nu < CONTINUATION_THRESHOLD {
        let mut q = *p;
        q.nu = CONTINUATION_THRESHOLD;
        initial_guess_2d(&q, grid, g)?
    } else {
        initial_guess_2d(p, grid, g)?
    };
    solve_conformal_from(grid, g, p, guess)
}
