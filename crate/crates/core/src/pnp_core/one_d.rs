//! The one-dimensional layer problem on `[0, 1]`:
//! `nu^2 phi'' = -n`, `(n phi' + n')' = 0`, `phi(0) = Phi`, `phi(1) = 0`,
//! `n(0) = n(1) = 1`.

use std::collections::HashMap;
use std::sync::Mutex;

use super::newton::{damped_newton, NewtonOptions, NonlinearSystem};
use crate::error::{Error, Result};
use crate::spectral::{cheb_diff_matrix, cheb_nodes, Interval, Matrix};

/// Converged 1D profile on ascending Chebyshev nodes of `[0, 1]`.
#[derive(Debug, Clone, Default)]
pub struct OneDSolution {
    pub y: Vec<f64>,
    pub phi: Vec<f64>,
    pub n: Vec<f64>,
    /// Constant flux `-n phi' - n'`.
    pub j: f64,
}

struct OneD {
    nu2: f64,
    phi_b: f64,
    d1: Matrix,
    d2: Matrix,
}

impl OneD {
    fn new(nu_hat: f64, phi_b: f64, n_points: usize) -> Self {
        let iv = Interval::new(0.0, 1.0);
        Self {
            nu2: nu_hat * nu_hat,
            phi_b,
            d1: cheb_diff_matrix(n_points, 1, iv),
            d2: cheb_diff_matrix(n_points, 2, iv),
        }
    }

    fn size(&self) -> usize {
        self.d1.nrows()
    }

    fn apply(d: &Matrix, u: &[f64]) -> Vec<f64> {
        (0..d.nrows()).map(|i| (0..d.ncols()).map(|j| d[(i, j)] * u[j]).sum()).collect()
    }
}

impl NonlinearSystem for OneD {
    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let np = self.size();
        let (phi, n) = u.split_at(np);
        let (p1, p2) = (Self::apply(&self.d1, phi), Self::apply(&self.d2, phi));
        let (n1, n2) = (Self::apply(&self.d1, n), Self::apply(&self.d2, n));
        let mut r = vec![0.0; 2 * np];
        for j in 0..np {
            r[j] = self.nu2 * p2[j] + n[j];
            r[np + j] = n2[j] + n1[j] * p1[j] - n[j] * n[j] / self.nu2;
        }
        let last = np - 1;
        r[0] = phi[0] - self.phi_b;
        r[last] = phi[last];
        r[np] = n[0] - 1.0;
        r[np + last] = n[last] - 1.0;
        Ok(r)
    }

    fn jacobian(&self, u: &[f64]) -> Result<Matrix> {
        let np = self.size();
        let (phi, n) = u.split_at(np);
        let p1 = Self::apply(&self.d1, phi);
        let n1 = Self::apply(&self.d1, n);
        let mut jac = Matrix::zeros(2 * np, 2 * np);
        for i in 0..np {
            for k in 0..np {
                jac[(i, k)] = self.nu2 * self.d2[(i, k)];
                jac[(np + i, k)] = n1[i] * self.d1[(i, k)];
                jac[(np + i, np + k)] = self.d2[(i, k)] + p1[i] * self.d1[(i, k)];
            }
            jac[(i, np + i)] = 1.0;
            jac[(np + i, np + i)] -= 2.0 * n[i] / self.nu2;
        }
        for row in [0, np - 1, np, 2 * np - 1] {
            for k in 0..2 * np {
                jac[(row, k)] = 0.0;
            }
            jac[(row, row)] = 1.0;
        }
        Ok(jac)
    }

    fn admissible(&self, u: &[f64]) -> bool {
        u[self.size()..].iter().all(|&v| v > 0.0)
    }
}

fn finish(sys: &OneD, u: Vec<f64>) -> OneDSolution {
    let np = sys.size();
    let (phi, n) = u.split_at(np);
    let p1 = OneD::apply(&sys.d1, phi);
    let n1 = OneD::apply(&sys.d1, n);
    OneDSolution {
        y: cheb_nodes(np, Interval::new(0.0, 1.0)),
        phi: phi.to_vec(),
        n: n.to_vec(),
        j: -n[0] * p1[0] - n1[0],
    }
}

fn solve_from(nu_hat: f64, phi_b: f64, n_points: usize, u0: Vec<f64>) -> Result<OneDSolution> {
    let sys = OneD::new(nu_hat, phi_b, n_points);
    let opts = NewtonOptions {
        tol: 1e-10,
        max_iter: 80,
        ..Default::default()
    };
    let (u, _) = damped_newton(&sys, u0, &opts)?;
    Ok(finish(&sys, u))
}

/// Solves the 1D problem at normalized Debye length `nu_hat`.
///
/// Starts from a linear potential with unit density; if that fails, walks
/// `nu_hat` down from 1 with warm starts.
pub fn solve_1d(nu_hat: f64, phi_b: f64, n_points: usize) -> Result<OneDSolution> {
    if !(nu_hat > 0.0 && phi_b > 0.0) {
        return Err(Error::Domain(format!(
            "1D problem needs nu_hat > 0 and Phi > 0 (got {nu_hat}, {phi_b})"
        )));
    }
    if n_points < 3 {
        return Err(Error::Domain("1D problem needs at least 3 points".into()));
    }
    let y = cheb_nodes(n_points, Interval::new(0.0, 1.0));
    let mut u0: Vec<f64> = y.iter().map(|y| phi_b * (1.0 - y)).collect();
    u0.extend(std::iter::repeat_n(1.0, n_points));
    if let Ok(sol) = solve_from(nu_hat, phi_b, n_points, u0.clone()) {
        return Ok(sol);
    }
    if nu_hat >= 1.0 {
        return solve_from(nu_hat, phi_b, n_points, u0);
    }
    let mut current = solve_from(1.0, phi_b, n_points, u0)?;
    let mut nu = 1.0;
    let mut ratio: f64 = 0.7;
    while nu > nu_hat {
        let next = (nu * ratio).max(nu_hat);
        let mut guess = current.phi.clone();
        guess.extend_from_slice(&current.n);
        match solve_from(next, phi_b, n_points, guess) {
            Ok(sol) => {
                current = sol;
                nu = next;
                ratio = (ratio * ratio).max(0.5);
            }
            Err(e) => {
                ratio = ratio.sqrt();
                if ratio > 0.999 {
                    return Err(e);
                }
            }
        }
    }
    Ok(current)
}

/// Chebyshev point count that resolves the Debye layers at `nu_hat`
/// (layer width scales like `nu_hat`, edge spacing like `1/N^2`).
pub fn recommended_points(nu_hat: f64) -> usize {
    ((18.0 / nu_hat.sqrt()).ceil() as usize).clamp(48, 256)
}

/// Memoized `j1D(nu_hat, Phi)`, solved at no fewer than `n_points` points
/// and no fewer than [`recommended_points`].
#[derive(Debug)]
pub struct J1dCache {
    n_points: usize,
    table: Mutex<HashMap<(i64, u64), f64>>,
}

impl J1dCache {
    pub fn new(n_points: usize) -> Self {
        Self {
            n_points,
            table: Mutex::new(HashMap::new()),
        }
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn get(&self, nu_hat: f64, phi_b: f64) -> Result<f64> {
        // nu_hat rounded to 1e-12 relative (log scale) so that nearby
        // quadrature nodes share entries only when numerically identical.
        let key = ((nu_hat.ln() * 1e12).round() as i64, phi_b.to_bits());
        if let Some(v) = self.table.lock().expect("j1d cache poisoned").get(&key) {
            return Ok(*v);
        }
        let j = solve_1d(nu_hat, phi_b, self.n_points.max(recommended_points(nu_hat)))?.j;
        self.table.lock().expect("j1d cache poisoned").insert(key, j);
        Ok(j)
    }

    pub fn len(&self) -> usize {
        self.table.lock().expect("j1d cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `j1D(nu_hat, Phi)` at fixed `Phi`, tabulated on Chebyshev points in
/// `log nu_hat` over `[NU_LO, NU_HI]`.
///
/// Outside the table the two limits are used: below `NU_LO` space-charge
/// limited flow with `j ∝ nu_hat^2`, above `NU_HI` the resistor limit with a
/// deficit `Phi - j ∝ nu_hat^-2`.
#[derive(Debug, Clone)]
pub struct J1dTable {
    phi_b: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl J1dTable {
    pub const NU_LO: f64 = 0.01;
    pub const NU_HI: f64 = 1000.0;

    pub fn new(phi_b: f64, n_nodes: usize) -> Result<Self> {
        let iv = Interval::new(Self::NU_LO.ln(), Self::NU_HI.ln());
        let nodes = cheb_nodes(n_nodes, iv);
        let values = nodes
            .iter()
            .map(|s| {
                let nu = s.exp();
                solve_1d(nu, phi_b, recommended_points(nu)).map(|sol| sol.j)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { phi_b, nodes, values })
    }

    pub fn phi(&self) -> f64 {
        self.phi_b
    }

    pub fn get(&self, nu_hat: f64) -> f64 {
        let n = self.values.len();
        if nu_hat <= Self::NU_LO {
            self.values[0] * (nu_hat / Self::NU_LO).powi(2)
        } else if nu_hat >= Self::NU_HI {
            self.phi_b - (self.phi_b - self.values[n - 1]) * (Self::NU_HI / nu_hat).powi(2)
        } else {
            crate::spectral::barycentric_eval_nodes(&self.values, &self.nodes, nu_hat.ln())
        }
    }
}
