//! Damped Newton iteration on a dense Jacobian.

use faer::prelude::*;
use faer::Mat;

use crate::error::{Error, Result};
use crate::spectral::Matrix;

/// A square nonlinear system `R(u) = 0`.
pub trait NonlinearSystem {
    fn residual(&self, u: &[f64]) -> Result<Vec<f64>>;
    fn jacobian(&self, u: &[f64]) -> Result<Matrix>;
    /// Whether a trial iterate is admissible (positive density).
    fn admissible(&self, _u: &[f64]) -> bool {
        true
    }
}

/// Line-search and stopping controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub gamma_init: f64,
    pub shrink: f64,
    pub gamma_min: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 60,
            gamma_init: 1.0,
            shrink: 0.5,
            gamma_min: 1.0 / 1024.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct NewtonRecord {
    pub update_norm: f64,
    pub gamma: f64,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct NewtonHistory {
    pub records: Vec<NewtonRecord>,
}

impl NewtonHistory {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> Option<&NewtonRecord> {
        self.records.last()
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn dense_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
    let x = a.partial_piv_lu().solve(&rhs);
    let out: Vec<f64> = (0..b.len()).map(|i| x[(i, 0)]).collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Runs damped Newton from `u0`.
///
/// Each step solves `J u_k = -R` and backtracks `gamma = 1, 1/2, ...` until
/// the residual 2-norm decreases with an admissible iterate. When no such
/// `gamma` exists above `gamma_min`, the smallest admissible trial is taken.
/// The iteration stops once the sup-norm of the full update `u_k` is below
/// `tol`; that final update is applied undamped.
pub fn damped_newton<S: NonlinearSystem + ?Sized>(
    system: &S,
    u0: Vec<f64>,
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, NewtonHistory)> {
    let mut u = u0;
    let mut r = system.residual(&u)?;
    let mut rn = norm2(&r);
    let mut history = NewtonHistory::default();
    let mut last_update = f64::INFINITY;
    for iteration in 1..=opts.max_iter {
        let jac = system.jacobian(&u)?;
        let neg: Vec<f64> = r.iter().map(|x| -x).collect();
        let du = dense_solve(&jac, &neg).ok_or(Error::SingularJacobian { iteration })?;
        let update_norm = sup_norm(&du);
        last_update = update_norm;
        if update_norm < opts.tol {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + b).collect();
            if system.admissible(&trial) {
                u = trial;
                r = system.residual(&u)?;
            }
            history.records.push(NewtonRecord {
                update_norm,
                gamma: 1.0,
                residual_norm: norm2(&r),
            });
            log::debug!("newton converged in {iteration} iterations, |u_k| = {update_norm:.3e}");
            return Ok((u, history));
        }
        let mut gamma = opts.gamma_init;
        let mut accepted = None;
        let mut fallback = None;
        while gamma >= opts.gamma_min {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + gamma * b).collect();
            if system.admissible(&trial) {
                let rt = system.residual(&trial)?;
                let rtn = norm2(&rt);
                if rtn.is_finite() {
                    if rtn < rn {
                        accepted = Some((gamma, trial, rt, rtn));
                        break;
                    }
                    fallback = Some((gamma, trial, rt, rtn));
                }
            }
            gamma *= opts.shrink;
        }
        let (gamma, trial, rt, rtn) = match accepted.or(fallback) {
            Some(step) => step,
            None => return Err(Error::NegativeDensity { iteration }),
        };
        log::trace!("newton {iteration}: |u_k| = {update_norm:.3e}, gamma = {gamma}, |R| = {rtn:.3e}");
        u = trial;
        r = rt;
        rn = rtn;
        history.records.push(NewtonRecord {
            update_norm,
            gamma,
            residual_norm: rn,
        });
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        update_norm: last_update,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// x^2 = 2, y^3 = x + 1 with positivity of x.
    struct Toy;

    impl NonlinearSystem for Toy {
        fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![u[0] * u[0] - 2.0, u[1].powi(3) - u[0] - 1.0])
        }
        fn jacobian(&self, u: &[f64]) -> Result<Matrix> {
            let mut j = Matrix::zeros(2, 2);
            j[(0, 0)] = 2.0 * u[0];
            j[(1, 0)] = -1.0;
            j[(1, 1)] = 3.0 * u[1] * u[1];
            Ok(j)
        }
        fn admissible(&self, u: &[f64]) -> bool {
            u[0] > 0.0
        }
    }

    #[test]
    fn converges_on_toy_system() {
        let (u, h) = damped_newton(&Toy, vec![10.0, 5.0], &NewtonOptions::default()).unwrap();
        assert!((u[0] - 2f64.sqrt()).abs() < 1e-10);
        assert!((u[1] - (2f64.sqrt() + 1.0).cbrt()).abs() < 1e-10);
        let n = h.records.len();
        assert!(n >= 3);
        let tail: Vec<f64> = h.records[n - 3..].iter().map(|r| r.update_norm).collect();
        assert!(tail[0] > tail[1] && tail[1] > tail[2]);
    }

    #[test]
    fn exact_start_takes_one_iteration() {
        let x = 2f64.sqrt();
        let (_, h) = damped_newton(&Toy, vec![x, (x + 1.0).cbrt()], &NewtonOptions::default()).unwrap();
        assert_eq!(h.iterations(), 1);
        assert_eq!(h.records[0].gamma, 1.0);
    }

    #[test]
    fn reports_singular_and_nonconvergent() {
        let err = damped_newton(&Toy, vec![0.0, 0.0], &NewtonOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SingularJacobian { iteration: 1 }));
        let opts = NewtonOptions {
            max_iter: 2,
            ..Default::default()
        };
        let err = damped_newton(&Toy, vec![100.0, 50.0], &opts).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 2, .. }));
    }

    #[test]
    fn dense_solve_matches() {
        let mut a = Matrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = if i == j { 4.0 } else { 1.0 / (1.0 + i as f64 + j as f64) };
            }
        }
        let b = [1.0, -2.0, 0.5];
        let x = dense_solve(&a, &b).unwrap();
        for i in 0..3 {
            let s: f64 = (0..3).map(|j| a[(i, j)] * x[j]).sum();
            assert!((s - b[i]).abs() < 1e-14);
        }
    }
}
