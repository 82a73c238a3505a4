//! Convergence studies and the reference tables they are checked against.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Direction, Formulation};
use crate::error::Result;
use crate::geometry::{with_unit_mean, Domain};
use crate::hodograph::{extract_hodograph_inputs, solve_hodograph, HodographProblem, SurfaceFunction};
use crate::pnp_core::{NewtonOptions, SolverParams};
use crate::postproc::{average_current_density, ConformalSolution};

/// `(N, Q^N, |Q^{N+4} - Q^N|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub q: f64,
    pub dq: f64,
}

fn counts_with_step(counts: &[usize]) -> Vec<usize> {
    let mut all: Vec<usize> = counts.iter().flat_map(|&n| [n, n + 4]).collect();
    all.sort_unstable();
    all.dedup();
    all
}

fn rows(counts: &[usize], q: &BTreeMap<usize, f64>) -> Vec<ConvergenceRow> {
    counts
        .iter()
        .map(|&n| ConvergenceRow {
            n,
            q: q[&n],
            dq: (q[&(n + 4)] - q[&n]).abs(),
        })
        .collect()
}

/// `Q` as one grid direction is refined with the other fixed at `fixed`.
pub fn conformal_convergence(
    domain: &Domain,
    solver: SolverParams,
    fixed: usize,
    vary: Direction,
    counts: &[usize],
) -> Result<Vec<ConvergenceRow>> {
    let all = counts_with_step(counts);
    let qs: Vec<Result<(usize, f64)>> = all
        .par_iter()
        .map(|&n| {
            let (nx, ne) = match vary {
                Direction::Periodic => (n, fixed),
                Direction::Cheb => (fixed, n),
            };
            let sol = ConformalSolution::solve(*domain, nx, ne, solver)?;
            Ok((n, average_current_density(&sol)))
        })
        .collect();
    let q = qs.into_iter().collect::<Result<BTreeMap<_, _>>>()?;
    Ok(rows(counts, &q))
}

pub fn hodograph_convergence(
    prob: &HodographProblem,
    opts: &NewtonOptions,
    fixed: usize,
    vary: Direction,
    counts: &[usize],
) -> Result<Vec<ConvergenceRow>> {
    let all = counts_with_step(counts);
    let qs: Vec<Result<(usize, f64)>> = all
        .par_iter()
        .map(|&n| {
            let (n_psi, n_v) = match vary {
                Direction::Periodic => (n, fixed),
                Direction::Cheb => (fixed, n),
            };
            let sol = solve_hodograph(prob, n_v, n_psi, opts)?;
            Ok((n, sol.average_current_density()))
        })
        .collect();
    let q = qs.into_iter().collect::<Result<BTreeMap<_, _>>>()?;
    Ok(rows(counts, &q))
}

/// Published convergence table: `(N, Q, dQ)` rows at a fixed count in the
/// other direction.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReferenceTable {
    pub name: &'static str,
    pub formulation: Formulation,
    pub vary: Direction,
    pub fixed: usize,
    pub rows: &'static [(usize, f64, f64)],
}

pub const REFERENCE_TABLES: [ReferenceTable; 4] = [
    ReferenceTable {
        name: "conformal-xi",
        formulation: Formulation::Conformal,
        vary: Direction::Periodic,
        fixed: 31,
        rows: &[(4, 0.63598, 8.5e-5), (8, 0.63607, 5.7e-8)],
    },
    ReferenceTable {
        name: "conformal-eta",
        formulation: Formulation::Conformal,
        vary: Direction::Cheb,
        fixed: 12,
        rows: &[
            (7, 0.46937, 1.6e-1),
            (11, 0.62815, 7.6e-3),
            (15, 0.63574, 3.2e-4),
            (19, 0.63605, 1.2e-5),
            (23, 0.63607, 4.4e-7),
            (27, 0.63607, 1.5e-8),
        ],
    },
    ReferenceTable {
        name: "hodograph-v",
        formulation: Formulation::Hodograph,
        vary: Direction::Cheb,
        fixed: 32,
        rows: &[
            (17, 0.63110, 4.5e-3),
            (21, 0.63561, 4.0e-4),
            (25, 0.63600, 5.0e-5),
            (29, 0.63606, 7.0e-6),
            (33, 0.63606, 1.1e-6),
            (37, 0.63607, 2.1e-7),
            (41, 0.63607, 4.7e-8),
        ],
    },
    ReferenceTable {
        name: "hodograph-psi",
        formulation: Formulation::Hodograph,
        vary: Direction::Periodic,
        fixed: 45,
        rows: &[
            (4, 0.57976, 5.1e-2),
            (8, 0.63071, 4.8e-3),
            (12, 0.63554, 4.7e-4),
            (16, 0.63601, 4.7e-5),
            (20, 0.63606, 4.8e-6),
            (24, 0.63607, 4.8e-7),
            (28, 0.63607, 4.9e-8),
        ],
    },
];

/// Validation domain: the wedge family at `h_min = 0.4`, `beta = pi/20`
/// with unit mean thickness (`L ≈ 28.2`, `epsilon ≈ 0.57`, `eta* ≈ 0.84`).
pub fn validation_domain() -> Result<Domain> {
    Ok(Domain::Wedge(with_unit_mean(0.4, PI / 20.0)?))
}

pub const VALIDATION_NU: f64 = 0.2;
pub const VALIDATION_PHI: f64 = 1.0;
/// Conformal grid and sample count used to derive hodograph inputs.
pub const REFERENCE_GRID: (usize, usize) = (24, 41);
pub const EXTRACTION_SAMPLES: usize = 256;

/// Hodograph problem equivalent to a conformal domain, derived from a
/// converged conformal solve.
pub fn hodograph_equivalent(domain: &Domain, solver: SolverParams, grid: (usize, usize)) -> Result<HodographProblem> {
    let sol = ConformalSolution::solve(*domain, grid.0, grid.1, solver)?;
    let ex = extract_hodograph_inputs(&sol, EXTRACTION_SAMPLES)?;
    let surface: Arc<dyn SurfaceFunction> = Arc::new(ex.surface);
    HodographProblem::new(solver.phi, ex.ql, solver.nu, surface)
}

/// Outcome of comparing a reproduced table with a reference.
#[derive(Debug, Clone, Serialize)]
pub struct TableCheck {
    pub name: &'static str,
    pub rows: Vec<ConvergenceRow>,
    /// Largest `|log10(dQ / dQ_ref)|`.
    pub worst_log_ratio: f64,
    pub within_order: bool,
    /// `dQ` strictly decreasing after the first entry.
    pub monotone: bool,
}

pub fn compare(reference: &ReferenceTable, rows: Vec<ConvergenceRow>) -> TableCheck {
    let worst_log_ratio = rows
        .iter()
        .zip(reference.rows)
        .map(|(r, &(_, _, dq))| (r.dq / dq).log10().abs())
        .fold(0.0, f64::max);
    let monotone = rows.windows(2).skip(1).all(|w| w[1].dq < w[0].dq);
    TableCheck {
        name: reference.name,
        within_order: worst_log_ratio <= 1.0 && rows.iter().all(|r| r.dq > 0.0),
        worst_log_ratio,
        monotone,
        rows,
    }
}

/// Reproduces one reference table on the validation domain.
pub fn reproduce(
    reference: &ReferenceTable,
    domain: &Domain,
    solver: SolverParams,
    hodograph: Option<&HodographProblem>,
) -> Result<TableCheck> {
    let counts: Vec<usize> = reference.rows.iter().map(|r| r.0).collect();
    let rows = match reference.formulation {
        Formulation::Conformal => conformal_convergence(domain, solver, reference.fixed, reference.vary, &counts)?,
        Formulation::Hodograph => {
            let owned;
            let prob = match hodograph {
                Some(p) => p,
                None => {
                    owned = hodograph_equivalent(domain, solver, REFERENCE_GRID)?;
                    &owned
                }
            };
            hodograph_convergence(prob, &solver.newton, reference.fixed, reference.vary, &counts)?
        }
    };
    Ok(compare(reference, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_counts_are_merged() {
        assert_eq!(counts_with_step(&[4, 8]), vec![4, 8, 12]);
        assert_eq!(counts_with_step(&[7, 9]), vec![7, 9, 11, 13]);
    }

    #[test]
    fn comparison_flags() {
        let t = &REFERENCE_TABLES[0];
        let good = vec![
            ConvergenceRow { n: 4, q: 0.6, dq: 1e-4 },
            ConvergenceRow { n: 8, q: 0.6, dq: 1e-7 },
        ];
        let c = compare(t, good);
        assert!(c.within_order && c.monotone);
        assert!((c.worst_log_ratio - (1e-7f64 / 5.7e-8).log10()).abs() < 1e-12);
        let bad = vec![
            ConvergenceRow { n: 4, q: 0.6, dq: 1e-2 },
            ConvergenceRow { n: 8, q: 0.6, dq: 1e-7 },
        ];
        assert!(!compare(t, bad).within_order);
        let rows = vec![
            ConvergenceRow { n: 7, q: 0.5, dq: 1e-1 },
            ConvergenceRow { n: 11, q: 0.6, dq: 1e-3 },
            ConvergenceRow { n: 15, q: 0.6, dq: 2e-3 },
        ];
        assert!(!compare(&REFERENCE_TABLES[1], rows).monotone);
    }

    #[test]
    fn validation_domain_matches_quoted_parameters() {
        let Domain::Wedge(p) = validation_domain().unwrap() else {
            panic!("wedge expected")
        };
        assert!((p.l - 28.2).abs() < 0.05, "{}", p.l);
        assert!((p.epsilon - 0.57).abs() < 0.005, "{}", p.epsilon);
        assert!((p.eta_star - 0.84).abs() < 0.005, "{}", p.eta_star);
    }

    #[test]
    fn conformal_xi_table() {
        let solver = SolverParams {
            newton: NewtonOptions {
                tol: 1e-12,
                ..Default::default()
            },
            ..SolverParams::new(VALIDATION_NU, VALIDATION_PHI).unwrap()
        };
        let check = reproduce(&REFERENCE_TABLES[0], &validation_domain().unwrap(), solver, None).unwrap();
        assert!(check.within_order, "{check:?}");
        assert!((check.rows[1].q - 0.63607).abs() < 5e-5);
    }
}
