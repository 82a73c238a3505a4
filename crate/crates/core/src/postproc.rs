//! Physical outputs from converged fields: average current density,
//! resistance, cumulative current and electron trajectories.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::pnp_core::{
    recommended_points, residual_conformal, solve_1d, solve_conformal, solve_conformal_from, FieldState,
    NewtonHistory, SolverParams,
};
use crate::pnp_core::newton::sup_norm;
use crate::spectral::{barycentric_eval_nodes, Grid2D, TrigSeries};

/// A converged conformal-route solution.
#[derive(Debug, Clone)]
pub struct ConformalSolution {
    pub domain: Domain,
    pub solver: SolverParams,
    pub grid: Grid2D,
    pub g: Vec<f64>,
    pub state: FieldState,
    pub history: NewtonHistory,
}

impl ConformalSolution {
    pub fn solve(domain: Domain, n_xi: usize, n_eta: usize, solver: SolverParams) -> Result<Self> {
        let grid = domain.grid(n_xi, n_eta)?;
        let g = domain.metric_on_grid(&grid)?;
        let (state, history) = solve_conformal(&grid, &g, &solver)?;
        Ok(Self {
            domain,
            solver,
            grid,
            g,
            state,
            history,
        })
    }

    /// Solves on a new grid, starting from this solution interpolated onto it.
    pub fn refine(&self, n_xi: usize, n_eta: usize) -> Result<Self> {
        let grid = self.domain.grid(n_xi, n_eta)?;
        let g = self.domain.metric_on_grid(&grid)?;
        let guess = self.interpolate_onto(&grid);
        let (state, history) = solve_conformal_from(&grid, &g, &self.solver, guess)?;
        Ok(Self {
            domain: self.domain,
            solver: self.solver,
            grid,
            g,
            state,
            history,
        })
    }

    fn interpolate_onto(&self, grid: &Grid2D) -> FieldState {
        let phi = FieldInterpolant::new(&self.grid, &self.state.phi);
        let n = FieldInterpolant::new(&self.grid, &self.state.n);
        let mut out = FieldState {
            phi: vec![0.0; grid.len()],
            n: vec![0.0; grid.len()],
        };
        let top = grid.n_cheb - 1;
        for (i, &xi) in grid.periodic_nodes.iter().enumerate() {
            for (j, &eta) in grid.cheb_nodes.iter().enumerate() {
                let k = grid.index(i, j);
                out.phi[k] = if j == 0 {
                    self.solver.phi
                } else if j == top {
                    0.0
                } else {
                    phi.eval(xi, eta)
                };
                out.n[k] = if j == 0 || j == top { 1.0 } else { n.eval(xi, eta).max(1e-12) };
            }
        }
        out
    }

    /// Sup-norm of the residual at the converged state.
    pub fn residual_norm(&self) -> Result<f64> {
        Ok(sup_norm(&residual_conformal(&self.grid, &self.state, &self.g, &self.solver)?))
    }

    /// Flux components `(j_xi, j_eta)` at every node.
    pub fn flux(&self) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        let s = &self.state;
        let px = g.apply_periodic(&g.dp1, &s.phi);
        let nx = g.apply_periodic(&g.dp1, &s.n);
        let pe = g.apply_cheb(&g.dc1, &s.phi);
        let ne = g.apply_cheb(&g.dc1, &s.n);
        let jx = (0..g.len()).map(|k| -s.n[k] * px[k] - nx[k]).collect();
        let je = (0..g.len()).map(|k| -s.n[k] * pe[k] - ne[k]).collect();
        (jx, je)
    }

    fn level_flux(&self, level: usize) -> Vec<f64> {
        let (_, je) = self.flux();
        self.grid.level(&je, level)
    }

    /// Normal flux `j_eta` on the bottom boundary at the periodic nodes.
    pub fn bottom_flux(&self) -> Vec<f64> {
        self.level_flux(0)
    }
}

/// Average current density through the bottom electrode.
pub fn average_current_density(sol: &ConformalSolution) -> f64 {
    let j = sol.bottom_flux();
    j.iter().sum::<f64>() / j.len() as f64
}

/// Average current density through the top electrode; equals the bottom
/// value for a converged solution.
pub fn top_current_density(sol: &ConformalSolution) -> f64 {
    let j = sol.level_flux(sol.grid.n_cheb - 1);
    j.iter().sum::<f64>() / j.len() as f64
}

/// `R = Phi / Q`.
pub fn effective_resistance(q: f64, phi: f64) -> Result<f64> {
    if q == 0.0 {
        return Err(Error::Domain("effective resistance undefined for zero current".into()));
    }
    Ok(phi / q)
}

/// Resistance of a uniform layer of unit thickness.
pub fn block_reference(nu: f64, phi: f64) -> Result<f64> {
    let j = solve_1d(nu, phi, recommended_points(nu))?.j;
    effective_resistance(j, phi)
}

/// Cumulative bottom flux along the period.
struct BottomCurrent {
    series: TrigSeries,
    lo: f64,
    total: f64,
}

impl BottomCurrent {
    fn new(sol: &ConformalSolution) -> Self {
        let j = sol.bottom_flux();
        let series = TrigSeries::new(&j, sol.grid.periodic_interval);
        let total = series.mean() * sol.grid.periodic_interval.length();
        Self {
            series,
            lo: sol.grid.periodic_interval.lo,
            total,
        }
    }

    /// Current through `[lo, xi]`.
    fn left_of(&self, xi: f64) -> f64 {
        self.series.antiderivative(xi) - self.series.antiderivative(self.lo)
    }

    /// The `xi` through which a fraction `frac` of the current has passed.
    fn quantile(&self, frac: f64, hi: f64) -> Result<f64> {
        let target = frac * self.total;
        crate::roots::find_root(|xi| Ok(self.left_of(xi) - target), self.lo, hi, 1e-14 * (hi - self.lo), 400)
    }
}

/// Samples of the normalized cumulative current `C(x)` on `[0, L/2]`.
#[derive(Debug, Clone)]
pub struct CumulativeCurrent {
    pub x: Vec<f64>,
    pub c: Vec<f64>,
    /// `C(L/2)` before pinning to one.
    pub raw_end: f64,
}

/// `C(x) = (2 / QL) * current through [0, x]` for `n_samples` equispaced
/// points of `[0, L/2]`.
pub fn cumulative_current(sol: &ConformalSolution, n_samples: usize) -> Result<CumulativeCurrent> {
    let half = 0.5 * sol.domain.l();
    let xs: Vec<f64> = (0..n_samples).map(|i| half * i as f64 / (n_samples - 1) as f64).collect();
    let mut c = cumulative_current_at(sol, &xs)?;
    let bc = BottomCurrent::new(sol);
    let raw_end = 2.0 * (bc.left_of(half) - bc.left_of(0.0)) / bc.total;
    c[0] = 0.0;
    c[n_samples - 1] = 1.0;
    Ok(CumulativeCurrent { x: xs, c, raw_end })
}

/// `C` at arbitrary physical positions `0 <= x <= L/2` (no pinning).
pub fn cumulative_current_at(sol: &ConformalSolution, xs: &[f64]) -> Result<Vec<f64>> {
    let bc = BottomCurrent::new(sol);
    let base = bc.left_of(0.0);
    xs.iter()
        .map(|&x| {
            let xi = sol.domain.real_preimage(x)?;
            Ok(2.0 * (bc.left_of(xi) - base) / bc.total)
        })
        .collect()
}

/// Tensor interpolant: trigonometric in the periodic direction,
/// barycentric in the Chebyshev one.
pub struct FieldInterpolant {
    levels: Vec<TrigSeries>,
    nodes: Vec<f64>,
}

impl FieldInterpolant {
    pub fn new(grid: &Grid2D, u: &[f64]) -> Self {
        let levels = (0..grid.n_cheb)
            .map(|j| TrigSeries::new(&grid.level(u, j), grid.periodic_interval))
            .collect();
        Self {
            levels,
            nodes: grid.cheb_nodes.clone(),
        }
    }

    pub fn eval(&self, xi: f64, eta: f64) -> f64 {
        let lo = self.nodes[0];
        let hi = *self.nodes.last().expect("non-empty grid");
        let col: Vec<f64> = self.levels.iter().map(|s| s.eval(xi)).collect();
        barycentric_eval_nodes(&col, &self.nodes, eta.clamp(lo, hi))
    }
}

/// An electron path from the bottom to the top electrode.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub id: usize,
    /// Fraction of the period's current passing to the left of the seed.
    pub fraction: f64,
    pub zeta: Vec<Complex64>,
    pub xy: Vec<(f64, f64)>,
}

const RTOL: f64 = 1e-8;
const ATOL: f64 = 1e-10;
const MAX_STEPS: usize = 50_000;

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step of an autonomous planar system; returns the
/// fifth-order solution and the embedded error estimate.
fn dp_step<F: Fn([f64; 2]) -> [f64; 2]>(f: &F, y: [f64; 2], h: f64) -> ([f64; 2], [f64; 2]) {
    let mut k = [[0.0; 2]; 7];
    k[0] = f(y);
    for s in 1..7 {
        let mut ys = y;
        for (r, kr) in k.iter().enumerate().take(s) {
            ys[0] += h * A[s][r] * kr[0];
            ys[1] += h * A[s][r] * kr[1];
        }
        k[s] = f(ys);
    }
    let mut y5 = y;
    let mut err = [0.0; 2];
    for s in 0..7 {
        for d in 0..2 {
            y5[d] += h * B5[s] * k[s][d];
            err[d] += h * (B5[s] - B4[s]) * k[s][d];
        }
    }
    (y5, err)
}

/// Integrates `d(xi, eta)/dt = (j_xi, j_eta)` from `(xi0, 0)` until
/// `eta = top`.
fn integrate_path<F: Fn([f64; 2]) -> [f64; 2]>(f: &F, xi0: f64, top: f64) -> Result<Vec<[f64; 2]>> {
    let mut y = [xi0, 0.0];
    let mut path = vec![y];
    let v = f(y);
    let speed = v[0].hypot(v[1]).max(1e-12);
    let mut h = 1e-3 * top / speed;
    for _ in 0..MAX_STEPS {
        let (y_new, err) = dp_step(f, y, h);
        let scale = |d: usize| ATOL + RTOL * y[d].abs().max(y_new[d].abs());
        let e = (err[0] / scale(0)).abs().max((err[1] / scale(1)).abs());
        if !e.is_finite() {
            h *= 0.2;
            continue;
        }
        if e <= 1.0 {
            if y_new[1] >= top {
                // Bisect the step length so the endpoint lands on eta = top.
                let (mut lo, mut hi) = (0.0, h);
                let mut end = y_new;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let (ym, _) = dp_step(f, y, mid);
                    end = ym;
                    if (ym[1] - top).abs() < 1e-10 || hi - lo < 1e-15 * h {
                        break;
                    }
                    if ym[1] > top {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                end[1] = top;
                path.push(end);
                return Ok(path);
            }
            y = y_new;
            path.push(y);
        }
        let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Err(Error::StepFailure(format!(
        "trajectory from xi = {xi0} did not reach the top within {MAX_STEPS} steps"
    )))
}

/// Traces `seeds` trajectories starting at equal increments `k / (seeds + 1)`
/// of the cumulative bottom current, mapped to physical coordinates.
pub fn trace_trajectories(sol: &ConformalSolution, seeds: usize) -> Result<Vec<Trajectory>> {
    let (jx, je) = sol.flux();
    let fx = FieldInterpolant::new(&sol.grid, &jx);
    let fe = FieldInterpolant::new(&sol.grid, &je);
    let rhs = |y: [f64; 2]| [fx.eval(y[0], y[1]), fe.eval(y[0], y[1])];
    let bc = BottomCurrent::new(sol);
    let l = sol.domain.l();
    let top = sol.domain.eta_star();
    let hi = sol.grid.periodic_interval.hi;
    (1..=seeds)
        .map(|k| {
            let fraction = k as f64 / (seeds + 1) as f64;
            let xi0 = bc.quantile(fraction, hi)?;
            let path = integrate_path(&rhs, xi0, top)?;
            let mut zeta = Vec::with_capacity(path.len());
            let mut xy = Vec::with_capacity(path.len());
            for p in path {
                // Fold back into the fundamental period before mapping.
                let shift = ((p[0] + 0.5 * l) / l).floor() * l;
                let z = Complex64::new(p[0] - shift, p[1].clamp(0.0, top));
                let w = sol.domain.map(z)?;
                zeta.push(Complex64::new(p[0], p[1]));
                xy.push((w.re + shift, w.im));
            }
            Ok(Trajectory {
                id: k,
                fraction,
                zeta,
                xy,
            })
        })
        .collect()
}

/// Cumulative bottom current to the left of `xi`, as a fraction of the
/// period total.
pub fn cumulative_fraction(sol: &ConformalSolution, xi: f64) -> f64 {
    let bc = BottomCurrent::new(sol);
    bc.left_of(xi) / bc.total
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

/// Largest distance from a point of `a` to the polyline `b`.
pub fn polyline_deviation(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    a.iter()
        .map(|&p| {
            if b.len() == 1 {
                return (p.0 - b[0].0).hypot(p.1 - b[0].1);
            }
            b.windows(2)
                .map(|w| point_segment_distance(p, w[0], w[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Symmetric sup distance between two polylines.
pub fn polyline_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    polyline_deviation(a, b).max(polyline_deviation(b, a))
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson).
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::Domain("monotone interpolation needs matching samples (>= 2)".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("interpolation abscissae must be strictly increasing".into()));
        }
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut d = vec![0.0; n];
        d[0] = delta[0];
        d[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            d[i] = if delta[i - 1] * delta[i] <= 0.0 {
                0.0
            } else {
                0.5 * (delta[i - 1] + delta[i])
            };
        }
        for i in 0..n - 1 {
            if delta[i] == 0.0 {
                d[i] = 0.0;
                d[i + 1] = 0.0;
                continue;
            }
            let a = d[i] / delta[i];
            let b = d[i + 1] / delta[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let t = 3.0 / s.sqrt();
                d[i] = t * a * delta[i];
                d[i + 1] = t * b * delta[i];
            }
        }
        Ok(Self { x, y, d })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let t = t.clamp(self.x[0], self.x[n - 1]);
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FlatLayer;

    fn flat(nu: f64) -> ConformalSolution {
        let domain = Domain::Flat(FlatLayer { l: 4.0, thickness: 1.0 });
        ConformalSolution::solve(domain, 8, 21, SolverParams::new(nu, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn flat_layer_outputs() {
        let sol = flat(0.3);
        let q = average_current_density(&sol);
        let j = solve_1d(0.3, 1.0, 21).unwrap().j;
        assert!((q - j).abs() < 1e-10);
        assert!((top_current_density(&sol) - q).abs() < 1e-6 * q);
        let c = cumulative_current(&sol, 11).unwrap();
        for (x, c) in c.x.iter().zip(&c.c) {
            assert!((c - x / 2.0).abs() < 1e-10);
        }
        assert!((c.raw_end - 1.0).abs() < 1e-12);
        let traj = trace_trajectories(&sol, 5).unwrap();
        assert_eq!(traj.len(), 5);
        for t in &traj {
            let x0 = t.xy[0].0;
            assert!((x0 - (-2.0 + 4.0 * t.fraction)).abs() < 1e-8);
            assert!(t.xy.iter().all(|p| (p.0 - x0).abs() < 1e-8));
            assert!((t.xy.last().unwrap().1 - 1.0).abs() < 1e-12);
            assert!((cumulative_fraction(&sol, t.zeta[0].re) - t.fraction).abs() < 1e-10);
        }
    }

    #[test]
    fn resistor_limit() {
        let sol = flat(50.0);
        assert!((average_current_density(&sol) - 1.0).abs() < 1e-3);
        assert!((block_reference(1e3, 1.0).unwrap() - 1.0).abs() < 0.01);
    }

    #[test]
    fn resistance() {
        assert_eq!(effective_resistance(2.0, 2.0).unwrap(), 1.0);
        let r = effective_resistance(0.37, 1.3).unwrap();
        assert!((r * 0.37 - 1.3).abs() < 1e-15);
        assert!(effective_resistance(0.0, 1.0).is_err());
    }

    #[test]
    fn refinement_reuses_solution() {
        let sol = flat(0.3);
        let finer = sol.refine(8, 31).unwrap();
        assert!(finer.history.iterations() <= 3);
        assert!((average_current_density(&finer) - average_current_density(&sol)).abs() < 1e-9);
    }

    #[test]
    fn monotone_cubic() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![0.0, 0.1, 0.9, 0.95, 1.0];
        let m = MonotoneCubic::new(x.clone(), y.clone()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((m.eval(*a) - b).abs() < 1e-15);
        }
        let mut prev = -1.0;
        for k in 0..=400 {
            let v = m.eval(k as f64 / 100.0);
            assert!(v >= prev - 1e-15 && (0.0..=1.0).contains(&v));
            prev = v;
        }
        let lin = MonotoneCubic::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 6.0]).unwrap();
        assert!((lin.eval(2.2) - 4.4).abs() < 1e-14);
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn distances() {
        let a = [(0.0, 0.0), (0.0, 1.0)];
        let b = [(0.1, 0.0), (0.1, 1.0)];
        assert!((polyline_distance(&a, &b) - 0.1).abs() < 1e-15);
        assert_eq!(polyline_distance(&a, &a), 0.0);
    }

    #[test]
    fn dormand_prince_accuracy() {
        // Rotation field: exact solution stays on the unit circle.
        let f = |y: [f64; 2]| [-y[1], y[0]];
        let mut y = [1.0, 0.0];
        let h = 0.01;
        for _ in 0..100 {
            y = dp_step(&f, y, h).0;
        }
        assert!((y[0] - 1f64.cos()).abs() < 1e-12 && (y[1] - 1f64.sin()).abs() < 1e-12);
        // Constant upward drift reaches the top exactly.
        let g = |_: [f64; 2]| [0.0, 2.0];
        let path = integrate_path(&g, 0.3, 0.7).unwrap();
        assert_eq!(path.last().unwrap()[1], 0.7);
    }
}
