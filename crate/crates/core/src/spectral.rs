//! Tensor-grid collocation: Fourier points in the periodic direction,
//! Chebyshev points in the other, and the matrices and interpolants that
//! act on them.
//!
//! Chebyshev points are ordered ascending in the physical coordinate, so
//! index 0 is the lower boundary. A 2D field is flattened with the periodic
//! index major: node `(i, j)` lives at `i * n_cheb + j`.

use std::f64::consts::PI;

use faer::Mat;

use crate::error::{Error, Result};

pub type Matrix = Mat<f64>;

/// Closed interval `[lo, hi]` (or half-open period `[lo, hi)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Equispaced nodes `lo + j (hi - lo) / n`, `j = 0..n`.
pub fn fourier_nodes(n: usize, interval: Interval) -> Vec<f64> {
    let h = interval.length() / n as f64;
    (0..n).map(|j| interval.lo + j as f64 * h).collect()
}

/// Chebyshev–Gauss–Lobatto nodes, ascending.
pub fn cheb_nodes(n: usize, interval: Interval) -> Vec<f64> {
    let half = 0.5 * interval.length();
    let deg = (n - 1) as f64;
    (0..n)
        .map(|j| {
            if j == 0 {
                interval.lo
            } else if j == n - 1 {
                interval.hi
            } else {
                // -cos(j pi / deg) written as sin to keep symmetry exact.
                let t = (PI * (2.0 * j as f64 - deg) / (2.0 * deg)).sin();
                interval.lo + half * (1.0 + t)
            }
        })
        .collect()
}

/// Fourier differentiation matrix of order 1 or 2 on `n` equispaced points
/// covering one period.
pub fn fourier_diff_matrix(n: usize, order: usize, period: f64) -> Matrix {
    assert!(n >= 4 && n.is_multiple_of(2), "Fourier grid needs an even count >= 4");
    let h = 2.0 * PI / n as f64;
    let scale = 2.0 * PI / period;
    let mut d = Matrix::zeros(n, n);
    match order {
        1 => {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let k = i as isize - j as isize;
                        let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                        d[(i, j)] = 0.5 * sign / (0.5 * k as f64 * h).tan() * scale;
                    }
                }
            }
        }
        2 => {
            let diag = (-PI * PI / (3.0 * h * h) - 1.0 / 6.0) * scale * scale;
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        d[(i, j)] = diag;
                    } else {
                        let k = i as isize - j as isize;
                        let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                        let s = (0.5 * k as f64 * h).sin();
                        d[(i, j)] = -0.5 * sign / (s * s) * scale * scale;
                    }
                }
            }
        }
        _ => panic!("only first and second derivatives are supported"),
    }
    d
}

/// Chebyshev differentiation matrix of order 1 or 2 on `n` ascending
/// Chebyshev points of `interval`.
pub fn cheb_diff_matrix(n: usize, order: usize, interval: Interval) -> Matrix {
    assert!(n >= 3, "Chebyshev grid needs at least 3 points");
    let deg = (n - 1) as f64;
    let weight = |j: usize| {
        let s = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
        if j == 0 || j == n - 1 {
            0.5 * s
        } else {
            s
        }
    };
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                // t_i - t_j for t_k = -cos(k pi / deg), via a product of sines.
                let a = (i + j) as f64 * PI / (2.0 * deg);
                let b = (j as f64 - i as f64) * PI / (2.0 * deg);
                let diff = -2.0 * a.sin() * b.sin();
                let v = weight(j) / weight(i) / diff;
                d[(i, j)] = v;
                row_sum += v;
            }
        }
        d[(i, i)] = -row_sum;
    }
    let scale = 2.0 / interval.length();
    match order {
        1 => d * faer::Scale(scale),
        2 => {
            let mut d2 = &d * &d;
            for i in 0..n {
                let off: f64 = (0..n).filter(|&j| j != i).map(|j| d2[(i, j)]).sum();
                d2[(i, i)] = -off;
            }
            d2 * faer::Scale(scale * scale)
        }
        _ => panic!("only first and second derivatives are supported"),
    }
}

/// Clenshaw–Curtis weights for the ascending Chebyshev points of `interval`.
pub fn clenshaw_curtis_weights(n: usize, interval: Interval) -> Vec<f64> {
    let deg = n - 1;
    let nd = deg as f64;
    let mut w = vec![0.0; n];
    let mut v = vec![1.0; n.saturating_sub(2)];
    if deg.is_multiple_of(2) {
        w[0] = 1.0 / (nd * nd - 1.0);
        w[deg] = w[0];
        for (idx, vi) in v.iter_mut().enumerate() {
            let theta = (idx + 1) as f64 * PI / nd;
            for k in 1..deg / 2 {
                let kf = k as f64;
                *vi -= 2.0 * (2.0 * kf * theta).cos() / (4.0 * kf * kf - 1.0);
            }
            *vi -= (nd * theta).cos() / (nd * nd - 1.0);
        }
    } else {
        w[0] = 1.0 / (nd * nd);
        w[deg] = w[0];
        for (idx, vi) in v.iter_mut().enumerate() {
            let theta = (idx + 1) as f64 * PI / nd;
            for k in 1..=(deg - 1) / 2 {
                let kf = k as f64;
                *vi -= 2.0 * (2.0 * kf * theta).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for (idx, vi) in v.iter().enumerate() {
        w[idx + 1] = 2.0 * vi / nd;
    }
    let half = 0.5 * interval.length();
    w.iter().map(|x| x * half).collect()
}

/// Tensor-product collocation grid.
#[derive(Debug, Clone)]
pub struct Grid2D {
    pub n_periodic: usize,
    pub n_cheb: usize,
    pub periodic_interval: Interval,
    pub cheb_interval: Interval,
    pub periodic_nodes: Vec<f64>,
    pub cheb_nodes: Vec<f64>,
    pub dp1: Matrix,
    pub dp2: Matrix,
    pub dc1: Matrix,
    pub dc2: Matrix,
}

impl Grid2D {
    pub fn new(n_periodic: usize, n_cheb: usize, periodic_interval: Interval, cheb_interval: Interval) -> Result<Self> {
        if n_periodic < 4 || !n_periodic.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "periodic point count must be even and >= 4, got {n_periodic}"
            )));
        }
        if n_cheb < 3 {
            return Err(Error::Domain(format!("Chebyshev point count must be >= 3, got {n_cheb}")));
        }
        if !(periodic_interval.length() > 0.0 && cheb_interval.length() > 0.0) {
            return Err(Error::Domain("grid intervals must have positive length".into()));
        }
        let period = periodic_interval.length();
        Ok(Self {
            n_periodic,
            n_cheb,
            periodic_interval,
            cheb_interval,
            periodic_nodes: fourier_nodes(n_periodic, periodic_interval),
            cheb_nodes: cheb_nodes(n_cheb, cheb_interval),
            dp1: fourier_diff_matrix(n_periodic, 1, period),
            dp2: fourier_diff_matrix(n_periodic, 2, period),
            dc1: cheb_diff_matrix(n_cheb, 1, cheb_interval),
            dc2: cheb_diff_matrix(n_cheb, 2, cheb_interval),
        })
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.n_periodic * self.n_cheb
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i_periodic: usize, j_cheb: usize) -> usize {
        i_periodic * self.n_cheb + j_cheb
    }

    /// Applies a periodic-direction matrix along every Chebyshev level.
    pub fn apply_periodic(&self, d: &Matrix, u: &[f64]) -> Vec<f64> {
        let (np, nc) = (self.n_periodic, self.n_cheb);
        let mut out = vec![0.0; np * nc];
        for i in 0..np {
            for ip in 0..np {
                let a = d[(i, ip)];
                if a == 0.0 {
                    continue;
                }
                let src = &u[ip * nc..(ip + 1) * nc];
                let dst = &mut out[i * nc..(i + 1) * nc];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += a * s;
                }
            }
        }
        out
    }

    /// Applies a Chebyshev-direction matrix along every periodic column.
    pub fn apply_cheb(&self, d: &Matrix, u: &[f64]) -> Vec<f64> {
        let nc = self.n_cheb;
        let mut out = vec![0.0; u.len()];
        for (src, dst) in u.chunks(nc).zip(out.chunks_mut(nc)) {
            for (j, o) in dst.iter_mut().enumerate() {
                *o = (0..nc).map(|jp| d[(j, jp)] * src[jp]).sum();
            }
        }
        out
    }

    /// Column `j` of the field: values at Chebyshev level `j` for all
    /// periodic nodes.
    pub fn level(&self, u: &[f64], j: usize) -> Vec<f64> {
        (0..self.n_periodic).map(|i| u[self.index(i, j)]).collect()
    }
}

/// Quadrature weights in both directions: uniform trapezoid weights for the
/// periodic direction and Clenshaw–Curtis weights for the Chebyshev one.
pub fn quad_weights(grid: &Grid2D) -> (Vec<f64>, Vec<f64>) {
    let h = grid.periodic_interval.length() / grid.n_periodic as f64;
    (
        vec![h; grid.n_periodic],
        clenshaw_curtis_weights(grid.n_cheb, grid.cheb_interval),
    )
}

/// Real trigonometric interpolant of equispaced samples over one period.
#[derive(Debug, Clone)]
pub struct TrigSeries {
    lo: f64,
    period: f64,
    mean: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
    nyquist: f64,
    n: usize,
}

impl TrigSeries {
    pub fn new(values: &[f64], interval: Interval) -> Self {
        let n = values.len();
        assert!(n >= 2 && n.is_multiple_of(2), "trigonometric interpolation needs an even sample count");
        let half = n / 2;
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let mut cos = vec![0.0; half.saturating_sub(1)];
        let mut sin = vec![0.0; half.saturating_sub(1)];
        for k in 1..half {
            let (mut a, mut b) = (0.0, 0.0);
            for (j, v) in values.iter().enumerate() {
                let theta = 2.0 * PI * ((k * j) % n) as f64 / nf;
                a += v * theta.cos();
                b += v * theta.sin();
            }
            cos[k - 1] = 2.0 * a / nf;
            sin[k - 1] = 2.0 * b / nf;
        }
        let nyquist = values
            .iter()
            .enumerate()
            .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
            .sum::<f64>()
            / nf;
        Self {
            lo: interval.lo,
            period: interval.length(),
            mean,
            cos,
            sin,
            nyquist,
            n,
        }
    }

    fn theta(&self, x: f64) -> f64 {
        2.0 * PI * (x - self.lo) / self.period
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = self.theta(x);
        let mut s = self.mean;
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let (sk, ck) = (((k + 1) as f64) * t).sin_cos();
            s += a * ck + b * sk;
        }
        s + self.nyquist * (0.5 * self.n as f64 * t).cos()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let t = self.theta(x);
        let w = 2.0 * PI / self.period;
        let mut s = 0.0;
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let kf = (k + 1) as f64;
            let (sk, ck) = (kf * t).sin_cos();
            s += kf * (-a * sk + b * ck);
        }
        let half = 0.5 * self.n as f64;
        s -= self.nyquist * half * (half * t).sin();
        s * w
    }

    /// `∫_lo^x` of the interpolant (not periodic when the mean is nonzero).
    pub fn antiderivative(&self, x: f64) -> f64 {
        let t = self.theta(x);
        let w = self.period / (2.0 * PI);
        let mut s = self.mean * (x - self.lo);
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let kf = (k + 1) as f64;
            let (sk, ck) = (kf * t).sin_cos();
            s += w / kf * (a * sk - b * (ck - 1.0));
        }
        let half = 0.5 * self.n as f64;
        s + self.nyquist * w / half * (half * t).sin()
    }
}

/// Trigonometric interpolation of equispaced periodic samples evaluated at
/// arbitrary targets.
pub fn resample_periodic(values: &[f64], interval: Interval, targets: &[f64]) -> Vec<f64> {
    let series = TrigSeries::new(values, interval);
    targets.iter().map(|&x| series.eval(x)).collect()
}

/// Barycentric Lagrange interpolation through values on the ascending
/// Chebyshev points of `interval`.
pub fn barycentric_eval(values: &[f64], interval: Interval, x: f64) -> Result<f64> {
    let slack = 1e-12 * interval.length().abs().max(1.0);
    if x < interval.lo - slack || x > interval.hi + slack {
        return Err(Error::Domain(format!(
            "x = {x} outside interpolation interval [{}, {}]",
            interval.lo, interval.hi
        )));
    }
    Ok(barycentric_eval_nodes(values, &cheb_nodes(values.len(), interval), x))
}

/// Barycentric evaluation with precomputed Chebyshev nodes (no range check).
pub fn barycentric_eval_nodes(values: &[f64], nodes: &[f64], x: f64) -> f64 {
    let n = values.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..n {
        let diff = x - nodes[j];
        if diff == 0.0 {
            return values[j];
        }
        let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == 0 || j == n - 1 {
            w *= 0.5;
        }
        let t = w / diff;
        num += t * values[j];
        den += t;
    }
    num / den
}

/// Chebyshev coefficients `a_k` with `f = sum a_k T_k(t)`, `t` the
/// ascending reference coordinate on `[-1, 1]`.
pub fn cheb_coefficients(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let deg = n - 1;
    let nd = deg as f64;
    let mut a = vec![0.0; n];
    for (k, ak) in a.iter_mut().enumerate() {
        let mut s = 0.0;
        for (j, v) in values.iter().enumerate() {
            let mut term = v * (PI * ((k * j) % (2 * deg)) as f64 / nd).cos();
            if j == 0 || j == deg {
                term *= 0.5;
            }
            s += term;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *ak = sign * 2.0 * s / nd;
    }
    a[0] *= 0.5;
    a[deg] *= 0.5;
    a
}

/// Values of `∫_lo^{x_j} f` at the ascending Chebyshev nodes.
pub fn cheb_cumulative(values: &[f64], interval: Interval) -> Vec<f64> {
    let n = values.len();
    let a = cheb_coefficients(values);
    let coef = |k: usize| if k < n { a[k] } else { 0.0 };
    let mut b = vec![0.0; n + 1];
    b[1] = coef(0) - 0.5 * coef(2);
    for k in 2..=n {
        b[k] = (coef(k - 1) - coef(k + 1)) / (2.0 * k as f64);
    }
    let eval = |t: f64| -> f64 {
        let theta = t.clamp(-1.0, 1.0).acos();
        b.iter().enumerate().map(|(k, bk)| bk * (k as f64 * theta).cos()).sum()
    };
    let base = eval(-1.0);
    let half = 0.5 * interval.length();
    let deg = (n - 1) as f64;
    (0..n)
        .map(|j| {
            let t = -(PI * j as f64 / deg).cos();
            (eval(t) - base) * half
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(d: &Matrix, u: &[f64]) -> Vec<f64> {
        (0..d.nrows()).map(|i| (0..d.ncols()).map(|j| d[(i, j)] * u[j]).sum()).collect()
    }

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn fourier_matrices() {
        let period = 3.0;
        let n = 16;
        let x = fourier_nodes(n, Interval::new(-1.5, 1.5));
        let w = 2.0 * PI / period;
        let d1 = fourier_diff_matrix(n, 1, period);
        let d2 = fourier_diff_matrix(n, 2, period);
        assert!(matvec(&d1, &vec![1.0; n]).iter().all(|v| v.abs() < 1e-12));
        let u: Vec<f64> = x.iter().map(|x| (w * x).sin()).collect();
        let du: Vec<f64> = x.iter().map(|x| w * (w * x).cos()).collect();
        let ddu: Vec<f64> = x.iter().map(|x| -w * w * (w * x).sin()).collect();
        assert!(max_err(&matvec(&d1, &u), &du) < 1e-12);
        assert!(max_err(&matvec(&d2, &u), &ddu) < 1e-10);
        for i in 0..n {
            for j in 0..n {
                assert!((d1[(i, j)] + d1[(j, i)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn chebyshev_matrices() {
        let iv = Interval::new(-1.0, 1.0);
        let n = 12;
        let x = cheb_nodes(n, iv);
        assert!(x.windows(2).all(|w| w[0] < w[1]));
        let d1 = cheb_diff_matrix(n, 1, iv);
        let d2 = cheb_diff_matrix(n, 2, iv);
        for i in 0..n {
            let s: f64 = (0..n).map(|j| d1[(i, j)]).sum();
            assert!(s.abs() < 1e-12);
        }
        let u: Vec<f64> = x.iter().map(|x| x.powi(3)).collect();
        let du: Vec<f64> = x.iter().map(|x| 3.0 * x * x).collect();
        let ddu: Vec<f64> = x.iter().map(|x| 6.0 * x).collect();
        assert!(max_err(&matvec(&d1, &u), &du) < 1e-12);
        assert!(max_err(&matvec(&d2, &u), &ddu) < 1e-10);

        let d1s = cheb_diff_matrix(n, 1, Interval::new(0.0, 2.0));
        for i in 0..n {
            for j in 0..n {
                assert!((d1s[(i, j)] - d1[(i, j)]).abs() < 1e-12);
            }
        }
        let d1s = cheb_diff_matrix(n, 1, Interval::new(0.0, 4.0));
        for i in 0..n {
            for j in 0..n {
                assert!((2.0 * d1s[(i, j)] - d1[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_convergence_of_differentiation() {
        // e^{sin x} on a period: errors fall faster than any fixed power.
        let errs: Vec<f64> = [8usize, 16, 32]
            .iter()
            .map(|&n| {
                let x = fourier_nodes(n, Interval::new(0.0, 2.0 * PI));
                let u: Vec<f64> = x.iter().map(|x| x.sin().exp()).collect();
                let du: Vec<f64> = x.iter().map(|x| x.cos() * x.sin().exp()).collect();
                max_err(&matvec(&fourier_diff_matrix(n, 1, 2.0 * PI), &u), &du)
            })
            .collect();
        assert!(errs[1] < errs[0] * 1e-3);
        assert!(errs[2] < 1e-12);
        let errs: Vec<f64> = [8usize, 16, 32]
            .iter()
            .map(|&n| {
                let iv = Interval::new(-1.0, 1.0);
                let x = cheb_nodes(n, iv);
                let u: Vec<f64> = x.iter().map(|x| x.sin().exp()).collect();
                let du: Vec<f64> = x.iter().map(|x| x.cos() * x.sin().exp()).collect();
                max_err(&matvec(&cheb_diff_matrix(n, 1, iv), &u), &du)
            })
            .collect();
        assert!(errs[1] < errs[0] * 1e-4, "{errs:?}");
        assert!(errs[2] < 1e-12, "{errs:?}");
    }

    #[test]
    fn quadrature() {
        let l = 7.0;
        let grid = Grid2D::new(16, 9, Interval::new(-3.5, 3.5), Interval::new(-1.0, 1.0)).unwrap();
        let (wp, wc) = quad_weights(&grid);
        assert!((wp.iter().sum::<f64>() - l).abs() < 1e-14);
        let s: f64 = grid
            .periodic_nodes
            .iter()
            .zip(&wp)
            .map(|(x, w)| w * (2.0 * PI * x / l).sin().powi(2))
            .sum();
        assert!((s - l / 2.0).abs() < 1e-12);
        assert!((wc.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let s: f64 = grid.cheb_nodes.iter().zip(&wc).map(|(x, w)| w * x * x).sum();
        assert!((s - 2.0 / 3.0).abs() < 1e-14);
        let w = clenshaw_curtis_weights(10, Interval::new(0.0, 3.0));
        assert!((w.iter().sum::<f64>() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn integral_of_derivative() {
        let iv = Interval::new(0.5, 2.0);
        let n = 24;
        let x = cheb_nodes(n, iv);
        let u: Vec<f64> = x.iter().map(|x| (2.0 * x).cos() * x.exp()).collect();
        let du = matvec(&cheb_diff_matrix(n, 1, iv), &u);
        let w = clenshaw_curtis_weights(n, iv);
        let s: f64 = du.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!((s - (u[n - 1] - u[0])).abs() < 1e-10);
        let c = cheb_cumulative(&du, iv);
        for j in 0..n {
            assert!((c[j] - (u[j] - u[0])).abs() < 1e-10);
        }
    }

    #[test]
    fn periodic_resampling() {
        let iv = Interval::new(-2.0, 3.0);
        let l = iv.length();
        let x = fourier_nodes(12, iv);
        let c = resample_periodic(&[2.5; 12], iv, &[0.1, 1.7, -1.9]);
        assert!(c.iter().all(|v| (v - 2.5).abs() < 1e-14));
        let u: Vec<f64> = x.iter().map(|x| (2.0 * PI * x / l).sin()).collect();
        let targets = [0.123, -1.77, 2.9, 0.0];
        let r = resample_periodic(&u, iv, &targets);
        for (t, v) in targets.iter().zip(&r) {
            assert!((v - (2.0 * PI * t / l).sin()).abs() < 1e-12);
        }
        let back = resample_periodic(&u, iv, &x);
        assert!(max_err(&back, &u) < 1e-13);

        // periodic -> Chebyshev -> back to periodic nodes.
        let civ = Interval::new(-1.0, 2.0);
        let band: Vec<f64> = x
            .iter()
            .map(|x| 1.0 + (2.0 * PI * x / l).cos() + 0.3 * (4.0 * PI * x / l).sin())
            .collect();
        let cx = cheb_nodes(40, civ);
        let on_cheb = resample_periodic(&band, iv, &cx);
        for (i, &xi) in x.iter().enumerate() {
            if xi >= civ.lo && xi <= civ.hi {
                let v = barycentric_eval(&on_cheb, civ, xi).unwrap();
                assert!((v - band[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn trig_antiderivative() {
        let iv = Interval::new(0.0, 4.0);
        let x = fourier_nodes(16, iv);
        let w = 2.0 * PI / 4.0;
        let u: Vec<f64> = x.iter().map(|x| 0.7 + (w * x).cos() + 0.5 * (2.0 * w * x).sin()).collect();
        let s = TrigSeries::new(&u, iv);
        for &t in &[0.3, 1.9, 3.7, 4.0] {
            let exact = 0.7 * t + (w * t).sin() / w - 0.5 * ((2.0 * w * t).cos() - 1.0) / (2.0 * w);
            assert!((s.antiderivative(t) - exact).abs() < 1e-13);
            let dexact = -w * (w * t).sin() + w * (2.0 * w * t).cos();
            assert!((s.derivative(t) - dexact).abs() < 1e-12);
        }
    }

    #[test]
    fn barycentric() {
        let iv = Interval::new(-1.0, 1.0);
        let n = 9;
        let x = cheb_nodes(n, iv);
        let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x.powi(3) - x.powi(5);
        let v: Vec<f64> = x.iter().map(|&x| p(x)).collect();
        assert_eq!(barycentric_eval(&v, iv, x[3]).unwrap(), v[3]);
        for &t in &[-0.93, -0.2, 0.41, 0.999] {
            assert!((barycentric_eval(&v, iv, t).unwrap() - p(t)).abs() < 1e-13);
        }
        assert!(barycentric_eval(&v, iv, 1.2).is_err());

        let runge = |x: f64| 1.0 / (1.0 + 25.0 * x * x);
        let n = 128;
        let x = cheb_nodes(n, iv);
        let v: Vec<f64> = x.iter().map(|&x| runge(x)).collect();
        let err = (0..2001)
            .map(|k| -1.0 + k as f64 / 1000.0)
            .map(|t| (barycentric_eval(&v, iv, t).unwrap() - runge(t)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn flattening_convention() {
        let g = Grid2D::new(4, 5, Interval::new(0.0, 1.0), Interval::new(0.0, 1.0)).unwrap();
        assert_eq!(g.index(0, 0), 0);
        assert_eq!(g.index(0, 4), 4);
        assert_eq!(g.index(1, 0), 5);
        assert_eq!(g.index(3, 4), 19);
        assert!(Grid2D::new(5, 5, Interval::new(0.0, 1.0), Interval::new(0.0, 1.0)).is_err());
        assert!(Grid2D::new(4, 2, Interval::new(0.0, 1.0), Interval::new(0.0, 1.0)).is_err());
    }
}
