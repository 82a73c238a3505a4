//! The analytic wedge-family conformal map from the rectangle
//! `[-L/2, L/2] x [0, eta_star]` onto one period of the glass layer.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::roots::find_root;
use crate::specfun::{complete_elliptic_k, jacobi_sn_cn_dn, EllipticModulus};
use crate::spectral::{Grid2D, Interval};

/// Wedge map description. Construct with [`WedgeMapParams::new`] or
/// [`params_from_physical`]; the derived fields are kept consistent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WedgeMapParams {
    pub l: f64,
    pub epsilon: f64,
    pub eta_star: f64,
    pub m: EllipticModulus,
    pub eta_max: f64,
    /// `h_min` and `beta` from the small-epsilon relations.
    pub h_min: f64,
    pub beta: f64,
    pub b: f64,
    pub y_max: f64,
    k: f64,
    k_prime: f64,
}

impl WedgeMapParams {
    pub fn new(l: f64, epsilon: f64, eta_star: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Domain(format!("period L = {l} must be positive")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Domain(format!("map parameter epsilon = {epsilon} must be positive")));
        }
        // m = sech^2(eps/2), so 1 - m = tanh^2(eps/2) without cancellation.
        let k_prime = (0.5 * epsilon).tanh();
        let m = EllipticModulus::from_complement(k_prime * k_prime)?;
        let k = complete_elliptic_k(m);
        let eta_max = 0.5 * l * complete_elliptic_k(m.complement()) / k;
        if !(eta_star > 0.0 && eta_star < eta_max) {
            return Err(Error::Domain(format!(
                "eta_star = {eta_star} must lie in (0, eta_max = {eta_max}) for a univalent map"
            )));
        }
        let beta = 2.0 * eta_star * (8.0 / epsilon).ln() / l;
        let h_min = epsilon * l * beta.sin() / (2.0 * PI);
        let mut p = Self {
            l,
            epsilon,
            eta_star,
            m,
            eta_max,
            h_min,
            beta,
            b: 1.0 / (2.0 * beta.sin()),
            y_max: f64::NAN,
            k,
            k_prime,
        };
        p.y_max = top_surface_max(&p)?;
        Ok(p)
    }

    /// `K(m)`.
    pub fn k(&self) -> f64 {
        self.k
    }

    /// `tanh(epsilon / 2)`, the complementary modulus.
    pub fn k_prime(&self) -> f64 {
        self.k_prime
    }

    /// Thickness at the centre of the period, `Im f(i eta_star)`.
    pub fn centre_thickness(&self) -> Result<f64> {
        Ok(forward_map(Complex64::new(0.0, self.eta_star), self)?.im)
    }

    fn check_rectangle(&self, zeta: Complex64) -> Result<()> {
        let slack = 1e-9 * self.l;
        if zeta.re.abs() > 0.5 * self.l + slack || zeta.im < -slack || zeta.im > self.eta_star + slack {
            return Err(Error::Domain(format!(
                "zeta = {zeta} outside the rectangle [-{0}, {0}] x [0, {1}]",
                0.5 * self.l,
                self.eta_star
            )));
        }
        Ok(())
    }
}

/// Jacobi functions at `u = 2 K zeta / L` without the rectangle check.
fn jacobi_at(zeta: Complex64, p: &WedgeMapParams) -> Result<(Complex64, Complex64, Complex64)> {
    jacobi_sn_cn_dn(zeta * (2.0 * p.k / p.l), p.m)
}

fn map_unchecked(zeta: Complex64, p: &WedgeMapParams) -> Result<Complex64> {
    let (sn, cn, dn) = jacobi_at(zeta, p)?;
    // arcsin(w) with w = k' sn / dn equals -i log(i w + sqrt(1 - w^2)) and
    // sqrt(1 - w^2) = cn / dn on the rectangle, which avoids cancellation
    // in 1 - w^2 near the period edge.
    let arg = (cn + Complex64::i() * sn * p.k_prime) / dn;
    let z = -Complex64::i() * arg.ln() * (p.l / PI);
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Singularity(format!("map is not finite at zeta = {zeta}")));
    }
    Ok(z)
}

fn derivative_unchecked(zeta: Complex64, p: &WedgeMapParams) -> Result<Complex64> {
    let (_, _, dn) = jacobi_at(zeta, p)?;
    // Chain rule through arcsin: f' = 2 K k' / (pi dn).
    let d = Complex64::from(2.0 * p.k * p.k_prime / PI) / dn;
    if !(d.re.is_finite() && d.im.is_finite()) || d.norm() == 0.0 {
        return Err(Error::Singularity(format!("map derivative degenerates at zeta = {zeta}")));
    }
    Ok(d)
}

/// `z = f(zeta)`.
pub fn forward_map(zeta: Complex64, p: &WedgeMapParams) -> Result<Complex64> {
    p.check_rectangle(zeta)?;
    map_unchecked(zeta, p)
}

/// `f'(zeta)`.
pub fn map_derivative(zeta: Complex64, p: &WedgeMapParams) -> Result<Complex64> {
    p.check_rectangle(zeta)?;
    derivative_unchecked(zeta, p)
}

/// Metric factor `G = |f'|^2`.
pub fn map_metric(zeta: Complex64, p: &WedgeMapParams) -> Result<f64> {
    Ok(map_derivative(zeta, p)?.norm_sqr())
}

fn top_surface_max(p: &WedgeMapParams) -> Result<f64> {
    let half = 0.5 * p.l;
    let height = |xi: f64| map_unchecked(Complex64::new(xi, p.eta_star), p).map(|z| z.im);
    let n = 2048;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..=n {
        let y = height(half * i as f64 / n as f64)?;
        if y > best.1 {
            best = (i, y);
        }
    }
    // Golden-section refinement around the best sample.
    let h = half / n as f64;
    let (mut a, mut b) = ((best.0 as f64 - 1.0) * h, (best.0 as f64 + 1.0) * h);
    a = a.max(0.0);
    b = b.min(half);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (height(c)?, height(d)?);
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = height(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = height(d)?;
        }
    }
    Ok(best.1.max(fc).max(fd).max(height(half)?))
}

/// `epsilon = 2 pi h_min / (L sin beta)`.
pub fn epsilon_from_physical(h_min: f64, beta: f64, l: f64) -> f64 {
    2.0 * PI * h_min / (l * beta.sin())
}

/// Map parameters from the minimum thickness and wedge half-angle.
pub fn params_from_physical(h_min: f64, beta: f64, l: f64) -> Result<WedgeMapParams> {
    if !(h_min > 0.0) {
        return Err(Error::Domain(format!("h_min = {h_min} must be positive")));
    }
    if !(beta > 0.0 && beta < 0.5 * PI) {
        return Err(Error::Domain(format!("beta = {beta} must lie in (0, pi/2)")));
    }
    let epsilon = epsilon_from_physical(h_min, beta, l);
    if !(epsilon < 8.0) {
        return Err(Error::Domain(format!("epsilon = {epsilon} too large for the wedge relations")));
    }
    let eta_star = beta * l / (2.0 * (8.0 / epsilon).ln());
    WedgeMapParams::new(l, epsilon, eta_star)
}

fn area_with(p: &WedgeMapParams, eta: f64) -> Result<f64> {
    // Area = integral of y dx along the top curve. The integrand y(xi) x'(xi)
    // is periodic and even, so the trapezoid rule on [0, L/2] converges
    // spectrally; the sample count is doubled until it settles.
    let half = 0.5 * p.l;
    let sample = |xi: f64| -> Result<f64> {
        let zeta = Complex64::new(xi, eta);
        let y = map_unchecked(zeta, p)?.im;
        let dx = derivative_unchecked(zeta, p)?.re;
        Ok(y * dx)
    };
    let mut n = 64usize;
    let mut vals: Vec<f64> = (0..=n).map(|i| sample(half * i as f64 / n as f64)).collect::<Result<_>>()?;
    let trap = |v: &[f64], n: usize| {
        let inner: f64 = v[1..n].iter().sum();
        2.0 * (half / n as f64) * (inner + 0.5 * (v[0] + v[n]))
    };
    let mut prev = trap(&vals, n);
    while n < 1 << 20 {
        let mut next = Vec::with_capacity(2 * n + 1);
        for i in 0..n {
            next.push(vals[i]);
            next.push(sample(half * (2 * i + 1) as f64 / (2 * n) as f64)?);
        }
        next.push(vals[n]);
        n *= 2;
        vals = next;
        let cur = trap(&vals, n);
        if (cur - prev).abs() <= 1e-13 * cur.abs().max(1.0) {
            return Ok(cur);
        }
        prev = cur;
    }
    Ok(prev)
}

/// Area of one period of the layer (equal to `L` times the mean thickness).
pub fn area(p: &WedgeMapParams) -> Result<f64> {
    area_with(p, p.eta_star)
}

/// Mean layer thickness, `area / L`.
pub fn mean_thickness(p: &WedgeMapParams) -> Result<f64> {
    Ok(area(p)? / p.l)
}

/// Adjusts `eta_star` (with `L` and `epsilon` fixed) so the mean thickness
/// is one.
pub fn normalize_area(p: &WedgeMapParams) -> Result<WedgeMapParams> {
    let lo = 1e-6 * p.eta_max;
    let hi = p.eta_max * (1.0 - 1e-9);
    let f = |eta: f64| Ok(area_with(p, eta)? - p.l);
    if f(hi)? < 0.0 {
        return Err(Error::Domain(format!(
            "no eta_star below eta_max = {} gives mean thickness 1",
            p.eta_max
        )));
    }
    let mut eta = find_root(f, lo, hi, 1e-14, 400)?;
    // Polish with secant steps until the area matches to 1e-8 absolute.
    for _ in 0..20 {
        let a0 = area_with(p, eta)? - p.l;
        if a0.abs() < 1e-10 {
            break;
        }
        let d = 1e-7 * eta;
        let a1 = area_with(p, eta + d)? - p.l;
        eta -= a0 * d / (a1 - a0);
    }
    WedgeMapParams::new(p.l, p.epsilon, eta)
}

/// Wedge map from `(h_min, beta)` with the period chosen so that the mean
/// thickness is one.
pub fn with_unit_mean(h_min: f64, beta: f64) -> Result<WedgeMapParams> {
    let excess = |l: f64| -> Result<f64> { mean_thickness(&params_from_physical(h_min, beta, l)?).map(|m| m - 1.0) };
    // Start where epsilon = 1 and grow the period until the layer is thick
    // enough on average.
    let mut lo = 2.0 * PI * h_min / beta.sin();
    if excess(lo)? > 0.0 {
        return Err(Error::Domain(format!("h_min = {h_min} too large for a unit-mean wedge")));
    }
    let mut hi = 2.0 * lo;
    while excess(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::Domain("no period gives mean thickness 1".into()));
        }
    }
    let l = find_root(excess, lo, hi, 1e-12 * hi, 400)?;
    params_from_physical(h_min, beta, l)
}

/// Inner wedge map `sinh(beta zeta) / sin(beta)` on the unit strip.
pub fn inner_map(zeta_t: Complex64, beta: f64) -> Complex64 {
    (zeta_t * beta).sinh() / beta.sin()
}

/// `G` at every node of a grid on the map rectangle.
pub fn metric_on_grid(p: &WedgeMapParams, grid: &Grid2D) -> Result<Vec<f64>> {
    let mut g = vec![0.0; grid.len()];
    for (i, &xi) in grid.periodic_nodes.iter().enumerate() {
        for (j, &eta) in grid.cheb_nodes.iter().enumerate() {
            g[grid.index(i, j)] = map_metric(Complex64::new(xi, eta), p)?;
        }
    }
    Ok(g)
}

/// Collocation grid on the map rectangle.
pub fn rectangle_grid(p: &WedgeMapParams, n_xi: usize, n_eta: usize) -> Result<Grid2D> {
    Grid2D::new(
        n_xi,
        n_eta,
        Interval::new(-0.5 * p.l, 0.5 * p.l),
        Interval::new(0.0, p.eta_star),
    )
}

/// Inverts the map on the real axis: the `xi` with `f(xi) = x`, for
/// `|x| <= L/2`.
pub fn real_axis_preimage(x: f64, p: &WedgeMapParams) -> Result<f64> {
    let half = 0.5 * p.l;
    if x.abs() > half * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("x = {x} outside [-L/2, L/2]")));
    }
    let x = x.clamp(-half, half);
    if x.abs() == half {
        return Ok(x);
    }
    let f = |xi: f64| -> Result<f64> { Ok(map_unchecked(Complex64::new(xi, 0.0), p)?.re - x) };
    // Newton with bisection safeguard; f is increasing on the real axis.
    let (mut lo, mut hi) = (-half, half);
    let mut xi = x;
    for _ in 0..200 {
        let r = f(xi)?;
        if r.abs() < 1e-15 * p.l {
            return Ok(xi);
        }
        if r > 0.0 {
            hi = xi;
        } else {
            lo = xi;
        }
        let d = derivative_unchecked(Complex64::new(xi, 0.0), p)?.re;
        let mut next = xi - r / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - xi).abs() < 1e-15 * p.l {
            return Ok(next);
        }
        xi = next;
    }
    Ok(xi)
}

/// Samples `(x, y)` of the top surface at `n` equispaced `xi` values
/// covering `[-L/2, L/2]`.
pub fn top_surface(p: &WedgeMapParams, n: usize) -> Result<Vec<(f64, f64)>> {
    (0..n)
        .map(|i| {
            let xi = -0.5 * p.l + p.l * i as f64 / (n - 1) as f64;
            map_unchecked(Complex64::new(xi, p.eta_star), p).map(|z| (z.re, z.im))
        })
        .collect()
}
