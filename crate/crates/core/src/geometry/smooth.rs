//! Slowly varying layer specified through the top-boundary height as a
//! function of the streamfunction: `F(psi) = h_min sec^2(delta psi / Phi)`
//! in the core, joined to quintic wings at `delta psi / Phi = 1`.
//!
//! Each wing is a quintic Hermite patch, C^2 at the junction, reaching the
//! period edge with `F' = F'' = 0` at a free edge height, so the periodic
//! extension is C^2. The period `QL` and the edge height are chosen so that
//! the induced physical profile has a prescribed length and area under a
//! model `x_psi = F w(F)` for the local stretching.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};
use crate::pnp_core::J1dTable;
use crate::roots::find_root;

const QUAD_POINTS: usize = 64;

/// Piecewise definition of `F(psi)` over one period `[-QL/2, QL/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothProfile {
    pub h_min: f64,
    /// Radius of curvature at the minimum (inner variables).
    pub a: f64,
    /// Target period in `x`.
    pub l: f64,
    pub phi: f64,
    /// Local aspect ratio `sqrt(h_min / 2a)`.
    pub delta: f64,
    /// Period in `psi`.
    pub ql: f64,
    /// Junction `psi_J = Phi / delta`.
    pub psi_j: f64,
    /// Height at the period edge.
    pub edge: f64,
    /// Wing coefficients in powers of `psi - psi_J`.
    pub wing: [f64; 6],
}

fn sec2(u: f64) -> f64 {
    1.0 / (u.cos() * u.cos())
}

/// Core value and its first two derivatives at `psi`.
fn core(h_min: f64, delta: f64, phi: f64, psi: f64) -> [f64; 3] {
    let s = delta / phi;
    let u = s * psi;
    let c = sec2(u);
    let t = u.tan();
    [h_min * c, 2.0 * h_min * s * c * t, 2.0 * h_min * s * s * c * (3.0 * c - 2.0)]
}

/// Quintic coefficients for a wing of width `w` ending flat at `edge`.
fn wing_coefficients(junction: [f64; 3], w: f64, edge: f64) -> Result<[f64; 6]> {
    let (c0, c1, c2) = (junction[0], junction[1], 0.5 * junction[2]);
    let mut m = faer::Mat::<f64>::zeros(3, 3);
    let rhs = [edge - (c0 + c1 * w + c2 * w * w), -(c1 + 2.0 * c2 * w), -2.0 * c2];
    m[(0, 0)] = w.powi(3);
    m[(0, 1)] = w.powi(4);
    m[(0, 2)] = w.powi(5);
    m[(1, 0)] = 3.0 * w * w;
    m[(1, 1)] = 4.0 * w.powi(3);
    m[(1, 2)] = 5.0 * w.powi(4);
    m[(2, 0)] = 6.0 * w;
    m[(2, 1)] = 12.0 * w * w;
    m[(2, 2)] = 20.0 * w.powi(3);
    let sol = crate::pnp_core::newton::dense_solve(&m, &rhs)
        .ok_or_else(|| Error::Singularity("degenerate wing width".into()))?;
    Ok([c0, c1, c2, sol[0], sol[1], sol[2]])
}

fn poly(c: &[f64; 6], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * t + v)
}

fn poly_derivative(c: &[f64; 6], t: f64) -> f64 {
    (1..6).rev().fold(0.0, |acc, k| acc * t + k as f64 * c[k])
}

impl SmoothProfile {
    fn with_period(h_min: f64, a: f64, l: f64, phi: f64, ql: f64, edge: f64) -> Result<Self> {
        let delta = (h_min / (2.0 * a)).sqrt();
        let psi_j = phi / delta;
        let w = 0.5 * ql - psi_j;
        if !(w > 0.0) {
            return Err(Error::Domain(format!(
                "period QL = {ql} leaves no room for the wing beyond psi_J = {psi_j}"
            )));
        }
        let wing = wing_coefficients(core(h_min, delta, phi, psi_j), w, edge)?;
        Ok(Self {
            h_min,
            a,
            l,
            phi,
            delta,
            ql,
            psi_j,
            edge,
            wing,
        })
    }

    fn fold(&self, psi: f64) -> (f64, f64) {
        let p = psi - self.ql * (psi / self.ql).round();
        (p.abs(), p.signum())
    }

    /// `F(psi)`, periodic with period `QL`.
    pub fn eval(&self, psi: f64) -> f64 {
        let (p, _) = self.fold(psi);
        if p <= self.psi_j {
            core(self.h_min, self.delta, self.phi, p)[0]
        } else {
            poly(&self.wing, p - self.psi_j)
        }
    }

    /// `F'(psi)`.
    pub fn derivative(&self, psi: f64) -> f64 {
        let (p, sign) = self.fold(psi);
        let d = if p <= self.psi_j {
            core(self.h_min, self.delta, self.phi, p)[1]
        } else {
            poly_derivative(&self.wing, p - self.psi_j)
        };
        sign * d
    }

    /// Leading-order thickness `h_min (1 + X^2)` at inner coordinate `X`,
    /// with `x = sqrt(2 a h_min) X`.
    pub fn inner_thickness(&self, x_inner: f64) -> f64 {
        self.h_min * (1.0 + x_inner * x_inner)
    }

    /// Physical `x` of the inner coordinate `X`.
    pub fn inner_to_x(&self, x_inner: f64) -> f64 {
        (2.0 * self.a * self.h_min).sqrt() * x_inner
    }

    /// `(∫ x_psi dpsi, ∫ F x_psi dpsi)` over a period for the model
    /// `x_psi = F * weight(F)`.
    pub fn length_and_area(&self, weight: &dyn Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
        let rule = GaussLegendre::new(NonZeroUsize::new(QUAD_POINTS).expect("nonzero"));
        let mut len = 0.0;
        let mut area = 0.0;
        for (lo, hi) in [(0.0, self.psi_j), (self.psi_j, 0.5 * self.ql)] {
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            for &(t, w) in rule.as_node_weight_pairs() {
                let f = self.eval(mid + half * t);
                let xp = f * weight(f)?;
                len += half * w * xp;
                area += half * w * f * xp;
            }
        }
        Ok((2.0 * len, 2.0 * area))
    }

    /// Whether `F` rises monotonically through the wing.
    pub fn wing_is_monotone(&self) -> bool {
        let w = 0.5 * self.ql - self.psi_j;
        (0..=400).all(|k| poly_derivative(&self.wing, w * k as f64 / 400.0) >= -1e-12)
    }
}

/// Builds the profile for `(h_min, a, L, Phi)` at Debye length `nu`, using
/// the quasi-1D stretching `x_psi = F / j1D(nu / F, Phi)` so that the period
/// is `l` and the mean thickness is one.
pub fn build_smooth_profile(h_min: f64, a: f64, l: f64, phi: f64, nu: f64, j1d: &J1dTable) -> Result<SmoothProfile> {
    if (j1d.phi() - phi).abs() > 1e-14 * phi || !(nu > 0.0) {
        return Err(Error::Domain(format!(
            "smooth profile needs nu > 0 and a j1D table built for Phi = {phi}"
        )));
    }
    let weight = |f: f64| Ok(1.0 / j1d.get(nu / f));
    build_smooth_profile_with(h_min, a, l, phi, l, l, &weight)
}

/// Builds the profile so that, under `x_psi = F * weight(F)`, the period
/// length is `target_len` and the area is `target_area`. `l` is recorded
/// as the nominal period.
pub fn build_smooth_profile_with(
    h_min: f64,
    a: f64,
    l: f64,
    phi: f64,
    target_len: f64,
    target_area: f64,
    weight: &dyn Fn(f64) -> Result<f64>,
) -> Result<SmoothProfile> {
    if !(h_min > 0.0 && a > 0.0 && l > 0.0 && phi > 0.0) {
        return Err(Error::Domain(format!(
            "smooth profile needs h_min, a, L, Phi > 0 (got {h_min}, {a}, {l}, {phi})"
        )));
    }
    let delta = (h_min / (2.0 * a)).sqrt();
    let psi_j = phi / delta;
    let f_j = core(h_min, delta, phi, psi_j)[0];
    // Edge height meeting the length target for a given period; the
    // length grows with the edge height.
    let edge_for = |ql: f64| -> Result<f64> {
        let len = |edge: f64| -> Result<f64> {
            Ok(SmoothProfile::with_period(h_min, a, l, phi, ql, edge)?.length_and_area(weight)?.0 - target_len)
        };
        let lo = f_j;
        if len(lo)? > 0.0 {
            return Err(Error::Domain("period too short for a rising wing".into()));
        }
        let mut hi = 2.0 * lo.max(1.0);
        while len(hi)? < 0.0 {
            hi *= 2.0;
            if hi > 1e4 {
                return Err(Error::Domain("no edge height reaches the requested period".into()));
            }
        }
        find_root(len, lo, hi, 1e-13, 200)
    };
    let area_gap = |ql: f64| -> Result<f64> {
        let p = SmoothProfile::with_period(h_min, a, l, phi, ql, edge_for(ql)?)?;
        Ok(p.length_and_area(weight)?.1 - target_area)
    };
    // At fixed length the area falls as the period in psi grows; scan
    // outward from the junction for a sign change.
    let mut bracket = None;
    let mut prev: Option<(f64, f64)> = None;
    let mut ql = 2.0 * psi_j * 1.01;
    for _ in 0..200 {
        match area_gap(ql) {
            Ok(g) => {
                if let Some((q0, g0)) = prev {
                    if g0 > 0.0 && g <= 0.0 {
                        bracket = Some((q0, ql));
                        break;
                    }
                }
                prev = Some((ql, g));
            }
            Err(_) if prev.is_some() => break,
            Err(_) => {}
        }
        ql *= 1.03;
    }
    let (lo, hi) = bracket.ok_or_else(|| incompatible(h_min, a, l))?;
    let ql = find_root(area_gap, lo, hi, 1e-12 * hi, 200)?;
    let p = SmoothProfile::with_period(h_min, a, l, phi, ql, edge_for(ql)?)?;
    if !p.wing_is_monotone() {
        return Err(Error::Domain(format!(
            "wing for h_min = {h_min}, a = {a} is not monotone at mean thickness one"
        )));
    }
    Ok(p)
}

fn incompatible(h_min: f64, a: f64, l: f64) -> Error {
    Error::Domain(format!(
        "h_min = {h_min}, a = {a} cannot give mean thickness one over L = {l}"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn table() -> &'static J1dTable {
        static TABLE: OnceLock<J1dTable> = OnceLock::new();
        TABLE.get_or_init(|| J1dTable::new(1.0, 40).unwrap())
    }

    fn example() -> SmoothProfile {
        build_smooth_profile(0.06, 1.7, 31.4, 1.0, 0.1, table()).unwrap()
    }

    #[test]
    fn core_value_and_scaling() {
        let p = example();
        assert!((p.eval(0.0) - 0.06).abs() < 1e-15);
        assert!((p.delta * p.delta - 0.06 / 3.4).abs() < 1e-15);
        let psi = 0.5 * p.psi_j;
        let expected = 0.06 / (p.delta * psi).cos().powi(2);
        assert!((p.eval(psi) - expected).abs() < 1e-14);
        assert_eq!(p.eval(-psi), p.eval(psi));
        assert_eq!(p.inner_thickness(1.0), 0.12);
        assert!((p.inner_to_x(1.0) - (2.0f64 * 1.7 * 0.06).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn quasi_1d_targets_are_met() {
        let p = example();
        let w = |f: f64| Ok(1.0 / table().get(0.1 / f));
        let (len, area) = p.length_and_area(&w).unwrap();
        assert!((len - 31.4).abs() < 1e-9);
        assert!((area / len - 1.0).abs() < 1e-10);
    }

    #[test]
    fn profile_is_c2_at_the_junction_and_flat_at_the_edge() {
        let p = example();
        let h = 1e-4;
        let second = |x: f64| (p.eval(x + h) - 2.0 * p.eval(x) + p.eval(x - h)) / (h * h);
        let j = p.psi_j;
        assert!((p.eval(j - 1e-12) - p.eval(j + 1e-12)).abs() < 1e-10);
        assert!((p.derivative(j - 1e-12) - p.derivative(j + 1e-12)).abs() < 1e-9);
        // One-sided limits by linear extrapolation.
        let left = 2.0 * second(j - 1e-3) - second(j - 2e-3);
        let right = 2.0 * second(j + 1e-3) - second(j + 2e-3);
        assert!((left - right).abs() < 1e-3 * left.abs(), "{left} {right}");
        let edge = 0.5 * p.ql;
        assert!(p.derivative(edge - 1e-12).abs() < 1e-9);
        assert!(second(edge - 2e-3).abs() < 1e-2);
        assert!((p.eval(edge - 1e-9) - p.eval(-edge + 1e-9)).abs() < 1e-8);
        assert!((p.eval(edge) - p.edge).abs() < 1e-12);
        assert!(p.wing_is_monotone());
    }

    #[test]
    fn reference_family_builds() {
        let w = |f: f64| Ok(1.0 / table().get(0.1 / f));
        for h in [0.032, 0.06, 0.1, 0.124] {
            let p = build_smooth_profile(h, 1.7, 31.4, 1.0, 0.1, table()).unwrap();
            let (len, area) = p.length_and_area(&w).unwrap();
            assert!((area / len - 1.0).abs() < 1e-8, "{h}");
        }
    }

    #[test]
    fn constant_weight_scales_length() {
        // With x_psi = F the length is the psi-integral of F.
        let p = SmoothProfile::with_period(0.06, 1.7, 31.4, 1.0, 40.0, 1.2).unwrap();
        let (len, _) = p.length_and_area(&|_| Ok(1.0)).unwrap();
        let n = 20000;
        let riemann: f64 = (0..n).map(|k| p.eval(-20.0 + 40.0 * (k as f64 + 0.5) / n as f64)).sum::<f64>() * 40.0 / n as f64;
        assert!((len - riemann).abs() < 1e-6);
    }

    #[test]
    fn invalid_inputs_fail() {
        assert!(build_smooth_profile(-0.1, 1.0, 31.4, 1.0, 0.1, table()).is_err());
        assert!(build_smooth_profile(0.06, 1.7, 31.4, 2.0, 0.1, table()).is_err());
        assert!(build_smooth_profile(0.9, 100.0, 31.4, 1.0, 0.1, table()).is_err());
    }
}
