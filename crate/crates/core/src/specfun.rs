//! Special functions needed by the wedge conformal map.
//!
//! The complete elliptic integral is computed with the arithmetic-geometric
//! mean, Jacobi functions of real argument with the descending Landen
//! (AGM) transformation, and Jacobi functions of complex argument with the
//! Jacobi imaginary transformation combined with the addition theorem.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

const AGM_MAX_STEPS: usize = 64;

/// Elliptic parameter `m` together with its complement `mc = 1 - m`.
///
/// Both are stored so that parameters very close to 1 (small map parameter
/// `epsilon`) keep full relative accuracy in the complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticModulus {
    m: f64,
    mc: f64,
}

impl EllipticModulus {
    pub fn new(m: f64) -> Result<Self> {
        if !(m > 0.0 && m < 1.0) {
            return Err(Error::Domain(format!("elliptic parameter m = {m} outside (0, 1)")));
        }
        Ok(Self { m, mc: 1.0 - m })
    }

    /// Builds the parameter from an accurately known complement `mc = 1 - m`.
    pub fn from_complement(mc: f64) -> Result<Self> {
        if !(mc > 0.0 && mc < 1.0) {
            return Err(Error::Domain(format!("complementary parameter {mc} outside (0, 1)")));
        }
        Ok(Self { m: 1.0 - mc, mc })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn mc(&self) -> f64 {
        self.mc
    }

    /// The complementary modulus, i.e. parameter `1 - m`.
    pub fn complement(&self) -> Self {
        Self { m: self.mc, mc: self.m }
    }
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..AGM_MAX_STEPS {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    a
}

/// Complete elliptic integral of the first kind `K(m)`.
pub fn complete_elliptic_k(m: EllipticModulus) -> f64 {
    FRAC_PI_2 / agm(1.0, m.mc.sqrt())
}

/// Complete elliptic integral of the second kind `E(m)`.
pub fn complete_elliptic_e(m: EllipticModulus) -> f64 {
    let mut a = 1.0;
    let mut b = m.mc.sqrt();
    let mut sum = 0.5 * m.m;
    let mut pow2 = 0.5;
    for _ in 0..AGM_MAX_STEPS {
        let c = 0.5 * (a - b);
        if c.abs() <= 1e-17 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        pow2 *= 2.0;
        sum += pow2 * c * c;
    }
    FRAC_PI_2 / a * (1.0 - sum)
}

/// Jacobi `sn`, `cn`, `dn` for real argument by the descending Landen
/// transformation.
pub fn jacobi_real(u: f64, m: EllipticModulus) -> (f64, f64, f64) {
    let mut a = [0.0f64; AGM_MAX_STEPS + 1];
    let mut c = [0.0f64; AGM_MAX_STEPS + 1];
    a[0] = 1.0;
    c[0] = m.m.sqrt();
    let mut b = m.mc.sqrt();
    let mut steps = 0;
    while steps < AGM_MAX_STEPS && c[steps].abs() > 1e-16 * a[steps] {
        a[steps + 1] = 0.5 * (a[steps] + b);
        c[steps + 1] = 0.5 * (a[steps] - b);
        b = (a[steps] * b).sqrt();
        steps += 1;
    }
    let mut phi = (steps as f64).exp2() * a[steps] * u;
    for i in (1..=steps).rev() {
        let s = (c[i] / a[i] * phi.sin()).clamp(-1.0, 1.0);
        phi = 0.5 * (phi + s.asin());
    }
    let (sn, cn) = phi.sin_cos();
    let dn = (m.mc + m.m * cn * cn).sqrt();
    (sn, cn, dn)
}

/// Jacobi `sn`, `cn`, `dn` of complex argument.
///
/// The imaginary part must satisfy `|Im u| < K(1 - m)`; the functions have
/// poles on `Im u = K(1 - m)`.
pub fn jacobi_sn_cn_dn(u: Complex64, m: EllipticModulus) -> Result<(Complex64, Complex64, Complex64)> {
    let kp = complete_elliptic_k(m.complement());
    if !(u.im.abs() < kp) {
        return Err(Error::Domain(format!(
            "|Im u| = {} reaches the pole line K(1-m) = {kp}",
            u.im.abs()
        )));
    }
    let (s, c, d) = jacobi_real(u.re, m);
    if u.im == 0.0 {
        return Ok((s.into(), c.into(), d.into()));
    }
    let (s1, c1, d1) = jacobi_real(u.im, m.complement());
    let den = c1 * c1 + m.m * s * s * s1 * s1;
    if den == 0.0 {
        return Err(Error::Domain(format!("elliptic functions have a pole at u = {u}")));
    }
    let sn = Complex64::new(s * d1, c * d * s1 * c1) / den;
    let cn = Complex64::new(c * c1, -s * d * s1 * d1) / den;
    let dn = Complex64::new(d * c1 * d1, -m.m * s * c * s1) / den;
    Ok((sn, cn, dn))
}

/// Principal-branch complex arcsine, branch cuts on `(-inf, -1]` and
/// `[1, inf)`.
pub fn complex_arcsin(w: Complex64) -> Complex64 {
    // asin(w) = -i asinh(i w); asinh is evaluated in the right half plane
    // and extended by oddness so that w + sqrt(w^2 + 1) never cancels.
    let z = Complex64::new(-w.im, w.re);
    let flip = z.re < 0.0 || (z.re == 0.0 && z.im < 0.0);
    let z = if flip { -z } else { z };
    let one = Complex64::new(1.0, 0.0);
    let iz = Complex64::new(-z.im, z.re);
    // z^2 + 1 = (1 - i z)(1 + i z) keeps accuracy near z = +-i.
    let root = ((one - iz) * (one + iz)).sqrt();
    let asinh = (z + root).ln();
    let asinh = if flip { -asinh } else { asinh };
    Complex64::new(asinh.im, -asinh.re)
}
