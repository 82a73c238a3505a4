//! Scalar root bracketing used by the geometry and profile fitting.

use crate::error::{Error, Result};

/// Illinois-variant regula falsi on a sign-changing bracket.
pub fn find_root<F>(mut f: F, mut a: f64, mut b: f64, xtol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Domain(format!(
            "root not bracketed on [{a}, {b}] (f = {fa:.3e}, {fb:.3e})"
        )));
    }
    let mut side = 0i8;
    for _ in 0..max_iter {
        let c = (a * fb - b * fa) / (fb - fa);
        // Guard against stagnation by falling back to bisection.
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
        let fc = f(c)?;
        if fc == 0.0 || (b - a).abs() < xtol {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() < xtol {
            return Ok(0.5 * (a + b));
        }
    }
    Err(Error::Domain(format!("root search did not converge in {max_iter} steps")))
}

/// Expands `[a, b]` geometrically upward until `f` changes sign.
pub fn bracket_up<F>(mut f: F, a: f64, mut b: f64, factor: f64, max_iter: usize) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let fa = f(a)?;
    let mut lo = a;
    for _ in 0..max_iter {
        let fb = f(b)?;
        if fb.signum() != fa.signum() {
            return Ok((lo, b));
        }
        lo = b;
        b *= factor;
    }
    Err(Error::Domain("could not bracket a root".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_roots() {
        let r = find_root(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        let r = find_root(|x| Ok((x - 1.0).powi(3) + 1e-3 * (x - 1.0)), -3.0, 10.0, 1e-13, 500).unwrap();
        assert!((r - 1.0).abs() < 1e-10);
        assert!(find_root(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 50).is_err());
        let (lo, hi) = bracket_up(|x| Ok(x - 37.0), 1.0, 2.0, 2.0, 20).unwrap();
        assert!(lo < 37.0 && hi > 37.0);
    }
}
