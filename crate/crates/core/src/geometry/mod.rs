//! Domain descriptions: the wedge conformal map, the flat reference layer
//! and smooth surface profiles.

pub mod smooth;
pub mod wedge;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{Grid2D, Interval};

pub use smooth::{build_smooth_profile, build_smooth_profile_with, SmoothProfile};
pub use wedge::{
    area, epsilon_from_physical, forward_map, inner_map, map_derivative, map_metric, mean_thickness,
    metric_on_grid, normalize_area, params_from_physical, real_axis_preimage, rectangle_grid, top_surface,
    with_unit_mean, WedgeMapParams,
};

/// Uniform layer of the given thickness; the map is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatLayer {
    pub l: f64,
    pub thickness: f64,
}

/// A domain that the conformal solver can work on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Wedge(WedgeMapParams),
    Flat(FlatLayer),
}

impl Domain {
    pub fn l(&self) -> f64 {
        match self {
            Domain::Wedge(p) => p.l,
            Domain::Flat(f) => f.l,
        }
    }

    /// Height of the computational rectangle.
    pub fn eta_star(&self) -> f64 {
        match self {
            Domain::Wedge(p) => p.eta_star,
            Domain::Flat(f) => f.thickness,
        }
    }

    pub fn map(&self, zeta: Complex64) -> Result<Complex64> {
        match self {
            Domain::Wedge(p) => forward_map(zeta, p),
            Domain::Flat(_) => Ok(zeta),
        }
    }

    pub fn derivative(&self, zeta: Complex64) -> Result<Complex64> {
        match self {
            Domain::Wedge(p) => map_derivative(zeta, p),
            Domain::Flat(_) => Ok(Complex64::new(1.0, 0.0)),
        }
    }

    /// `xi` on the bottom boundary with `f(xi) = x`.
    pub fn real_preimage(&self, x: f64) -> Result<f64> {
        match self {
            Domain::Wedge(p) => real_axis_preimage(x, p),
            Domain::Flat(f) => {
                if x.abs() > 0.5 * f.l * (1.0 + 1e-12) {
                    return Err(Error::Domain(format!("x = {x} outside [-L/2, L/2]")));
                }
                Ok(x)
            }
        }
    }

    pub fn grid(&self, n_xi: usize, n_eta: usize) -> Result<Grid2D> {
        let half = 0.5 * self.l();
        Grid2D::new(n_xi, n_eta, Interval::new(-half, half), Interval::new(0.0, self.eta_star()))
    }

    pub fn metric_on_grid(&self, grid: &Grid2D) -> Result<Vec<f64>> {
        match self {
            Domain::Wedge(p) => metric_on_grid(p, grid),
            Domain::Flat(_) => Ok(vec![1.0; grid.len()]),
        }
    }

    pub fn mean_thickness(&self) -> Result<f64> {
        match self {
            Domain::Wedge(p) => mean_thickness(p),
            Domain::Flat(f) => Ok(f.thickness),
        }
    }
}
