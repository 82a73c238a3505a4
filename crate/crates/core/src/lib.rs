// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod hodograph;
pub mod pnp_core;
pub mod postproc;
pub mod roots;
pub mod spectral;
pub mod specfun;

pub use error::{Error, Result};
