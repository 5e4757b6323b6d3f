//! Most-likely paths and Pontryagin optimal control for a continuously
//! monitored harmonic oscillator.

pub mod band;
pub mod cdjp;
pub mod control;
pub mod error;
pub mod fock;
pub mod gauss;
pub mod presets;
pub mod schedule;
pub mod sme;
pub mod stats;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
pub type CMat = nalgebra::DMatrix<C64>;
pub type CVec = nalgebra::DVector<C64>;

/// Largest absolute entry of a complex matrix.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `‖M − M†‖_max`
pub fn hermiticity_residual(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub(crate) fn symmetrize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
