//! Exact non-Markovian stochastic Schrödinger dynamics of a free particle
//! driven by colored Gaussian noise.
//!
//! The propagator of the linear equation is a Gaussian kernel
//! `exp[-A(x0² + x²) + B x0 x + C x0 + D x + E]` whose coefficients are built
//! from two kernels `f` and `h` solving a memory boundary-value problem.
//! Gaussian states stay Gaussian, so a trajectory is three complex numbers.
//!
//! ```
//! use nmsse::{make_params, UnitMode};
//! use nmsse::propagator::{asymptotic_alpha, sigma_inf};
//!
//! let p = make_params(1.0, 1.0, 0.1, UnitMode::Scaled).unwrap();
//! let a = asymptotic_alpha(&p, 1.0).unwrap();
//! assert!(a.re > 0.0);
//! assert!(sigma_inf(&p, 1.0).unwrap().is_finite());
//! ```

pub mod ensemble;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod noise;
pub mod oracle;
pub mod params;
pub mod propagator;
pub mod special;

pub use num_complex::Complex64;

pub use error::{Error, Result};
pub use grid::{make_grid, TimeGrid};
pub use params::{make_params, PhysicalParams, UnitMode};

/// Imaginary unit.
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Reduced Planck constant in J·s, the value used for SI runs.
pub const HBAR_SI: f64 = 1.054_571_817e-34;

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub(crate) fn all_finite(z: &[Complex64]) -> bool {
    z.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}
