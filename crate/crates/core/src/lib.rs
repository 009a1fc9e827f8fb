//! Numerical machinery for two-dimensional Riemann-Wirtinger integrals on a
//! product of complex tori E x E.
//!
//! The crate provides:
//! - [`elliptic`]: the odd Jacobi theta function, its logarithmic derivative
//!   `rho`, and the elliptic Cauchy kernel `s(u; lambda)`;
//! - [`config`]: problem data (modular parameter, marked points, exponents)
//!   with validation and the basis index bookkeeping;
//! - [`forms`]: the basis 2-forms of the twisted cohomology group and the
//!   diagonal cohomology intersection matrix;
//! - [`connection`]: the Gauss-Manin connection matrices of the differential
//!   system `d F / d t_{kp} = A_{kp}(t) F`, plus flatness and star-symmetry
//!   checks;
//! - [`identities`]: the addition/contiguity formulas for `rho` and `s` as
//!   executable residual checks over random sample points;
//! - [`integrator`]: branch-tracked evaluation of the multivalued weight
//!   `T(u1, u2)`, Pochhammer product cycles, contour quadrature, and the
//!   end-to-end check of the differential system against direct integrals.

pub mod config;
pub mod connection;
pub mod elliptic;
pub mod error;
pub mod forms;
pub mod identities;
pub mod integrator;

pub use error::{Error, Result};

/// Complex scalar type used throughout.
pub type Cx = num_complex::Complex64;

/// 2 * pi * sqrt(-1).
pub fn two_pi_i() -> Cx {
    Cx::new(0.0, 2.0 * std::f64::consts::PI)
}

/// pi * sqrt(-1).
pub fn pi_i() -> Cx {
    Cx::new(0.0, std::f64::consts::PI)
}
