//! Numerical laboratory for the fractal Burgers equation
//! `u_t - Δ^{α/2} u + b·∇(u|u|^q) = 0`.

pub mod error;
pub mod grid;
pub mod kernel;
pub mod quadrature;
pub mod semigroup;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
