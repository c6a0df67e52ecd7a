//! Desingularized point vortices for the stationary 2D Euler equation.

pub mod ansatz;
pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod grid;
pub mod laplace;
pub mod point;
pub mod potential;
pub mod profile;
pub mod quadrature;
pub mod routh;
pub mod solver;

pub use error::{Error, ErrorCode, Result};
pub use point::Point;
