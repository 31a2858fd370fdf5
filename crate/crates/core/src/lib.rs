//! Neural fields on the Poincaré disk: geometry, special functions, kernels,
//! a quadrature/Runge-Kutta field simulator, stationary solutions, and
//! high-gain bump analysis.

pub mod bumps;
pub mod field;
pub mod geometry;
pub mod kernels;
pub mod quad;
pub mod specfun;
pub mod stationary;
pub mod verify;
