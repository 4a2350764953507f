//! Periodic pseudo-spectral laboratory for fractional transport-diffusion
//! equations and their dual conservation laws, with atom-based Hölder
//! metrology.
//!
//! The primal unknown `theta` solves
//! `d/dt theta + (-Laplacian)^{alpha/2} theta = (v . grad) theta`
//! and the dual unknown `psi` solves the conservation law
//! `d/ds psi + (-Laplacian)^{alpha/2} psi = -div(v(t - s) psi)`.
//! Both live on the torus `[0, L)^d`, `d` in `{1, 2}`.

pub mod atoms;
pub mod error;
pub mod grid;
pub mod io;
pub mod oracles;
pub mod regularity;
pub mod solver;
pub mod spectral;
pub mod velocity;

pub use error::{Error, Result};
pub use grid::{GridSpec, Point, ScalarField};
pub use spectral::{Fourier, SpectralField};
