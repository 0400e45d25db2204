//! Pseudospectral simulation of the stochastic incompressible
//! Navier–Stokes–Fourier system on the 3-torus in velocity / square-root
//! temperature variables.

pub mod error;
pub mod spectral;

pub use error::{NsfError, Result};
pub mod diagnostics;
pub mod dynamics;
pub mod generic;
pub mod integrators;
pub mod noise;
