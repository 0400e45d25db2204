//! Fourier representation of real fields on the unit 3-torus.

pub mod field;
pub mod grid;
pub mod ops;
pub mod transform;

pub use field::{ScalarField, SpectralField, TensorField, VectorField};
pub use grid::{max_norm, norm2, TorusGrid, Wavevector};
pub use ops::*;
