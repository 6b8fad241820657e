//! Pseudospectral surrogate for periodic mild solutions of the Boussinesq
//! system on a periodic box, with Morrey–Lorentz norm diagnostics.

pub mod calculus;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod norms;
pub mod periodic;
pub mod presets;
pub mod runner;
pub mod solver;
pub mod spectral;
pub mod stability;

pub use error::{Error, Result};
pub use field::{ScalarField, State, TensorField, VectorField};
pub use grid::GridSpec;
pub use spectral::{SpectralField, SpectralOps};
