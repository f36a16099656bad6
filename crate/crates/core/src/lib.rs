//! Pseudo-spectral simulation of the pressureless Euler / Navier-Stokes system
//! with drag coupling on the periodic box, plus the diagnostics, mild-form
//! oracle and decay fitting used to study its long-time behaviour.

pub mod error;
mod fft;
pub mod field;
pub mod grid;
pub mod spectral;
pub mod state;
pub mod presets;
pub mod solver;
pub mod diagnostics;
pub mod timeseries;
pub mod mild;
pub mod envelope;
pub mod decay;
pub mod config;
pub mod snapshot;

pub use error::{PensError, Result};
pub use field::{RealField, SpectralField};
pub use grid::{wavenumber_grid, Grid};
pub use state::{SimState, SolverConfig};
