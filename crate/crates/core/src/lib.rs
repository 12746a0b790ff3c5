//! Spectral solver and verification harness for the 3D hydrostatic
//! primitive equations on `(0,1)^2 x (-h, 0)`, periodic in the horizontal,
//! with `d/dz v = 0` at the surface and `v = 0` at the bottom.

pub mod app;
pub mod checkpoint;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod field;
pub mod forcing;
pub mod grid;
pub mod initial;
pub mod nonlinear;
pub mod norms;
pub mod projection;
pub mod stokes;

pub use error::{PeError, Result};
pub use field::{AveragedField, PhysicalField, PlaneField, SpectralField};
pub use grid::{Fraction, Grid};
