//! Domain-wall selection for the axially symmetric Landau-Lifshitz-Gilbert
//! equation with Slonczewski spin torque.
//!
//! - [`model`]: parameters, rest states, regimes and their essential spectra
//! - [`spectral`]: absolute spectra and spreading predictions for
//!   two-component operators with sum-of-squares dispersion
//! - [`dwfamily`]: the explicit wall family, thresholds and critical fields
//! - [`sim`]: semi-implicit finite-difference solver with symmetry freezing
//! - [`evans`]: Evans function and contour winding numbers

pub mod error;
pub mod model;
pub mod spectral;
pub mod dwfamily;
pub mod sim;
pub mod evans;

pub use error::{Error, Result};
pub use model::{Frame, MaterialParams, Orientation, Pole, Regime, RegimeInfo};
