//! Simulation and estimation of the relativistic-independence (RI) bound
//! with sequential and joint weak measurements on polarization-entangled
//! photon pairs.
//!
//! - [`qcore`]: two-qubit density matrices and real-plane polarization observables.
//! - [`theory`]: exact quantum predictions and the covariance-matrix bound chain.
//! - [`wmsim`]: Gaussian pointer couplings, pixel probabilities, Monte Carlo counts.
//! - [`estimation`]: calibration, moment extraction, estimators and uncertainty budget.

pub mod axes;
pub mod error;
pub mod estimation;
pub mod qcore;
pub mod theory;
pub mod wmsim;

pub use axes::{Coordinate, PerCoordinate, Stage};
pub use error::{Error, Result};
