//! Calibration, moment extraction and the B / Δ / RI estimators with their
//! statistical and calibration uncertainty budget.

mod calibration;
mod centers;
mod estimators;
mod moments;

pub use calibration::{
    calibrate, shift_correction, CalibrationRecord, ShiftRecord, CALIBRATION_SIGNIFICANCE, INPUT_KEY,
};
pub use centers::{fit_centers, fit_centers_with, split_counts, CenterFit, DEFAULT_SUBSETS, MIN_CENTER_COUNTS};
pub use estimators::{
    alice_covariance, alice_spread, chsh_estimate, chsh_value, delta_estimate, delta_value, estimate_all,
    ri_estimate, Estimate, EstimateRecord, EstimateSet, Gradient, Propagated,
};
pub use moments::{expected_moments, moments, Feature, MomentSet, N_FEATURES};
