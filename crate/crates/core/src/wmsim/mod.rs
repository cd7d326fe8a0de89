//! Weak von Neumann couplings of polarization to Gaussian pointer modes,
//! exact pixel-grid probabilities, Monte Carlo coincidence counts and the
//! decoherence of the output polarization state.
//!
//! Each photon couples twice: stage 1 translates its transverse `x`
//! coordinate by `g` when it passes `Π(θ_1)`, stage 2 translates `y` when
//! it passes `Π(θ_2)`. States are tracked as sums of branches labeled by
//! polarization frame index and pointer displacement, so every probability
//! and reduced density matrix follows from closed-form Gaussian overlaps.

mod branch;
mod decoherence;
mod grid;
pub mod io;
mod pixel;
mod sample;

pub use branch::{initial_state, Branch, BranchState, Frame, Mixture};
pub use decoherence::reduced_polarization_state;
pub use grid::{normal_interval, overlap_bins, pointer_overlap, PixelGrid, COVERAGE_SIGMAS, MAX_TRUNCATION};
pub use pixel::{axis_marginal, axis_truncation, check_coverage, pixel_distribution, ProbabilityTensor};
pub use sample::{sample_coincidences, sample_coincidences_in, sample_with, stream_rng, CoincidenceTensor};

use crate::axes::{Coordinate, Stage};
use crate::error::Result;
use crate::qcore::Party;

/// Applies one coupling to a single pure state.
pub fn apply_weak_coupling(state: &BranchState, party: Party, stage: Stage, theta: f64, g: f64) -> Result<BranchState> {
    state.apply_weak_coupling(party, stage, theta, g)
}

/// Rigid per-coordinate translation of the pointer distribution, checked
/// against the coverage guard of `grid`.
pub fn inject_hwp_shift(mixture: &Mixture, shifts: [f64; 4], grid: &PixelGrid) -> Result<Mixture> {
    mixture.inject_hwp_shift(shifts, grid)
}

/// Marks `coord` on a mask for moment helpers.
pub fn mask(coords: &[Coordinate]) -> [bool; 4] {
    std::array::from_fn(|i| coords.iter().any(|c| c.index() == i))
}
