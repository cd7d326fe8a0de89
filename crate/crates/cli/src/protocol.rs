//! The six-acquisition protocol for one mismatch angle: two calibration
//! runs, the main run, and three crystals-out runs for the wave-plate shift.

use std::f64::consts::FRAC_PI_2;

use riwm_core::estimation::{
    calibrate, estimate_all, moments, shift_correction, CalibrationRecord, EstimateRecord, EstimateSet, ShiftRecord,
    INPUT_KEY,
};
use riwm_core::qcore::PolarizationState;
use riwm_core::theory::{chsh_theory, delta_theory, ri_theory, MeasurementSettings};
use riwm_core::wmsim::{
    initial_state, pixel_distribution, reduced_polarization_state, sample_coincidences_in, BranchState,
    CoincidenceTensor, Mixture,
};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;

/// One of the six acquisitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acquisition {
    /// `|H_A V_B⟩`, crystals in, wave plates at zero.
    CalibHV,
    /// `|V_A H_B⟩`, crystals in, wave plates at zero.
    CalibVH,
    /// Source state at the measurement angles.
    Main,
    /// Crystals out, source state at the measurement angles.
    NoCrystalMeasurement,
    /// Crystals out, `|H_A V_B⟩` at zero angles.
    NoCrystalHV,
    /// Crystals out, `|V_A H_B⟩` at zero angles.
    NoCrystalVH,
}

impl Acquisition {
    pub const ALL: [Acquisition; 6] = [
        Acquisition::CalibHV,
        Acquisition::CalibVH,
        Acquisition::Main,
        Acquisition::NoCrystalMeasurement,
        Acquisition::NoCrystalHV,
        Acquisition::NoCrystalVH,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Acquisition::CalibHV => "calib-HV",
            Acquisition::CalibVH => "calib-VH",
            Acquisition::Main => "main",
            Acquisition::NoCrystalMeasurement => "nocrystal-1",
            Acquisition::NoCrystalHV => "nocrystal-2",
            Acquisition::NoCrystalVH => "nocrystal-3",
        }
    }

    fn input(self) -> &'static str {
        match self {
            Acquisition::CalibHV | Acquisition::NoCrystalHV => "HV",
            Acquisition::CalibVH | Acquisition::NoCrystalVH => "VH",
            Acquisition::Main | Acquisition::NoCrystalMeasurement => "source",
        }
    }

    fn crystals_in(self) -> bool {
        matches!(self, Acquisition::CalibHV | Acquisition::CalibVH | Acquisition::Main)
    }

    fn at_measurement_angles(self) -> bool {
        matches!(self, Acquisition::Main | Acquisition::NoCrystalMeasurement)
    }

    /// Random substream: the acquisition name qualified by the exact bits of
    /// `delta`, so every sweep point draws independent noise and a single
    /// run reproduces the matching sweep row.
    pub fn stream(self, delta: f64) -> String {
        format!("{}/{:016x}", self.name(), delta.to_bits())
    }
}

/// Polarization state and couplings of one acquisition.
pub fn acquisition_state(cfg: &ExperimentConfig, delta: f64, acq: Acquisition) -> Result<Mixture> {
    let sigma = cfg.sigma;
    let state = match acq {
        Acquisition::CalibHV | Acquisition::NoCrystalHV => Mixture::pure(BranchState::product(0.0, FRAC_PI_2, sigma)?),
        Acquisition::CalibVH | Acquisition::NoCrystalVH => Mixture::pure(BranchState::product(FRAC_PI_2, 0.0, sigma)?),
        Acquisition::Main | Acquisition::NoCrystalMeasurement => initial_state(cfg.visibility, sigma)?,
    };
    let g = if acq.crystals_in() { cfg.g } else { [0.0; 4] };
    let (angles, shift) = if acq.at_measurement_angles() {
        (cfg.settings(delta)?.angles(), cfg.hwp_shift)
    } else {
        // Stage 1 passes H, stage 2 passes V.
        ([0.0, FRAC_PI_2, 0.0, FRAC_PI_2], [0.0; 4])
    };
    let settings = MeasurementSettings::new(angles, delta, g, sigma)?;
    Ok(state.apply_settings(&settings)?.inject_hwp_shift(shift, &cfg.grid()?)?)
}

/// Simulates one acquisition of `cfg.events` events from `cfg.seed`.
pub fn acquire(cfg: &ExperimentConfig, delta: f64, acq: Acquisition) -> Result<CoincidenceTensor> {
    let grid = cfg.grid()?;
    let probs = pixel_distribution(&acquisition_state(cfg, delta, acq)?, &grid)?;
    let stream = acq.stream(delta);
    let mut t = sample_coincidences_in(&probs, cfg.events, cfg.seed, &stream)?;
    let g = if acq.crystals_in() { cfg.g } else { [0.0; 4] };
    let meta = [
        (INPUT_KEY, acq.input().to_string()),
        ("acquisition", acq.name().to_string()),
        ("stream", stream),
        ("seed", cfg.seed.to_string()),
        ("delta", delta.to_string()),
        ("visibility", cfg.visibility.to_string()),
        ("sigma", cfg.sigma.to_string()),
        ("g", format!("{} {} {} {}", g[0], g[1], g[2], g[3])),
        ("crystals", if acq.crystals_in() { "in" } else { "out" }.to_string()),
    ];
    t.meta.extend(meta.into_iter().map(|(k, v)| (k.to_string(), v)));
    Ok(t)
}

/// Exact predictions for the configured source at mismatch `delta`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryRecord {
    pub B_theory: f64,
    pub Delta_theory: f64,
    pub RI_theory: f64,
    /// Purity of the input polarization state.
    pub purity_in: f64,
    /// Purity of the polarization state after the four couplings.
    pub purity_out: f64,
}

impl TheoryRecord {
    pub const COLUMNS: [&'static str; 3] = ["B_theory", "Delta_theory", "RI_theory"];

    pub fn new(cfg: &ExperimentConfig, delta: f64) -> Result<Self> {
        let rho = PolarizationState::werner(cfg.visibility)?;
        let s = cfg.settings(delta)?;
        let coupled = initial_state(cfg.visibility, cfg.sigma)?.apply_settings(&s)?;
        let (_, purity_out) = reduced_polarization_state(&coupled)?;
        Ok(Self {
            B_theory: chsh_theory(&rho, &s),
            Delta_theory: delta_theory(&rho, &s)?,
            RI_theory: ri_theory(&rho, &s)?,
            purity_in: rho.purity(),
            purity_out,
        })
    }
}

/// Estimates from already acquired tensors, in [`Acquisition::ALL`] order.
pub fn analyze(tensors: &[CoincidenceTensor; 6]) -> Result<(CalibrationRecord, ShiftRecord, EstimateSet)> {
    let [hv, vh, main, nc1, nc2, nc3] = tensors;
    let shift = shift_correction(nc1, nc2, nc3)?;
    let cal = calibrate(hv, vh)?.with_shift(&shift);
    let estimates = estimate_all(&moments(main), &cal)?;
    Ok((cal, shift, estimates))
}

/// Everything one protocol run produces.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub delta: f64,
    pub tensors: [CoincidenceTensor; 6],
    pub calibration: CalibrationRecord,
    pub shift: ShiftRecord,
    pub estimates: EstimateSet,
    pub theory: TheoryRecord,
}

impl PointResult {
    pub fn record(&self) -> EstimateRecord {
        EstimateRecord::new(self.delta, &self.estimates)
    }
}

/// Runs the six acquisitions at `delta` and the full estimation chain.
pub fn run_protocol(cfg: &ExperimentConfig, delta: f64) -> Result<PointResult> {
    cfg.validate()?;
    let mut tensors = Vec::with_capacity(6);
    for acq in Acquisition::ALL {
        tensors.push(acquire(cfg, delta, acq)?);
    }
    let tensors: [CoincidenceTensor; 6] = tensors.try_into().expect("six acquisitions");
    let (calibration, shift, estimates) = analyze(&tensors)?;
    let theory = TheoryRecord::new(cfg, delta)?;
    Ok(PointResult { delta, tensors, calibration, shift, estimates, theory })
}
