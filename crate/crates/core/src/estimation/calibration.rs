use serde::{Deserialize, Serialize};

use crate::axes::{Coordinate, PerCoordinate, Stage};
use crate::error::{Error, Result};
use crate::qcore::Party;
use crate::wmsim::CoincidenceTensor;

use super::centers::{fit_centers, CenterFit};

/// Significance, in standard errors, a calibrated coupling must reach.
pub const CALIBRATION_SIGNIFICANCE: f64 = 3.0;

/// Metadata key naming the polarization input of an acquisition.
pub const INPUT_KEY: &str = "input";

/// Beam centers and couplings per coordinate, all in length units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    /// Center of the undisplaced distribution, `ζ̃_{K,0}`.
    pub center0: PerCoordinate<f64>,
    /// Center of the displaced distribution, `ζ̃_{K,1}`.
    pub center1: PerCoordinate<f64>,
    /// Wave-plate induced beam displacement, `ζ̃_{K,shift}`.
    pub hwp_shift: PerCoordinate<f64>,
    pub sigma_center0: PerCoordinate<f64>,
    pub sigma_center1: PerCoordinate<f64>,
    pub sigma_hwp_shift: PerCoordinate<f64>,
    /// `g = ζ̃_{K,1} - ζ̃_{K,0}`.
    pub g_est: PerCoordinate<f64>,
}

impl CalibrationRecord {
    /// Builds a record from fitted centers with no wave-plate shift.
    pub fn from_centers(c0: PerCoordinate<CenterFit>, c1: PerCoordinate<CenterFit>) -> Self {
        Self {
            center0: c0.map(|c| c.center),
            center1: c1.map(|c| c.center),
            hwp_shift: [0.0; 4],
            sigma_center0: c0.map(|c| c.uncertainty),
            sigma_center1: c1.map(|c| c.uncertainty),
            sigma_hwp_shift: [0.0; 4],
            g_est: std::array::from_fn(|i| c1[i].center - c0[i].center),
        }
    }

    /// Exact record for known beam centers and couplings, with zero
    /// uncertainties.
    pub fn exact(center0: PerCoordinate<f64>, g: PerCoordinate<f64>, hwp_shift: PerCoordinate<f64>) -> Self {
        Self {
            center0,
            center1: std::array::from_fn(|i| center0[i] + g[i]),
            hwp_shift,
            sigma_center0: [0.0; 4],
            sigma_center1: [0.0; 4],
            sigma_hwp_shift: [0.0; 4],
            g_est: g,
        }
    }

    pub fn with_shift(mut self, shift: &ShiftRecord) -> Self {
        self.hwp_shift = shift.shift;
        self.sigma_hwp_shift = shift.uncertainty;
        self
    }

    /// Standard error of `g_est`.
    pub fn sigma_g(&self) -> PerCoordinate<f64> {
        std::array::from_fn(|i| self.sigma_center0[i].hypot(self.sigma_center1[i]))
    }

    /// Reference position `ζ̃_{K,0} + ζ̃_{K,shift}` subtracted from raw
    /// positions.
    pub fn offset(&self, c: Coordinate) -> f64 {
        self.center0[c.index()] + self.hwp_shift[c.index()]
    }
}

/// Estimated wave-plate displacement per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRecord {
    pub shift: PerCoordinate<f64>,
    pub uncertainty: PerCoordinate<f64>,
}

fn check_input(t: &CoincidenceTensor, expected: &str) -> Result<()> {
    match t.meta.get(INPUT_KEY) {
        Some(v) if v != expected => Err(Error::AxisAssignment(format!(
            "calibration acquisition labeled '{v}' passed where '{expected}' was expected"
        ))),
        _ => Ok(()),
    }
}

/// Calibration from the `|H_A V_B⟩` and `|V_A H_B⟩` acquisitions taken with
/// crystals in and wave plates at zero. Stage-1 crystals displace `H` along
/// `x`, stage-2 crystals displace `V` along `y`.
pub fn calibrate(acq_hv: &CoincidenceTensor, acq_vh: &CoincidenceTensor) -> Result<CalibrationRecord> {
    check_input(acq_hv, "HV")?;
    check_input(acq_vh, "VH")?;
    let mut c0 = [CenterFit { center: 0.0, uncertainty: 0.0 }; 4];
    let mut c1 = c0;
    for c in Coordinate::ALL {
        // In |H_A V_B⟩ Alice is H and Bob is V.
        let (h_run, v_run) = match c.party() {
            Party::A => (acq_hv, acq_vh),
            Party::B => (acq_vh, acq_hv),
        };
        let (shifted, unshifted) = match c.stage() {
            Stage::First => (h_run, v_run),
            Stage::Second => (v_run, h_run),
        };
        c1[c.index()] = fit_centers(shifted, c)?;
        c0[c.index()] = fit_centers(unshifted, c)?;
    }
    let record = CalibrationRecord::from_centers(c0, c1);
    let sg = record.sigma_g();
    if record.sigma_center0.iter().chain(&record.sigma_center1).any(|&s| !(s > 0.0)) {
        return Err(Error::Degenerate("calibration center with zero spread across subsets".into()));
    }
    let negative: Vec<&str> = Coordinate::ALL
        .iter()
        .filter(|c| record.g_est[c.index()] < -CALIBRATION_SIGNIFICANCE * sg[c.index()])
        .map(|c| c.label())
        .collect();
    if !negative.is_empty() {
        return Err(Error::AxisAssignment(format!(
            "displacement points the wrong way on {}; are the H/V calibration inputs swapped?",
            negative.join(", ")
        )));
    }
    for c in Coordinate::ALL {
        let (g, s) = (record.g_est[c.index()], sg[c.index()]);
        if g.abs() < CALIBRATION_SIGNIFICANCE * s {
            return Err(Error::CalibrationFailed(format!(
                "{}: g = {g:.5} is below {CALIBRATION_SIGNIFICANCE} standard errors ({s:.5})",
                c.label()
            )));
        }
    }
    Ok(record)
}

/// Wave-plate displacement from the three crystals-out acquisitions: the
/// measurement-angle run minus the mean of the two zero-angle references.
pub fn shift_correction(
    at_measurement: &CoincidenceTensor,
    reference_hv: &CoincidenceTensor,
    reference_vh: &CoincidenceTensor,
) -> Result<ShiftRecord> {
    let mut shift = [0.0; 4];
    let mut uncertainty = [0.0; 4];
    for c in Coordinate::ALL {
        let m = fit_centers(at_measurement, c)?;
        let r1 = fit_centers(reference_hv, c)?;
        let r2 = fit_centers(reference_vh, c)?;
        shift[c.index()] = m.center - 0.5 * (r1.center + r2.center);
        uncertainty[c.index()] =
            (m.uncertainty.powi(2) + 0.25 * (r1.uncertainty.powi(2) + r2.uncertainty.powi(2))).sqrt();
    }
    Ok(ShiftRecord { shift, uncertainty })
}
