use serde::{Deserialize, Serialize};

use crate::axes::{Coordinate, PerCoordinate};
use crate::error::{Error, Result};

use super::calibration::CalibrationRecord;
use super::moments::{Feature, MomentSet, N_FEATURES};

/// First-order sensitivity of an estimate to the feature means and to every
/// calibration constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gradient {
    pub features: [f64; N_FEATURES],
    pub center0: PerCoordinate<f64>,
    pub center1: PerCoordinate<f64>,
    pub hwp_shift: PerCoordinate<f64>,
}

impl Gradient {
    pub fn zero() -> Self {
        Self { features: [0.0; N_FEATURES], center0: [0.0; 4], center1: [0.0; 4], hwp_shift: [0.0; 4] }
    }

    /// Converts derivatives with respect to the reference position `c` and
    /// the coupling `g` into derivatives with respect to the fitted centers.
    fn from_reference(features: [f64; N_FEATURES], dc: [f64; 4], dg: [f64; 4]) -> Self {
        Self {
            features,
            center0: std::array::from_fn(|i| dc[i] - dg[i]),
            center1: dg,
            hwp_shift: dc,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            features: self.features.map(|x| k * x),
            center0: self.center0.map(|x| k * x),
            center1: self.center1.map(|x| k * x),
            hwp_shift: self.hwp_shift.map(|x| k * x),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let add4 = |a: [f64; 4], b: [f64; 4]| std::array::from_fn(|i| a[i] + b[i]);
        Self {
            features: std::array::from_fn(|i| self.features[i] + other.features[i]),
            center0: add4(self.center0, other.center0),
            center1: add4(self.center1, other.center1),
            hwp_shift: add4(self.hwp_shift, other.hwp_shift),
        }
    }

    /// Delta-method standard error from the per-event feature covariance,
    /// `sqrt(∇ᵀ Σ_φ ∇ / N)`.
    pub fn sigma_stat(&self, m: &MomentSet) -> f64 {
        let mut q = 0.0;
        for i in 0..N_FEATURES {
            for j in 0..N_FEATURES {
                q += self.features[i] * m.feature_covariance[i][j] * self.features[j];
            }
        }
        (q.max(0.0) / m.n_events as f64).sqrt()
    }

    /// Calibration contribution, treating every fitted center and shift as
    /// independent.
    pub fn sigma_cal(&self, cal: &CalibrationRecord) -> f64 {
        (0..4)
            .map(|i| {
                (self.center0[i] * cal.sigma_center0[i]).powi(2)
                    + (self.center1[i] * cal.sigma_center1[i]).powi(2)
                    + (self.hwp_shift[i] * cal.sigma_hwp_shift[i]).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Alternative statistical error that perturbs each photon coordinate
    /// independently: per-axis variances plus same-axis covariances between
    /// the two parties. Reported for comparison only; it counts the
    /// fluctuation of product features once per factor.
    pub fn sigma_stat_per_coordinate(&self, m: &MomentSet) -> f64 {
        let f = &self.features;
        let cx = |a, b| f[Feature::cross_index(a, b)];
        let s = f[Feature::SEQUENTIAL_A_INDEX];
        // Per-event derivative along coordinate K is a_K + Σ_j b_Kj ζ_j.
        let a = [f[0], f[1], f[2], f[3]];
        let b = [
            [0.0, s, cx(0, 0), cx(0, 1)],
            [s, 0.0, cx(1, 0), cx(1, 1)],
            [cx(0, 0), cx(1, 0), 0.0, 0.0],
            [cx(0, 1), cx(1, 1), 0.0, 0.0],
        ];
        let lin = |k: usize| (0..4).map(|j| b[k][j] * m.mean[j]).sum::<f64>();
        let e_dd = |k: usize, l: usize| {
            let mut v = a[k] * a[l] + a[k] * lin(l) + a[l] * lin(k);
            for i in 0..4 {
                for j in 0..4 {
                    v += b[k][i] * b[l][j] * m.second[i][j];
                }
            }
            v
        };
        let mut q: f64 = (0..4).map(|k| e_dd(k, k) * m.covariance[k][k]).sum();
        for (k, l) in [(0, 2), (2, 0), (1, 3), (3, 1)] {
            q += e_dd(k, l) * m.covariance[k][l];
        }
        (q.max(0.0) / m.n_events as f64).sqrt()
    }
}

/// A value with its statistical, calibration and combined uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma_stat: f64,
    pub sigma_cal: f64,
    pub sigma_total: f64,
}

impl Estimate {
    pub fn new(value: f64, sigma_stat: f64, sigma_cal: f64) -> Self {
        Self { value, sigma_stat, sigma_cal, sigma_total: sigma_stat.hypot(sigma_cal) }
    }
}

/// An estimate together with the gradient its uncertainties came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagated {
    pub estimate: Estimate,
    pub gradient: Gradient,
}

impl Propagated {
    fn new(value: f64, gradient: Gradient, m: &MomentSet, cal: &CalibrationRecord) -> Self {
        Self { estimate: Estimate::new(value, gradient.sigma_stat(m), gradient.sigma_cal(cal)), gradient }
    }

    pub fn value(&self) -> f64 {
        self.estimate.value
    }
}

fn references(cal: &CalibrationRecord) -> Result<([f64; 4], [f64; 4])> {
    let c = Coordinate::ALL.map(|k| cal.offset(k));
    let g = cal.g_est;
    if let Some(k) = Coordinate::ALL.iter().find(|k| g[k.index()] == 0.0 || !g[k.index()].is_finite()) {
        return Err(Error::Degenerate(format!("coupling {} is zero", k.label())));
    }
    Ok((c, g))
}

/// Sign of the A-B correlator for Alice axis `a`, Bob axis `b`.
const CHSH_SIGNS: [[f64; 2]; 2] = [[1.0, -1.0], [1.0, 1.0]];

/// Bell-CHSH parameter from feature means and calibration:
/// `4 (Σ ± ŵ_ab / g_a g_b - û_yA / g_yA - û_xB / g_xB) + 2` with centered
/// positions `û = ⟨ζ⟩ - ζ̃_0 - ζ̃_shift`.
pub fn chsh_value(mu: &[f64; N_FEATURES], cal: &CalibrationRecord) -> Result<(f64, Gradient)> {
    let (c, g) = references(cal)?;
    let mut value = 2.0;
    let mut df = [0.0; N_FEATURES];
    let mut dc = [0.0; 4];
    let mut dg = [0.0; 4];
    #[allow(clippy::needless_range_loop)]
    for a in 0..2 {
        for b in 0..2 {
            let (ia, ib, fi) = (a, 2 + b, Feature::cross_index(a, b));
            let (ua, ub) = (mu[ia] - c[ia], mu[ib] - c[ib]);
            let w = mu[fi] - c[ib] * mu[ia] - c[ia] * mu[ib] + c[ia] * c[ib];
            let k = 4.0 * CHSH_SIGNS[a][b] / (g[ia] * g[ib]);
            value += k * w;
            df[fi] += k;
            df[ia] -= k * c[ib];
            df[ib] -= k * c[ia];
            dc[ia] -= k * ub;
            dc[ib] -= k * ua;
            dg[ia] -= k * w / g[ia];
            dg[ib] -= k * w / g[ib];
        }
    }
    for i in [Coordinate::YA.index(), Coordinate::XB.index()] {
        let u = mu[i] - c[i];
        let k = -4.0 / g[i];
        value += k * u;
        df[i] += k;
        dc[i] -= k;
        dg[i] -= k * u / g[i];
    }
    Ok((value, Gradient::from_reference(df, dc, dg)))
}

/// Shift-independent covariance `C_xy,A = ⟨X_A Y_A⟩ - ⟨X_A⟩⟨Y_A⟩`.
pub fn alice_covariance(mu: &[f64; N_FEATURES]) -> f64 {
    mu[Feature::SEQUENTIAL_A_INDEX] - mu[0] * mu[1]
}

/// `S_ζ,A = û (g - û)` for Alice's `x` (`axis = 0`) or `y` (`axis = 1`).
pub fn alice_spread(mu: &[f64; N_FEATURES], cal: &CalibrationRecord, axis: usize) -> f64 {
    let u = mu[axis] - cal.offset(Coordinate::ALL[axis]);
    u * (cal.g_est[axis] - u)
}

/// Local correlation term `Δ = C_xy,A / (2 sqrt(S_x,A S_y,A))`.
pub fn delta_value(mu: &[f64; N_FEATURES], cal: &CalibrationRecord) -> Result<(f64, Gradient)> {
    let (c, g) = references(cal)?;
    let u = [mu[0] - c[0], mu[1] - c[1]];
    let s = [u[0] * (g[0] - u[0]), u[1] * (g[1] - u[1])];
    if !(s[0] > 0.0 && s[1] > 0.0) {
        return Err(Error::Degenerate(format!("non-positive Alice spreads S_x = {}, S_y = {}", s[0], s[1])));
    }
    let cxy = alice_covariance(mu);
    let denom = 2.0 * (s[0] * s[1]).sqrt();
    let delta = cxy / denom;
    let mut df = [0.0; N_FEATURES];
    let mut dc = [0.0; 4];
    let mut dg = [0.0; 4];
    df[Feature::SEQUENTIAL_A_INDEX] = 1.0 / denom;
    for axis in 0..2 {
        let d_s = -delta / (2.0 * s[axis]);
        let ds_du = g[axis] - 2.0 * u[axis];
        df[axis] = -mu[1 - axis] / denom + d_s * ds_du;
        dc[axis] = -d_s * ds_du;
        dg[axis] = d_s * u[axis];
    }
    Ok((delta, Gradient::from_reference(df, dc, dg)))
}

/// Bell-CHSH estimate with statistical and calibration uncertainties.
pub fn chsh_estimate(m: &MomentSet, cal: &CalibrationRecord) -> Result<Propagated> {
    let (value, grad) = chsh_value(&m.features, cal)?;
    Ok(Propagated::new(value, grad, m, cal))
}

/// Local-correlation estimate; only Alice's features and constants enter.
pub fn delta_estimate(m: &MomentSet, cal: &CalibrationRecord) -> Result<Propagated> {
    let (value, grad) = delta_value(&m.features, cal)?;
    Ok(Propagated::new(value, grad, m, cal))
}

/// All five estimates of one acquisition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateSet {
    pub b: Propagated,
    pub delta: Propagated,
    pub ri: Propagated,
    pub ri_b: Propagated,
    pub ri_delta: Propagated,
}

/// `RI = (B / 2√2)² + Δ² = RI_B + RI_Δ`; every term's uncertainty comes from
/// its own joint gradient, so `σ_RI` keeps the correlation between the two
/// parts.
pub fn ri_estimate(b: &Propagated, delta: &Propagated, m: &MomentSet, cal: &CalibrationRecord) -> EstimateSet {
    let (bv, dv) = (b.value(), delta.value());
    let grad_b = b.gradient.scaled(bv / 4.0);
    let grad_d = delta.gradient.scaled(2.0 * dv);
    let ri_b = Propagated::new(bv * bv / 8.0, grad_b, m, cal);
    let ri_delta = Propagated::new(dv * dv, grad_d, m, cal);
    let ri = Propagated::new(ri_b.value() + ri_delta.value(), grad_b.plus(&grad_d), m, cal);
    EstimateSet { b: *b, delta: *delta, ri, ri_b, ri_delta }
}

/// Runs all estimators on one moment set.
pub fn estimate_all(m: &MomentSet, cal: &CalibrationRecord) -> Result<EstimateSet> {
    let b = chsh_estimate(m, cal)?;
    let d = delta_estimate(m, cal)?;
    Ok(ri_estimate(&b, &d, m, cal))
}

/// Flat record with one column per reported number, in table order.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub delta: f64,
    pub RI: f64,
    pub sigma_RI: f64,
    pub sigma_RI_stat: f64,
    pub sigma_RI_cal: f64,
    pub RI_B: f64,
    pub sigma_RI_B: f64,
    pub sigma_RI_B_stat: f64,
    pub sigma_RI_B_cal: f64,
    pub RI_Delta: f64,
    pub sigma_RI_Delta: f64,
    pub sigma_RI_Delta_stat: f64,
    pub sigma_RI_Delta_cal: f64,
    pub B: f64,
    pub sigma_B: f64,
    pub sigma_B_stat: f64,
    pub sigma_B_cal: f64,
    pub Delta: f64,
    pub sigma_Delta: f64,
    pub sigma_Delta_stat: f64,
    pub sigma_Delta_cal: f64,
}

impl EstimateRecord {
    pub const COLUMNS: [&'static str; 21] = [
        "delta",
        "RI",
        "sigma_RI",
        "sigma_RI_stat",
        "sigma_RI_cal",
        "RI_B",
        "sigma_RI_B",
        "sigma_RI_B_stat",
        "sigma_RI_B_cal",
        "RI_Delta",
        "sigma_RI_Delta",
        "sigma_RI_Delta_stat",
        "sigma_RI_Delta_cal",
        "B",
        "sigma_B",
        "sigma_B_stat",
        "sigma_B_cal",
        "Delta",
        "sigma_Delta",
        "sigma_Delta_stat",
        "sigma_Delta_cal",
    ];

    pub fn new(delta: f64, e: &EstimateSet) -> Self {
        let (ri, rb, rd, b, d) = (e.ri.estimate, e.ri_b.estimate, e.ri_delta.estimate, e.b.estimate, e.delta.estimate);
        Self {
            delta,
            RI: ri.value,
            sigma_RI: ri.sigma_total,
            sigma_RI_stat: ri.sigma_stat,
            sigma_RI_cal: ri.sigma_cal,
            RI_B: rb.value,
            sigma_RI_B: rb.sigma_total,
            sigma_RI_B_stat: rb.sigma_stat,
            sigma_RI_B_cal: rb.sigma_cal,
            RI_Delta: rd.value,
            sigma_RI_Delta: rd.sigma_total,
            sigma_RI_Delta_stat: rd.sigma_stat,
            sigma_RI_Delta_cal: rd.sigma_cal,
            B: b.value,
            sigma_B: b.sigma_total,
            sigma_B_stat: b.sigma_stat,
            sigma_B_cal: b.sigma_cal,
            Delta: d.value,
            sigma_Delta: d.sigma_total,
            sigma_Delta_stat: d.sigma_stat,
            sigma_Delta_cal: d.sigma_cal,
        }
    }

    /// Values in [`Self::COLUMNS`] order.
    pub fn values(&self) -> [f64; 21] {
        [
            self.delta,
            self.RI,
            self.sigma_RI,
            self.sigma_RI_stat,
            self.sigma_RI_cal,
            self.RI_B,
            self.sigma_RI_B,
            self.sigma_RI_B_stat,
            self.sigma_RI_B_cal,
            self.RI_Delta,
            self.sigma_RI_Delta,
            self.sigma_RI_Delta_stat,
            self.sigma_RI_Delta_cal,
            self.B,
            self.sigma_B,
            self.sigma_B_stat,
            self.sigma_B_cal,
            self.Delta,
            self.sigma_Delta,
            self.sigma_Delta_stat,
            self.sigma_Delta_cal,
        ]
    }
}
