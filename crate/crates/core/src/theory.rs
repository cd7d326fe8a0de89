//! Exact quantum predictions for every quantity the weak-measurement
//! experiment estimates, and the covariance-matrix chain that yields the
//! relativistic-independence (RI) bound.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::axes::{Coordinate, PerCoordinate};
use crate::error::{Error, Result};
use crate::qcore::{
    expectation, pauli_direction, projector, tensor_product, ComplexMatrix, Party, PolarizationState,
};

/// Couplings above this fraction of the pointer width are rejected.
pub const MAX_G_OVER_SIGMA: f64 = 0.5;
/// Upper edge of the weak regime; larger couplings produce a warning.
pub const WEAK_G_OVER_SIGMA: f64 = 0.2;
/// Standard deviations below this make Pearson coefficients undefined.
pub const DEGENERATE_STD: f64 = 1e-8;

/// Measurement angles and pointer couplings of one acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSettings {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub delta: f64,
    /// Coupling length per pointer coordinate, same unit as `sigma`.
    pub g: PerCoordinate<f64>,
    pub sigma: f64,
}

impl MeasurementSettings {
    pub fn new(angles: [f64; 4], delta: f64, g: PerCoordinate<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("pointer width {sigma} must be positive")));
        }
        for (c, &gc) in Coordinate::ALL.iter().zip(&g) {
            if !(gc >= 0.0) || !gc.is_finite() {
                return Err(Error::InvalidParameter(format!("coupling {} = {gc} must be >= 0", c.label())));
            }
            if gc / sigma > MAX_G_OVER_SIGMA {
                return Err(Error::InvalidParameter(format!(
                    "coupling {} has g/sigma = {:.3} above {MAX_G_OVER_SIGMA}",
                    c.label(),
                    gc / sigma
                )));
            }
        }
        let [alpha1, alpha2, beta1, beta2] = angles;
        Ok(Self { alpha1, alpha2, beta1, beta2, delta, g, sigma })
    }

    /// Bases that saturate the Tsirelson bound at `delta = 0`, with the
    /// second measurement of each party rotated by the mismatch `delta`:
    /// `α1 = 0, α2 = π/4 + δ, β1 = π/8, β2 = 3π/8 + δ`.
    pub fn standard(delta: f64, g_over_sigma: f64, sigma: f64) -> Result<Self> {
        Self::new(
            [0.0, FRAC_PI_4 + delta, FRAC_PI_8, 3.0 * FRAC_PI_8 + delta],
            delta,
            [g_over_sigma * sigma; 4],
            sigma,
        )
    }

    /// Projector angle of the coupling acting on `coord`.
    pub fn angle(&self, coord: Coordinate) -> f64 {
        match coord {
            Coordinate::XA => self.alpha1,
            Coordinate::YA => self.alpha2,
            Coordinate::XB => self.beta1,
            Coordinate::YB => self.beta2,
        }
    }

    pub fn angles(&self) -> [f64; 4] {
        [self.alpha1, self.alpha2, self.beta1, self.beta2]
    }

    /// Couplings outside the weak regime, as human-readable notes.
    pub fn weak_regime_warnings(&self) -> Vec<String> {
        Coordinate::ALL
            .iter()
            .filter(|c| self.g[c.index()] / self.sigma > WEAK_G_OVER_SIGMA + 1e-12)
            .map(|c| {
                format!(
                    "coupling {} has g/sigma = {:.3}, beyond the weak regime ({WEAK_G_OVER_SIGMA})",
                    c.label(),
                    self.g[c.index()] / self.sigma
                )
            })
            .collect()
    }
}

fn alice(op: &ComplexMatrix) -> ComplexMatrix {
    tensor_product(op, &ComplexMatrix::identity(2))
}

fn bob(op: &ComplexMatrix) -> ComplexMatrix {
    tensor_product(&ComplexMatrix::identity(2), op)
}

fn ev(rho: &PolarizationState, obs: &ComplexMatrix) -> f64 {
    expectation(rho.rho(), obs).expect("Hermitian 4x4 observable")
}

/// `Tr[ρ Π(α) ⊗ Π(β)]`, the strong-measurement target of the weak cross
/// correlation.
pub fn correlator(rho: &PolarizationState, alpha: f64, beta: f64) -> f64 {
    ev(rho, &tensor_product(&projector(alpha), &projector(beta)))
}

/// `⟨σ(α) ⊗ σ(β)⟩` for dichotomic ±1 observables.
pub fn dichotomic_correlator(rho: &PolarizationState, alpha: f64, beta: f64) -> f64 {
    ev(rho, &tensor_product(&pauli_direction(alpha), &pauli_direction(beta)))
}

/// Bell-CHSH parameter with the sign pattern measured by the weak
/// couplings: `E11 - E12 + E21 + E22`.
pub fn chsh_theory(rho: &PolarizationState, s: &MeasurementSettings) -> f64 {
    let e = |a, b| dichotomic_correlator(rho, a, b);
    e(s.alpha1, s.beta1) - e(s.alpha1, s.beta2) + e(s.alpha2, s.beta1) + e(s.alpha2, s.beta2)
}

/// Symmetrized covariance `⟨{Π1, Π2}⟩/2 - ⟨Π1⟩⟨Π2⟩` of Alice's projectors.
pub fn rq_theory(rho: &PolarizationState, alpha1: f64, alpha2: f64) -> f64 {
    let p1 = projector(alpha1);
    let p2 = projector(alpha2);
    let anti = p1.matmul(&p2).unwrap().add(&p2.matmul(&p1).unwrap()).unwrap().scale_real(0.5);
    ev(rho, &alice(&anti)) - ev(rho, &alice(&p1)) * ev(rho, &alice(&p2))
}

fn projector_std(rho: &PolarizationState, party: Party, theta: f64) -> f64 {
    let p = projector(theta);
    let mean = match party {
        Party::A => ev(rho, &alice(&p)),
        Party::B => ev(rho, &bob(&p)),
    };
    (mean - mean * mean).max(0.0).sqrt()
}

/// Local-correlation term: half the Pearson coefficient of Alice's two
/// projectors.
pub fn delta_theory(rho: &PolarizationState, s: &MeasurementSettings) -> Result<f64> {
    let d1 = projector_std(rho, Party::A, s.alpha1);
    let d2 = projector_std(rho, Party::A, s.alpha2);
    if d1 < DEGENERATE_STD || d2 < DEGENERATE_STD {
        return Err(Error::Degenerate(format!(
            "Alice projector standard deviations {d1:e}, {d2:e}"
        )));
    }
    Ok(rq_theory(rho, s.alpha1, s.alpha2) / (2.0 * d1 * d2))
}

/// `|B / 2√2|² + Δ²`.
pub fn ri_theory(rho: &PolarizationState, s: &MeasurementSettings) -> Result<f64> {
    let b = chsh_theory(rho, s);
    let delta = delta_theory(rho, s)?;
    Ok((b / (2.0 * SQRT_2)).powi(2) + delta * delta)
}

/// Closed forms for the Werner family at the default bases.
pub fn werner_curves(visibility: f64, delta: f64) -> (f64, f64, f64) {
    let b = -SQRT_2 * visibility * (1.0 + (2.0 * delta).cos());
    let d = -(2.0 * delta).sin() / 2.0;
    (b, d, (b / (2.0 * SQRT_2)).powi(2) + d * d)
}

/// One inequality `lhs <= rhs` of the bound derivation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl ChainCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Correlation-normalized part of the report; absent at degenerate
/// variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationChain {
    /// `pearson[j][i]`: Pearson coefficient of Bob's `B_{j+1}` and Alice's `A_{i+1}`.
    pub pearson: [[f64; 2]; 2],
    /// `r / (Δ_A1 Δ_A2)`.
    pub normalized_r: f64,
    /// CHSH combination of Pearson coefficients.
    pub chsh_pearson: f64,
    pub checks: Vec<ChainCheck>,
}

/// Covariance matrices for dichotomic observables `A_i = σ(α_i)`,
/// `B_j = σ(β_j)` with `r = r^Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    /// Rows/columns ordered `B1, B2, A1, A2`.
    pub lambda_full: [[f64; 4]; 4],
    /// Indexed by Bob's choice; rows/columns `B_j, A1, A2`.
    pub lambda_sub: [[[f64; 3]; 3]; 2],
    pub rq: f64,
    /// Smallest eigenvalue of `lambda_full`, `lambda_sub[0]`, `lambda_sub[1]`, `Λ_A`.
    pub min_eigenvalues: [f64; 4],
    pub correlation: Option<CorrelationChain>,
}

impl CovarianceReport {
    pub fn is_defined(&self) -> bool {
        self.correlation.is_some()
    }
}

fn min_eigenvalue<const N: usize>(m: &[[f64; N]; N]) -> f64 {
    let flat: Vec<f64> = m.iter().flatten().copied().collect();
    ComplexMatrix::from_real(N, N, &flat)
        .expect("square")
        .hermitian_eigenvalues()
        .expect("square")[0]
}

pub fn covariance_report(rho: &PolarizationState, s: &MeasurementSettings) -> CovarianceReport {
    // Operator order: B1, B2, A1, A2.
    let ops = [
        bob(&pauli_direction(s.beta1)),
        bob(&pauli_direction(s.beta2)),
        alice(&pauli_direction(s.alpha1)),
        alice(&pauli_direction(s.alpha2)),
    ];
    let means: Vec<f64> = ops.iter().map(|o| ev(rho, o)).collect();
    let mut full = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let prod = ops[i].matmul(&ops[j]).unwrap();
            let sym = prod.add(&ops[j].matmul(&ops[i]).unwrap()).unwrap().scale_real(0.5);
            full[i][j] = ev(rho, &sym) - means[i] * means[j];
        }
    }
    let sub = |b: usize| -> [[f64; 3]; 3] {
        let idx = [b, 2, 3];
        let mut m = [[0.0; 3]; 3];
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                m[r][c] = full[i][j];
            }
        }
        m
    };
    let lambda_sub = [sub(0), sub(1)];
    let lambda_a = [[full[2][2], full[2][3]], [full[3][2], full[3][3]]];
    let rq = full[2][3];
    let min_eigenvalues = [
        min_eigenvalue(&full),
        min_eigenvalue(&lambda_sub[0]),
        min_eigenvalue(&lambda_sub[1]),
        min_eigenvalue(&lambda_a),
    ];

    let stds: Vec<f64> = (0..4).map(|i| full[i][i].max(0.0).sqrt()).collect();
    let correlation = if stds.iter().all(|&d| d >= DEGENERATE_STD) {
        let mut pearson = [[0.0; 2]; 2];
        for (j, row) in pearson.iter_mut().enumerate() {
            for (i, p) in row.iter_mut().enumerate() {
                *p = full[j][2 + i] / (stds[j] * stds[2 + i]);
            }
        }
        let rt = rq / (stds[2] * stds[3]);
        // Sign attached to Alice's second setting for Bob's choice j, so
        // that the chain bounds E11 - E12 + E21 + E22.
        let signs = [1.0, -1.0];
        let mut checks = Vec::with_capacity(4);
        let mut root_sum = 0.0;
        let mut chsh = 0.0;
        for j in 0..2 {
            let s_j = signs[j];
            let combo = pearson[j][0] * s_j + pearson[j][1];
            chsh += combo;
            let rhs = 2.0 * (1.0 + s_j * rt);
            checks.push(ChainCheck {
                name: format!("schur_projection_j{}", j + 1),
                lhs: combo * combo,
                rhs,
            });
            root_sum += rhs.max(0.0).sqrt();
        }
        checks.push(ChainCheck { name: "chsh_square_root_sum".into(), lhs: chsh.abs(), rhs: root_sum });
        let ri = (chsh / (2.0 * SQRT_2)).powi(2) + (rt / 2.0).powi(2);
        checks.push(ChainCheck { name: "ri_bound".into(), lhs: ri, rhs: 1.0 });
        Some(CorrelationChain { pearson, normalized_r: rt, chsh_pearson: chsh, checks })
    } else {
        None
    };

    CovarianceReport { lambda_full: full, lambda_sub, rq, min_eigenvalues, correlation }
}

/// Decoherence parameter `Ω = 1 - exp(-g²/8σ²)`.
pub fn omega(g: f64, sigma: f64) -> f64 {
    -(-(g * g) / (8.0 * sigma * sigma)).exp_m1()
}

/// Second-order expansion of the output polarization purity around `Ω = 0`
/// for a pure singlet input with equal couplings.
pub fn purity_expansion(omega: f64, alpha1: f64, alpha2: f64, beta1: f64, beta2: f64) -> f64 {
    let c = |x: f64| (4.0 * x).cos();
    let angular = c(alpha1 - alpha2)
        + c(alpha1 - beta1)
        + c(alpha2 - beta1)
        + c(alpha1 - beta2)
        + c(alpha2 - beta2)
        + c(beta1 - beta2);
    1.0 - 4.0 * omega + 0.5 * omega * omega * (22.0 + angular)
}
