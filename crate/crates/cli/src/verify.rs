//! Verification batteries: the covariance-matrix bound chain on random
//! states, and the order of the purity expansion.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write;

use rand::Rng;
use riwm_core::qcore::{random_density_matrix, PolarizationState};
use riwm_core::theory::{chsh_theory, covariance_report, omega, purity_expansion, ri_theory, MeasurementSettings};
use riwm_core::wmsim::{initial_state, reduced_polarization_state, stream_rng};

use crate::error::Result;

/// Tolerance of every inequality in the bound battery.
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// Worst cases over the random ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSummary {
    pub states: usize,
    /// Smallest eigenvalue over all covariance matrices.
    pub min_eigenvalue: f64,
    /// Smallest `rhs - lhs` per chain inequality, by name.
    pub chain_margins: Vec<(String, f64)>,
    pub max_abs_chsh: f64,
    pub ri_range: (f64, f64),
    /// States whose Alice variances vanish, so the chain is undefined.
    pub degenerate: usize,
}

impl BoundSummary {
    pub fn eigenvalues_ok(&self) -> bool {
        self.min_eigenvalue >= -BOUND_TOLERANCE
    }

    pub fn chain_ok(&self) -> bool {
        !self.chain_margins.is_empty() && self.chain_margins.iter().all(|(_, m)| *m >= -BOUND_TOLERANCE)
    }

    pub fn tsirelson_ok(&self) -> bool {
        self.max_abs_chsh <= 2.0 * SQRT_2 + BOUND_TOLERANCE
    }

    pub fn ri_ok(&self) -> bool {
        self.ri_range.0 >= 0.0 && self.ri_range.1 <= 1.0 + BOUND_TOLERANCE
    }

    pub fn passed(&self) -> bool {
        self.eigenvalues_ok() && self.chain_ok() && self.tsirelson_ok() && self.ri_ok()
    }
}

/// Random Ginibre states with uniformly random real-plane angles.
pub fn bound_battery(states: usize, seed: u64) -> Result<BoundSummary> {
    let mut rng = stream_rng(seed, "verify-bounds");
    let mut s = BoundSummary {
        states,
        min_eigenvalue: f64::INFINITY,
        chain_margins: Vec::new(),
        max_abs_chsh: 0.0,
        ri_range: (f64::INFINITY, f64::NEG_INFINITY),
        degenerate: 0,
    };
    for _ in 0..states {
        let rho = PolarizationState::from_matrix(random_density_matrix(&mut rng, 4))?;
        let angles: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..PI));
        let settings = MeasurementSettings::new(angles, 0.0, [0.0; 4], 1.0)?;
        let report = covariance_report(&rho, &settings);
        s.min_eigenvalue = report.min_eigenvalues.iter().copied().fold(s.min_eigenvalue, f64::min);
        s.max_abs_chsh = s.max_abs_chsh.max(chsh_theory(&rho, &settings).abs());
        match &report.correlation {
            Some(chain) => {
                for c in &chain.checks {
                    match s.chain_margins.iter_mut().find(|(n, _)| *n == c.name) {
                        Some((_, m)) => *m = m.min(c.margin()),
                        None => s.chain_margins.push((c.name.clone(), c.margin())),
                    }
                }
                let ri = ri_theory(&rho, &settings)?;
                s.ri_range = (s.ri_range.0.min(ri), s.ri_range.1.max(ri));
            }
            None => s.degenerate += 1,
        }
    }
    Ok(s)
}

/// Exact purity against the second-order expansion at one coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityPoint {
    pub g_over_sigma: f64,
    pub omega: f64,
    pub exact: f64,
    pub expansion: f64,
}

impl PurityPoint {
    pub fn residual(&self) -> f64 {
        self.exact - self.expansion
    }
}

/// Pure singlet at the default bases and zero mismatch, all four
/// couplings equal to `g_over_sigma · σ`.
pub fn purity_point(g_over_sigma: f64) -> Result<PurityPoint> {
    let sigma = 1.0;
    let s = MeasurementSettings::standard(0.0, g_over_sigma, sigma)?;
    let coupled = initial_state(1.0, sigma)?.apply_settings(&s)?;
    let (_, exact) = reduced_polarization_state(&coupled)?;
    let om = omega(g_over_sigma * sigma, sigma);
    let [a1, a2, b1, b2] = s.angles();
    Ok(PurityPoint { g_over_sigma, omega: om, exact, expansion: purity_expansion(om, a1, a2, b1, b2) })
}

/// Coupling whose decoherence parameter is half that of `g_over_sigma`.
pub fn half_omega_coupling(g_over_sigma: f64) -> f64 {
    let om = omega(g_over_sigma, 1.0);
    (-8.0 * (-0.5 * om).ln_1p()).sqrt()
}

/// Rounding allowance for the zero-coupling comparison, where both sides
/// are 1 up to the last bits of the trace computation.
pub const ZERO_COUPLING_TOLERANCE: f64 = 1e-14;

/// Accepted range for the residual ratio when `Ω` halves (`2³ = 8`).
pub const OMEGA_HALVING_RANGE: (f64, f64) = (6.0, 10.0);

#[derive(Debug, Clone, PartialEq)]
pub struct PuritySummary {
    /// Points at the requested couplings, in order.
    pub points: Vec<PurityPoint>,
    /// `ln(r_i / r_{i+1}) / ln(Ω_i / Ω_{i+1})` for neighbouring points.
    pub exponents: Vec<f64>,
    /// `(g/σ, residual ratio)` when `Ω` is halved from each point.
    pub omega_halving: Vec<(f64, f64)>,
    /// `|exact - expansion|` at zero coupling.
    pub zero_coupling_gap: f64,
}

impl PuritySummary {
    pub fn passed(&self) -> bool {
        let (lo, hi) = OMEGA_HALVING_RANGE;
        self.zero_coupling_gap <= ZERO_COUPLING_TOLERANCE
            && self.exponents.iter().all(|e| (2.5..=3.5).contains(e))
            && self.omega_halving.iter().all(|(_, r)| (lo..=hi).contains(r))
    }
}

pub fn purity_battery(g_over_sigma: &[f64]) -> Result<PuritySummary> {
    let points = g_over_sigma.iter().map(|&r| purity_point(r)).collect::<Result<Vec<_>>>()?;
    let exponents = points
        .windows(2)
        .map(|w| (w[1].residual() / w[0].residual()).ln() / (w[1].omega / w[0].omega).ln())
        .collect();
    let omega_halving = points
        .iter()
        .map(|p| Ok((p.g_over_sigma, p.residual() / purity_point(half_omega_coupling(p.g_over_sigma))?.residual())))
        .collect::<Result<Vec<_>>>()?;
    let zero = purity_point(0.0)?;
    Ok(PuritySummary { points, exponents, omega_halving, zero_coupling_gap: (zero.exact - zero.expansion).abs() })
}

/// Couplings of the default purity test.
pub const PURITY_COUPLINGS: [f64; 3] = [0.05, 0.1, 0.2];

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Plain-text report of both batteries.
pub fn render_report(seed: u64, bounds: &BoundSummary, purity: &PuritySummary) -> String {
    let mut r = String::new();
    let _ = writeln!(r, "riwm verification report");
    let _ = writeln!(r, "seed = {seed}");
    let _ = writeln!(r);
    let _ = writeln!(r, "[bound chain] {} random two-qubit states, random real-plane angles", bounds.states);
    let _ = writeln!(
        r,
        "{} covariance matrices PSD: min eigenvalue {:.3e} (tolerance {BOUND_TOLERANCE:e})",
        verdict(bounds.eigenvalues_ok()),
        bounds.min_eigenvalue
    );
    for (name, margin) in &bounds.chain_margins {
        let _ = writeln!(r, "{} {name}: worst margin rhs - lhs = {margin:.3e}", verdict(*margin >= -BOUND_TOLERANCE));
    }
    let _ = writeln!(r, "{} Tsirelson: max |B| = {:.12}", verdict(bounds.tsirelson_ok()), bounds.max_abs_chsh);
    let _ = writeln!(
        r,
        "{} RI in [0, 1]: observed [{:.6e}, {:.12}]",
        verdict(bounds.ri_ok()),
        bounds.ri_range.0,
        bounds.ri_range.1
    );
    let _ = writeln!(r, "degenerate states skipped: {}", bounds.degenerate);
    let _ = writeln!(r);
    let _ = writeln!(r, "[purity expansion] pure singlet, default bases, zero mismatch");
    let _ = writeln!(r, "g/sigma omega exact expansion residual");
    for p in &purity.points {
        let _ = writeln!(
            r,
            "{} {:.6e} {:.12} {:.12} {:.6e}",
            p.g_over_sigma,
            p.omega,
            p.exact,
            p.expansion,
            p.residual()
        );
    }
    for (w, e) in purity.points.windows(2).zip(&purity.exponents) {
        let _ = writeln!(
            r,
            "{} residual order in omega between g/sigma {} and {}: {e:.4} (expected 3)",
            verdict((2.5..=3.5).contains(e)),
            w[0].g_over_sigma,
            w[1].g_over_sigma
        );
    }
    let (lo, hi) = OMEGA_HALVING_RANGE;
    for (g, ratio) in &purity.omega_halving {
        let _ = writeln!(
            r,
            "{} residual ratio when omega halves from g/sigma {g}: {ratio:.4} (range [{lo}, {hi}])",
            verdict((lo..=hi).contains(ratio))
        );
    }
    let _ = writeln!(
        r,
        "{} zero coupling: |exact - expansion| = {:e}",
        verdict(purity.zero_coupling_gap <= ZERO_COUPLING_TOLERANCE),
        purity.zero_coupling_gap
    );
    let _ = writeln!(r);
    let _ = writeln!(r, "overall: {}", verdict(bounds.passed() && purity.passed()));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_battery_passes() {
        let b = bound_battery(300, 1).unwrap();
        assert!(b.passed(), "{b:?}");
        assert_eq!(b.chain_margins.len(), 4);
    }

    #[test]
    fn purity_battery_confirms_third_order() {
        let p = purity_battery(&PURITY_COUPLINGS).unwrap();
        assert!(p.passed(), "{p:?}");
        let text = render_report(1, &bound_battery(10, 1).unwrap(), &p);
        assert!(text.ends_with("overall: PASS\n"), "{text}");
    }

    #[test]
    fn half_omega_coupling_halves_omega() {
        let g = half_omega_coupling(0.2);
        assert!((omega(g, 1.0) - 0.5 * omega(0.2, 1.0)).abs() < 1e-16);
    }
}
