use num_complex::Complex64;

use crate::error::Result;
use crate::qcore::{ComplexMatrix, PolarizationState};

use super::branch::Mixture;

/// Two-photon polarization state after tracing out all pointer modes,
/// with its purity `Tr ρ²`.
pub fn reduced_polarization_state(mixture: &Mixture) -> Result<(PolarizationState, f64)> {
    let mut rho = ComplexMatrix::zeros(4, 4);
    for (w, s) in mixture.components() {
        let vecs: Vec<[Complex64; 4]> = (0..s.branches().len()).map(|k| s.polarization_vector(k)).collect();
        for (k, bk) in s.branches().iter().enumerate() {
            for (l, bl) in s.branches().iter().enumerate() {
                let c = bk.amplitude * bl.amplitude.conj() * (w * s.overlap_product(k, l, None));
                for i in 0..4 {
                    for j in 0..4 {
                        let v = rho.get(i, j) + c * vecs[k][i] * vecs[l][j].conj();
                        rho.set(i, j, v);
                    }
                }
            }
        }
    }
    // Remove rounding asymmetry before validation.
    let rho = rho.add(&rho.adjoint())?.scale_real(0.5);
    let state = PolarizationState::from_matrix(rho)?;
    let purity = state.purity();
    Ok((state, purity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axes::Coordinate;
    use crate::qcore::{projector, tensor_product};
    use crate::theory::{omega, MeasurementSettings};
    use crate::wmsim::branch::initial_state;

    /// Tracing one pointer that was coupled once dephases the polarization
    /// in the eigenbasis of that coupling's projector.
    fn dephase(rho: &ComplexMatrix, c: Coordinate, theta: f64, overlap: f64) -> ComplexMatrix {
        let p1 = projector(theta);
        let p0 = ComplexMatrix::identity(2).sub(&p1).unwrap();
        let lift = |p: &ComplexMatrix| match c.party() {
            crate::qcore::Party::A => tensor_product(p, &ComplexMatrix::identity(2)),
            crate::qcore::Party::B => tensor_product(&ComplexMatrix::identity(2), p),
        };
        let (p, q) = (lift(&p1), lift(&p0));
        let sand = |x: &ComplexMatrix, y: &ComplexMatrix| x.matmul(rho).unwrap().matmul(y).unwrap();
        sand(&p, &p)
            .add(&sand(&q, &q))
            .unwrap()
            .add(&sand(&p, &q).add(&sand(&q, &p)).unwrap().scale_real(overlap))
            .unwrap()
    }

    fn channel_oracle(v: f64, s: &MeasurementSettings) -> ComplexMatrix {
        let mut rho = PolarizationState::werner(v).unwrap().rho().clone();
        for c in Coordinate::ALL {
            let g = s.g[c.index()];
            rho = dephase(&rho, c, s.angle(c), (-(g * g) / (8.0 * s.sigma * s.sigma)).exp());
        }
        rho
    }

    #[test]
    fn matches_dephasing_channel_oracle() {
        for &(v, delta, gs) in &[(1.0, 0.0, 0.2), (0.983, 0.3, 0.2), (0.5, -0.7, 0.45)] {
            let s = MeasurementSettings::standard(delta, gs, 3.0).unwrap();
            let mix = initial_state(v, 3.0).unwrap().apply_settings(&s).unwrap();
            let (state, _) = reduced_polarization_state(&mix).unwrap();
            let diff = state.rho().max_abs_diff(&channel_oracle(v, &s));
            assert!(diff < 1e-13, "V={v} δ={delta}: {diff}");
        }
    }

    #[test]
    fn zero_coupling_keeps_input_purity() {
        let s = MeasurementSettings::standard(0.2, 0.0, 3.0).unwrap();
        let mix = initial_state(0.8, 3.0).unwrap().apply_settings(&s).unwrap();
        let (_, p) = reduced_polarization_state(&mix).unwrap();
        let input = PolarizationState::werner(0.8).unwrap().purity();
        assert!((p - input).abs() < 1e-13);
    }

    #[test]
    fn weak_singlet_purity_near_first_order_value() {
        let s = MeasurementSettings::standard(0.0, 0.2, 3.0).unwrap();
        let mix = initial_state(1.0, 3.0).unwrap().apply_settings(&s).unwrap();
        let (_, p) = reduced_polarization_state(&mix).unwrap();
        let om = omega(0.6, 3.0);
        assert!((om - 0.004_987_5).abs() < 1e-6);
        assert!((p - (1.0 - 4.0 * om)).abs() < 2.0 * om * om * 11.0, "purity {p}");
        assert!((p - 0.9802).abs() < 5e-4, "purity {p}");
    }

    #[test]
    fn werner_output_purity_near_point_nine_six() {
        let s = MeasurementSettings::standard(0.0, 0.2, 3.0).unwrap();
        let mix = initial_state(0.983, 3.0).unwrap().apply_settings(&s).unwrap();
        let (_, p) = reduced_polarization_state(&mix).unwrap();
        let input = PolarizationState::werner(0.983).unwrap().purity();
        assert!((input - 0.974_72).abs() < 1e-5, "input purity {input}");
        assert!((0.955..=0.965).contains(&p), "output purity {p}");
    }
}
