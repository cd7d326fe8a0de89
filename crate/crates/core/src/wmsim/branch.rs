use std::collections::HashMap;

use num_complex::Complex64;

use crate::axes::{Coordinate, PerCoordinate, Stage};
use crate::error::{Error, Result};
use crate::qcore::{bell_vectors, Party};
use crate::theory::MeasurementSettings;

use super::grid::pointer_overlap;

/// Branches whose squared amplitude falls below this are dropped.
const PRUNE_NORM_SQR: f64 = 1e-30;
const NORM_TOL: f64 = 1e-10;

/// Orthonormal polarization frame; `frame[k]` is basis vector `k` in `{H, V}`
/// components.
pub type Frame = [[Complex64; 2]; 2];

fn hv_frame() -> Frame {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    [[one, zero], [zero, one]]
}

/// Eigenframe of `Π(θ)`: index 0 is the eigenvalue-1 (transmitted) vector.
fn projector_frame(theta: f64) -> Frame {
    let (s, c) = theta.sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(s, 0.0)],
        [Complex64::new(-s, 0.0), Complex64::new(c, 0.0)],
    ]
}

/// One term of the joint polarization-pointer wavefunction: a product of
/// frame vectors and four displaced Gaussian pointers.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub amplitude: Complex64,
    pub pol_a: usize,
    pub pol_b: usize,
    /// Pointer displacement per coordinate in tensor order.
    pub shift: PerCoordinate<f64>,
}

/// Pure state of a photon pair and its four pointer modes, kept as a sum of
/// branches with distinct `(pol_a, pol_b, shift)` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchState {
    branches: Vec<Branch>,
    frame_a: Frame,
    frame_b: Frame,
    sigma: f64,
    applied: [bool; 4],
    offset: PerCoordinate<f64>,
}

impl BranchState {
    /// Polarization vector in the `{HH, HV, VH, VV}` basis with undisplaced
    /// pointers of width `sigma`.
    pub fn from_vector(psi: [Complex64; 4], sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("pointer width {sigma} must be positive")));
        }
        let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("state vector norm² {norm}")));
        }
        let branches = psi
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > PRUNE_NORM_SQR)
            .map(|(i, &amplitude)| Branch { amplitude, pol_a: i / 2, pol_b: i % 2, shift: [0.0; 4] })
            .collect();
        Ok(Self {
            branches,
            frame_a: hv_frame(),
            frame_b: hv_frame(),
            sigma,
            applied: [false; 4],
            offset: [0.0; 4],
        })
    }

    pub fn singlet(sigma: f64) -> Result<Self> {
        Self::from_vector(bell_vectors()[0], sigma)
    }

    /// Linear polarizations `θ_a ⊗ θ_b`; `(0, π/2)` is `|H_A V_B⟩`.
    pub fn product(theta_a: f64, theta_b: f64, sigma: f64) -> Result<Self> {
        let (sa, ca) = theta_a.sin_cos();
        let (sb, cb) = theta_b.sin_cos();
        let c = |x: f64| Complex64::new(x, 0.0);
        Self::from_vector([c(ca * cb), c(ca * sb), c(sa * cb), c(sa * sb)], sigma)
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn frame(&self, party: Party) -> &Frame {
        match party {
            Party::A => &self.frame_a,
            Party::B => &self.frame_b,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn offset(&self) -> PerCoordinate<f64> {
        self.offset
    }

    pub fn is_applied(&self, coord: Coordinate) -> bool {
        self.applied[coord.index()]
    }

    pub fn all_applied(&self) -> bool {
        self.applied.iter().all(|&a| a)
    }

    /// `Σ |amplitude|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.branches.iter().map(|b| b.amplitude.norm_sqr()).sum()
    }

    /// Two-photon polarization vector of branch `k` in `{HH, HV, VH, VV}`.
    pub fn polarization_vector(&self, k: usize) -> [Complex64; 4] {
        let b = &self.branches[k];
        let ea = self.frame_a[b.pol_a];
        let eb = self.frame_b[b.pol_b];
        [ea[0] * eb[0], ea[0] * eb[1], ea[1] * eb[0], ea[1] * eb[1]]
    }

    /// Unitary `exp(-i g Π(θ) ⊗ P_ζ)` on the pointer coordinate selected by
    /// `(party, stage)`: the `Π(θ) = 1` component is displaced by `g`.
    /// Couplings of one party act in the order they are applied.
    pub fn apply_weak_coupling(&self, party: Party, stage: Stage, theta: f64, g: f64) -> Result<Self> {
        let coord = Coordinate::new(party, stage);
        if !(g >= 0.0 && g.is_finite()) {
            return Err(Error::InvalidParameter(format!("coupling {} = {g} must be >= 0", coord.label())));
        }
        if !theta.is_finite() {
            return Err(Error::InvalidParameter(format!("angle {theta} for {}", coord.label())));
        }
        if self.is_applied(coord) {
            return Err(Error::DuplicateCoupling(coord.label().to_string()));
        }
        let old = *self.frame(party);
        let new = projector_frame(theta);
        // overlap[m][k] = ⟨new_m | old_k⟩
        let mut overlap = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (m, row) in overlap.iter_mut().enumerate() {
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = new[m][0].conj() * old[k][0] + new[m][1].conj() * old[k][1];
            }
        }
        let mut out = Merger::default();
        for b in &self.branches {
            for (m, row) in overlap.iter().enumerate() {
                let mut nb = b.clone();
                nb.amplitude *= match party {
                    Party::A => row[b.pol_a],
                    Party::B => row[b.pol_b],
                };
                match party {
                    Party::A => nb.pol_a = m,
                    Party::B => nb.pol_b = m,
                }
                if m == 0 {
                    nb.shift[coord.index()] += g;
                }
                out.push(nb);
            }
        }
        let mut state = self.clone();
        state.branches = out.finish();
        match party {
            Party::A => state.frame_a = new,
            Party::B => state.frame_b = new,
        }
        state.applied[coord.index()] = true;
        Ok(state)
    }

    /// All four couplings of `settings`, A before B, stage 1 before stage 2.
    pub fn apply_settings(&self, settings: &MeasurementSettings) -> Result<Self> {
        Coordinate::ALL.iter().try_fold(self.clone(), |st, &c| {
            st.apply_weak_coupling(c.party(), c.stage(), settings.angle(c), settings.g[c.index()])
        })
    }

    /// Rigid translation of every pointer by `shifts`, applied before pixel
    /// integration. Coverage is checked at the mixture level, see
    /// [`Mixture::inject_hwp_shift`].
    pub fn translated(&self, shifts: PerCoordinate<f64>) -> Result<Self> {
        if shifts.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite shift {shifts:?}")));
        }
        let mut state = self.clone();
        for (o, s) in state.offset.iter_mut().zip(shifts) {
            *o += s;
        }
        Ok(state)
    }

    /// Pointer overlap `∏_c ⟨f_{d_l,c} | f_{d_k,c}⟩` over the coordinates not
    /// in `skip`.
    pub(crate) fn overlap_product(&self, k: usize, l: usize, skip: Option<usize>) -> f64 {
        let (bk, bl) = (&self.branches[k], &self.branches[l]);
        (0..4)
            .filter(|&c| Some(c) != skip)
            .map(|c| pointer_overlap(bk.shift[c], bl.shift[c], self.sigma))
            .product()
    }

    /// Continuous (pre-pixel) moment `⟨∏_{c ∈ mask} ζ_c⟩` of the pointer
    /// positions, including any rigid offset.
    pub fn continuous_moment(&self, mask: [bool; 4]) -> f64 {
        let mut acc = 0.0;
        for (k, bk) in self.branches.iter().enumerate() {
            for (l, bl) in self.branches.iter().enumerate() {
                if bk.pol_a != bl.pol_a || bk.pol_b != bl.pol_b {
                    continue;
                }
                let mut term = (bk.amplitude * bl.amplitude.conj()).re * self.overlap_product(k, l, None);
                for c in (0..4).filter(|&c| mask[c]) {
                    term *= 0.5 * (bk.shift[c] + bl.shift[c]) + self.offset[c];
                }
                acc += term;
            }
        }
        acc
    }
}

/// Collects branches, summing amplitudes of identical labels while keeping
/// first-seen order.
#[derive(Default)]
struct Merger {
    index: HashMap<(usize, usize, [u64; 4]), usize>,
    branches: Vec<Branch>,
}

impl Merger {
    fn push(&mut self, b: Branch) {
        let key = (b.pol_a, b.pol_b, b.shift.map(|s| (s + 0.0).to_bits()));
        match self.index.get(&key) {
            Some(&i) => self.branches[i].amplitude += b.amplitude,
            None => {
                self.index.insert(key, self.branches.len());
                self.branches.push(b);
            }
        }
    }

    fn finish(self) -> Vec<Branch> {
        self.branches.into_iter().filter(|b| b.amplitude.norm_sqr() > PRUNE_NORM_SQR).collect()
    }
}

/// Convex combination of pure branch states sharing one pointer width.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    components: Vec<(f64, BranchState)>,
}

impl Mixture {
    pub fn new(components: Vec<(f64, BranchState)>) -> Result<Self> {
        let Some((_, first)) = components.first() else {
            return Err(Error::InvalidState("empty mixture".into()));
        };
        let sigma = first.sigma;
        if components.iter().any(|(w, s)| !(*w >= 0.0) || s.sigma != sigma) {
            return Err(Error::InvalidState("negative weight or mixed pointer widths".into()));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("weights sum to {total}")));
        }
        Ok(Self { components })
    }

    pub fn pure(state: BranchState) -> Self {
        Self { components: vec![(1.0, state)] }
    }

    pub fn components(&self) -> &[(f64, BranchState)] {
        &self.components
    }

    pub fn sigma(&self) -> f64 {
        self.components[0].1.sigma
    }

    pub fn all_applied(&self) -> bool {
        self.components.iter().all(|(_, s)| s.all_applied())
    }

    fn map(&self, f: impl Fn(&BranchState) -> Result<BranchState>) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|(w, s)| Ok((*w, f(s)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }

    pub fn apply_weak_coupling(&self, party: Party, stage: Stage, theta: f64, g: f64) -> Result<Self> {
        self.map(|s| s.apply_weak_coupling(party, stage, theta, g))
    }

    pub fn apply_settings(&self, settings: &MeasurementSettings) -> Result<Self> {
        self.map(|s| s.apply_settings(settings))
    }

    /// Rigidly translates the pointer distribution by `shifts` and checks that
    /// the result still satisfies the coverage guard of `grid`.
    pub fn inject_hwp_shift(&self, shifts: PerCoordinate<f64>, grid: &super::grid::PixelGrid) -> Result<Self> {
        let out = self.map(|s| s.translated(shifts))?;
        super::pixel::check_coverage(&out, grid)?;
        Ok(out)
    }

    pub fn continuous_moment(&self, mask: [bool; 4]) -> f64 {
        self.components.iter().map(|(w, s)| w * s.continuous_moment(mask)).sum()
    }
}

/// `V |ψ⁻⟩⟨ψ⁻| + (1 - V) I/4` as Bell components with unshifted pointers of
/// width `sigma`. Zero-weight components are omitted.
pub fn initial_state(visibility: f64, sigma: f64) -> Result<Mixture> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::InvalidParameter(format!("visibility {visibility} outside [0, 1]")));
    }
    let weights = [
        (1.0 + 3.0 * visibility) / 4.0,
        (1.0 - visibility) / 4.0,
        (1.0 - visibility) / 4.0,
        (1.0 - visibility) / 4.0,
    ];
    let components = bell_vectors()
        .into_iter()
        .zip(weights)
        .filter(|(_, w)| *w > 0.0)
        .map(|(v, w)| Ok((w, BranchState::from_vector(v, sigma)?)))
        .collect::<Result<Vec<_>>>()?;
    Mixture::new(components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn werner_decomposition_weights() {
        let one = initial_state(1.0, 3.0).unwrap();
        assert_eq!(one.components().len(), 1);
        assert_eq!(one.components()[0].0, 1.0);
        assert_eq!(one.components()[0].1.branches().len(), 2);

        let zero = initial_state(0.0, 3.0).unwrap();
        assert_eq!(zero.components().len(), 4);
        assert!(zero.components().iter().all(|(w, _)| *w == 0.25));

        let w: Vec<f64> = initial_state(0.983, 3.0).unwrap().components().iter().map(|c| c.0).collect();
        assert!((w[0] - 0.98725).abs() < 1e-15);
        assert!(w[1..].iter().all(|x| (x - 0.00425).abs() < 1e-15));
        assert!(initial_state(1.01, 3.0).is_err());
        assert!(initial_state(-0.1, 3.0).is_err());
    }

    #[test]
    fn singlet_first_coupling_splits_hv() {
        let g = 0.6;
        let s = BranchState::singlet(3.0).unwrap().apply_weak_coupling(Party::A, Stage::First, 0.0, g).unwrap();
        assert_eq!(s.branches().len(), 2);
        for b in s.branches() {
            assert!((b.amplitude.norm() - FRAC_1_SQRT_2).abs() < 1e-15);
            let expected = if b.pol_a == 0 { g } else { 0.0 };
            assert_eq!(b.shift, [expected, 0.0, 0.0, 0.0]);
        }
        // pol_a = 0 is |H⟩ in the θ = 0 frame.
        let h = s.branches().iter().position(|b| b.pol_a == 0).unwrap();
        let v = s.polarization_vector(h);
        assert!((v[1].norm() - 1.0).abs() < 1e-15, "H_A V_B component");
    }

    #[test]
    fn duplicate_and_negative_couplings_rejected() {
        let s = BranchState::singlet(3.0).unwrap();
        let once = s.apply_weak_coupling(Party::B, Stage::Second, 0.3, 0.6).unwrap();
        assert!(matches!(
            once.apply_weak_coupling(Party::B, Stage::Second, 0.1, 0.6),
            Err(Error::DuplicateCoupling(_))
        ));
        assert!(s.apply_weak_coupling(Party::A, Stage::First, 0.0, -0.1).is_err());
    }

    /// State vector per distinct shift label, in the `{H, V}` basis.
    fn hv_content(s: &BranchState) -> Vec<([u64; 4], [Complex64; 4])> {
        let mut map: HashMap<[u64; 4], [Complex64; 4]> = HashMap::new();
        for (k, b) in s.branches().iter().enumerate() {
            let v = s.polarization_vector(k);
            let e = map.entry(b.shift.map(f64::to_bits)).or_insert([Complex64::new(0.0, 0.0); 4]);
            for i in 0..4 {
                e[i] += b.amplitude * v[i];
            }
        }
        let mut out: Vec<_> = map.into_iter().collect();
        out.sort_by_key(|(k, _)| *k);
        out
    }

    #[test]
    fn zero_coupling_is_identity_up_to_frames() {
        let s = BranchState::singlet(3.0).unwrap();
        let t = s.apply_settings(&MeasurementSettings::standard(0.3, 0.0, 3.0).unwrap()).unwrap();
        let (a, b) = (hv_content(&s), hv_content(&t));
        assert_eq!(a.len(), 1);
        assert_eq!(b.len(), 1);
        for i in 0..4 {
            assert!((a[0].1[i] - b[0].1[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn full_sequence_has_at_most_sixteen_branches() {
        let st = BranchState::singlet(3.0)
            .unwrap()
            .apply_settings(&MeasurementSettings::standard(0.0, 0.2, 3.0).unwrap())
            .unwrap();
        assert!(st.all_applied());
        assert_eq!(st.branches().len(), 16);
        assert!((st.norm_sqr() - 1.0).abs() < 1e-12);
        for b in st.branches() {
            assert!(b.shift.iter().all(|&d| d == 0.0 || d == 0.2 * 3.0));
        }
    }

    #[test]
    fn eigenstate_input_does_not_branch() {
        let s = BranchState::product(0.0, std::f64::consts::FRAC_PI_2, 3.0)
            .unwrap()
            .apply_settings(&MeasurementSettings::new([0.0, 0.0, 0.0, 0.0], 0.0, [0.6; 4], 3.0).unwrap())
            .unwrap();
        assert_eq!(s.branches().len(), 1);
        assert_eq!(s.branches()[0].shift, [0.6, 0.6, 0.0, 0.0]);
    }

    #[test]
    fn continuous_first_moment_is_g_times_projector() {
        let s = Mixture::pure(BranchState::singlet(3.0).unwrap())
            .apply_settings(&MeasurementSettings::standard(0.0, 0.2, 3.0).unwrap())
            .unwrap();
        // The first coupling sees the unperturbed state, so ⟨x_A⟩ = g/2 exactly.
        assert!((s.continuous_moment([true, false, false, false]) - 0.3).abs() < 1e-14);
        let t = s.inject_hwp_shift([0.15, 0.0, 0.0, 0.0], &super::super::grid::PixelGrid::default()).unwrap();
        assert!((t.continuous_moment([true, false, false, false]) - 0.45).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn couplings_preserve_norm(
            angles in proptest::array::uniform4(-3.2f64..3.2),
            g in proptest::array::uniform4(0.0f64..1.5),
            v in 0.0f64..=1.0,
        ) {
            let mut mix = initial_state(v, 3.0).unwrap();
            for c in Coordinate::ALL {
                mix = mix.apply_weak_coupling(c.party(), c.stage(), angles[c.index()], g[c.index()]).unwrap();
                for (_, s) in mix.components() {
                    prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
                    prop_assert!(s.branches().len() <= 16);
                }
            }
        }
    }
}
