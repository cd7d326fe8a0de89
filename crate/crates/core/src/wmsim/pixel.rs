use std::collections::HashMap;

use crate::axes::{Coordinate, PerCoordinate};
use crate::error::{Error, Result};

use super::branch::{BranchState, Mixture};
use super::grid::{overlap_bins, PixelGrid, MAX_TRUNCATION};

/// Exact detection probability per pixel cell, indexed like
/// [`super::CoincidenceTensor`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTensor {
    pub grid: PixelGrid,
    pub probs: Vec<f64>,
}

impl ProbabilityTensor {
    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Probability mass falling outside the grid.
    pub fn truncation(&self) -> f64 {
        1.0 - self.sum()
    }

    /// One-dimensional marginal along `coord`.
    pub fn marginal(&self, coord: Coordinate) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_pixels];
        for (flat, &p) in self.probs.iter().enumerate() {
            out[self.grid.unflatten(flat)[coord.index()]] += p;
        }
        out
    }

    /// Normalized moment `⟨∏_{c ∈ mask} ζ_c⟩` using pixel-center positions.
    pub fn moment(&self, mask: [bool; 4]) -> f64 {
        let mut acc = 0.0;
        for (flat, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let idx = self.grid.unflatten(flat);
            let f: f64 = (0..4).filter(|&c| mask[c]).map(|c| self.grid.center(idx[c])).product();
            acc += p * f;
        }
        acc / self.sum()
    }
}

type Key = (u64, u64);

fn key(a: f64, b: f64) -> Key {
    ((a + 0.0).to_bits(), (b + 0.0).to_bits())
}

/// Per-coordinate bin integrals, memoized on the displacement pair.
struct BinCache<'a> {
    grid: &'a PixelGrid,
    sigma: f64,
    map: HashMap<(usize, Key), Vec<f64>>,
}

impl<'a> BinCache<'a> {
    fn new(grid: &'a PixelGrid, sigma: f64) -> Self {
        Self { grid, sigma, map: HashMap::new() }
    }

    fn get(&mut self, c: usize, dk: f64, dl: f64) -> &[f64] {
        let (grid, sigma) = (self.grid, self.sigma);
        self.map.entry((c, key(dk, dl))).or_insert_with(|| overlap_bins(grid, dk, dl, sigma))
    }
}

/// Polarization-matched branch pairs `(k, l)` with coefficient
/// `Re(a_k conj(a_l))`; imaginary parts cancel between `(k, l)` and `(l, k)`.
fn matched_pairs(s: &BranchState) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
    let b = s.branches();
    (0..b.len()).flat_map(move |k| {
        (0..b.len())
            .filter(move |&l| b[k].pol_a == b[l].pol_a && b[k].pol_b == b[l].pol_b)
            .map(move |l| (k, l, (b[k].amplitude * b[l].amplitude.conj()).re))
    })
}

/// Pixel-integrated marginal of one coordinate.
pub fn axis_marginal(mixture: &Mixture, coord: Coordinate, grid: &PixelGrid) -> Vec<f64> {
    let c = coord.index();
    let mut cache = BinCache::new(grid, mixture.sigma());
    let mut out = vec![0.0; grid.n_pixels];
    for (w, s) in mixture.components() {
        let off = s.offset()[c];
        for (k, l, coef) in matched_pairs(s) {
            let factor = w * coef * s.overlap_product(k, l, Some(c));
            let (bk, bl) = (&s.branches()[k], &s.branches()[l]);
            let bins = cache.get(c, bk.shift[c] + off, bl.shift[c] + off);
            for (o, v) in out.iter_mut().zip(bins) {
                *o += factor * v;
            }
        }
    }
    out
}

/// Probability mass lost off the grid along each coordinate.
pub fn axis_truncation(mixture: &Mixture, grid: &PixelGrid) -> PerCoordinate<f64> {
    Coordinate::ALL.map(|c| 1.0 - axis_marginal(mixture, c, grid).iter().sum::<f64>())
}

/// The grid spans `±4σ` around the unperturbed beam and no coordinate loses
/// more than [`MAX_TRUNCATION`] of its mass off the grid.
pub fn check_coverage(mixture: &Mixture, grid: &PixelGrid) -> Result<()> {
    grid.check_span(mixture.sigma())?;
    for (c, t) in Coordinate::ALL.iter().zip(axis_truncation(mixture, grid)) {
        if t > MAX_TRUNCATION {
            return Err(Error::Coverage(format!(
                "{} loses {t:.3e} of its probability off the grid (limit {MAX_TRUNCATION:e})",
                c.label()
            )));
        }
    }
    Ok(())
}

/// Exact pixel probabilities `Σ_{k,l} a_k conj(a_l) δ_pol ∏_c I_c(k, l, bin)`
/// summed over mixture components.
pub fn pixel_distribution(mixture: &Mixture, grid: &PixelGrid) -> Result<ProbabilityTensor> {
    if !mixture.all_applied() {
        return Err(Error::MissingCoupling("all four couplings must be applied before pixelization".into()));
    }
    check_coverage(mixture, grid)?;
    let n = grid.n_pixels;
    let half = n * n;
    let mut probs = vec![0.0; half * half];
    let mut cache = BinCache::new(grid, mixture.sigma());
    for (w, s) in mixture.components() {
        let off = s.offset();
        let d = |k: usize, c: usize| s.branches()[k].shift[c] + off[c];
        // Group pairs by their A-side displacement labels so the A factor is
        // built once per group and the B factors are summed before the outer
        // product.
        let mut groups: Vec<((Key, Key), Vec<f64>)> = Vec::new();
        let mut index: HashMap<(Key, Key), usize> = HashMap::new();
        for (k, l, coef) in matched_pairs(s) {
            let akey = (key(d(k, 0), d(l, 0)), key(d(k, 1), d(l, 1)));
            let gi = *index.entry(akey).or_insert_with(|| {
                groups.push((akey, vec![0.0; half]));
                groups.len() - 1
            });
            let xb = cache.get(2, d(k, 2), d(l, 2)).to_vec();
            let yb = cache.get(3, d(k, 3), d(l, 3));
            let acc = &mut groups[gi].1;
            for (i, &x) in xb.iter().enumerate() {
                let f = coef * x;
                for (j, &y) in yb.iter().enumerate() {
                    acc[i * n + j] += f * y;
                }
            }
        }
        for ((kx, ky), bvec) in groups {
            let xa = cache.get(0, f64::from_bits(kx.0), f64::from_bits(kx.1)).to_vec();
            let ya = cache.get(1, f64::from_bits(ky.0), f64::from_bits(ky.1));
            for (i, &x) in xa.iter().enumerate() {
                for (j, &y) in ya.iter().enumerate() {
                    let a = w * x * y;
                    let row = &mut probs[(i * n + j) * half..(i * n + j + 1) * half];
                    for (p, &b) in row.iter_mut().zip(&bvec) {
                        *p += a * b;
                    }
                }
            }
        }
    }
    for p in probs.iter_mut() {
        debug_assert!(*p >= -1e-12, "negative cell probability {p}");
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    Ok(ProbabilityTensor { grid: *grid, probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axes::Stage;
    use crate::qcore::Party;
    use crate::theory::MeasurementSettings;
    use crate::wmsim::branch::initial_state;
    use std::f64::consts::FRAC_PI_2;

    fn settings(delta: f64, gs: f64) -> MeasurementSettings {
        MeasurementSettings::standard(delta, gs, 3.0).unwrap()
    }

    #[test]
    fn zero_coupling_gives_product_of_gaussians() {
        let grid = PixelGrid::default();
        let mix = initial_state(0.7, 3.0).unwrap().apply_settings(&settings(0.2, 0.0)).unwrap();
        let t = pixel_distribution(&mix, &grid).unwrap();
        let g1 = grid.gaussian_bins(0.0, 3.0);
        for flat in [0, 12345, 165_888, 331_775] {
            let i = grid.unflatten(flat);
            let expect: f64 = i.iter().map(|&k| g1[k]).product();
            assert!((t.probs[flat] - expect).abs() < 1e-15);
        }
        assert!(t.truncation() > 0.0 && t.truncation() < 4.0 * MAX_TRUNCATION);
    }

    #[test]
    fn eigenstate_gives_single_displaced_product() {
        let grid = PixelGrid::default();
        let s = MeasurementSettings::new([0.0, FRAC_PI_2, 0.0, FRAC_PI_2], 0.0, [0.6; 4], 3.0).unwrap();
        let mix = Mixture::pure(BranchState::product(0.0, FRAC_PI_2, 3.0).unwrap()).apply_settings(&s).unwrap();
        let t = pixel_distribution(&mix, &grid).unwrap();
        let (g0, g1) = (grid.gaussian_bins(0.0, 3.0), grid.gaussian_bins(0.6, 3.0));
        // |H_A⟩ passes Π(0) but not Π(π/2); |V_B⟩ the reverse.
        for flat in [7, 99_999, 200_000] {
            let i = grid.unflatten(flat);
            let expect = g1[i[0]] * g0[i[1]] * g0[i[2]] * g1[i[3]];
            assert!((t.probs[flat] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn marginal_first_moment_matches_continuous() {
        let grid = PixelGrid::default();
        let mix = initial_state(1.0, 3.0).unwrap().apply_settings(&settings(0.0, 0.2)).unwrap();
        let t = pixel_distribution(&mix, &grid).unwrap();
        let m = t.moment([true, false, false, false]);
        assert!((m - 0.3).abs() <= grid.pitch.powi(2) / 12.0, "⟨x_A⟩ = {m}");
        // The full-line marginal exceeds the on-grid tensor marginal only by
        // mass whose other coordinates fall off the grid.
        let marg = axis_marginal(&mix, Coordinate::XA, &grid);
        for (a, b) in marg.iter().zip(t.marginal(Coordinate::XA)) {
            assert!(a - b >= -1e-15 && a - b <= 3.0 * MAX_TRUNCATION * a, "{a} vs {b}");
        }
    }

    #[test]
    fn party_order_does_not_matter() {
        let grid = PixelGrid::default();
        let s = settings(0.4, 0.2);
        let mix = initial_state(0.9, 3.0).unwrap();
        let a_first = mix.apply_settings(&s).unwrap();
        let mut b_first = mix.clone();
        for c in [Coordinate::XB, Coordinate::YB, Coordinate::XA, Coordinate::YA] {
            b_first = b_first.apply_weak_coupling(c.party(), c.stage(), s.angle(c), s.g[c.index()]).unwrap();
        }
        let (p, q) = (pixel_distribution(&a_first, &grid).unwrap(), pixel_distribution(&b_first, &grid).unwrap());
        let diff = p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "max diff {diff}");
    }

    #[test]
    fn missing_coupling_and_coverage_errors() {
        let grid = PixelGrid::default();
        let mix = initial_state(1.0, 3.0).unwrap().apply_weak_coupling(Party::A, Stage::First, 0.0, 0.6).unwrap();
        assert!(matches!(pixel_distribution(&mix, &grid), Err(Error::MissingCoupling(_))));
        let full = initial_state(1.0, 3.0).unwrap().apply_settings(&settings(0.0, 0.2)).unwrap();
        assert!(matches!(full.inject_hwp_shift([2.0, 0.0, 0.0, 0.0], &grid), Err(Error::Coverage(_))));
        let narrow = PixelGrid::centered(20, 1.0).unwrap();
        assert!(matches!(pixel_distribution(&full, &narrow), Err(Error::Coverage(_))));
    }

    #[test]
    fn pitch_translation_moves_moments_by_one_pitch() {
        let grid = PixelGrid::centered(40, 1.0).unwrap();
        let mix = initial_state(1.0, 3.0).unwrap().apply_settings(&settings(0.1, 0.2)).unwrap();
        let base = pixel_distribution(&mix, &grid).unwrap();
        let moved = pixel_distribution(&mix.inject_hwp_shift([1.0, 0.0, 0.0, 0.0], &grid).unwrap(), &grid).unwrap();
        let m0 = base.moment([true, false, false, false]);
        let m1 = moved.moment([true, false, false, false]);
        // Only the far tails (beyond 6σ) differ between the two placements.
        assert!((m1 - m0 - 1.0).abs() < 1e-8, "{m0} -> {m1}");
        let zero = mix.inject_hwp_shift([0.0; 4], &grid).unwrap();
        assert_eq!(zero, mix);
    }
}
