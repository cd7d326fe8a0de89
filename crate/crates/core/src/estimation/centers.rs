use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::axes::Coordinate;
use crate::error::{Error, Result};
use crate::wmsim::{stream_rng, CoincidenceTensor};

/// Fewest counts on a marginal for a center fit.
pub const MIN_CENTER_COUNTS: u64 = 1000;
/// Default number of disjoint subsets averaged per center.
pub const DEFAULT_SUBSETS: usize = 10;

/// Beam center along one coordinate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterFit {
    pub center: f64,
    pub uncertainty: f64,
}

/// Splits `counts` into `k` disjoint random subsets of (near) equal size by
/// shuffling the individual detections. Since detections are exchangeable
/// this matches splitting the acquisition into chronological blocks.
pub fn split_counts(counts: &[u64], k: usize, seed: u64, stream: &str) -> Result<Vec<Vec<u64>>> {
    let total: u64 = counts.iter().sum();
    if k == 0 || (k as u64) > total {
        return Err(Error::InvalidParameter(format!("cannot split {total} counts into {k} subsets")));
    }
    let mut labels: Vec<u32> = Vec::with_capacity(total as usize);
    for (bin, &c) in counts.iter().enumerate() {
        labels.extend(std::iter::repeat_n(bin as u32, c as usize));
    }
    labels.shuffle(&mut stream_rng(seed, stream));
    let mut out = Vec::with_capacity(k);
    let mut start = 0usize;
    for s in 0..k {
        let size = (total / k as u64 + u64::from((s as u64) < total % k as u64)) as usize;
        let mut subset = vec![0; counts.len()];
        for &bin in &labels[start..start + size] {
            subset[bin as usize] += 1;
        }
        start += size;
        out.push(subset);
    }
    Ok(out)
}

fn centroid(counts: &[u64], position: impl Fn(usize) -> f64) -> f64 {
    let n: u64 = counts.iter().sum();
    counts.iter().enumerate().map(|(i, &c)| c as f64 * position(i)).sum::<f64>() / n as f64
}

/// Deterministic seed from the marginal itself, so repeated fits of one
/// tensor agree.
fn marginal_seed(counts: &[u64]) -> u64 {
    counts
        .iter()
        .fold(0x9e37_79b9_7f4a_7c15u64, |h, &c| (h ^ c).wrapping_mul(0x0100_0000_01b3).rotate_left(17))
}

/// Subset-averaged centroid of the marginal along `coord`, with the standard
/// error across `k` disjoint subsets.
pub fn fit_centers_with(tensor: &CoincidenceTensor, coord: Coordinate, k: usize) -> Result<CenterFit> {
    let marginal = tensor.marginal(coord);
    let total: u64 = marginal.iter().sum();
    if total < MIN_CENTER_COUNTS {
        return Err(Error::InsufficientCounts { needed: MIN_CENTER_COUNTS, have: total });
    }
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 subsets, got {k}")));
    }
    let grid = tensor.grid;
    let subsets = split_counts(&marginal, k, marginal_seed(&marginal), coord.label())?;
    let centers: Vec<f64> = subsets.iter().map(|s| centroid(s, |i| grid.center(i))).collect();
    let mean = centers.iter().sum::<f64>() / k as f64;
    let var = centers.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    Ok(CenterFit { center: mean, uncertainty: (var / k as f64).sqrt() })
}

/// [`fit_centers_with`] using [`DEFAULT_SUBSETS`] subsets.
pub fn fit_centers(tensor: &CoincidenceTensor, coord: Coordinate) -> Result<CenterFit> {
    fit_centers_with(tensor, coord, DEFAULT_SUBSETS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wmsim::{PixelGrid, ProbabilityTensor};
    use proptest::prelude::*;

    fn gaussian_tensor(mean: [f64; 4], n: u64, seed: u64) -> CoincidenceTensor {
        let grid = PixelGrid::default();
        let bins: Vec<Vec<f64>> = mean.iter().map(|&m| grid.gaussian_bins(m, 3.0)).collect();
        let probs = (0..grid.cells())
            .map(|f| {
                let i = grid.unflatten(f);
                (0..4).map(|c| bins[c][i[c]]).product()
            })
            .collect();
        crate::wmsim::sample_coincidences(&ProbabilityTensor { grid, probs }, n, seed).unwrap()
    }

    #[test]
    fn symmetric_beam_centered_at_pixel_middle() {
        // Pixel index 11.5 sits at position 0 on the default grid.
        let t = gaussian_tensor([0.0; 4], 200_000, 1);
        for c in Coordinate::ALL {
            let fit = fit_centers(&t, c).unwrap();
            assert!(fit.uncertainty > 0.0);
            assert!(fit.center.abs() < 3.0 * fit.uncertainty, "{c:?}: {fit:?}");
            // Standard error close to σ/√N.
            let expect = 3.0 / (200_000f64).sqrt();
            assert!((fit.uncertainty / expect - 1.0).abs() < 0.6, "{fit:?}");
        }
    }

    #[test]
    fn disjoint_halves_agree() {
        let t = gaussian_tensor([0.4, -0.2, 0.0, 0.6], 100_000, 2);
        let halves = split_counts(t.counts(), 2, 7, "halves").unwrap();
        let fits: Vec<CenterFit> = halves
            .into_iter()
            .map(|h| fit_centers(&CoincidenceTensor::new(t.grid, h).unwrap(), Coordinate::XA).unwrap())
            .collect();
        let combined = (fits[0].uncertainty.powi(2) + fits[1].uncertainty.powi(2)).sqrt();
        assert!((fits[0].center - fits[1].center).abs() < 3.0 * combined);
    }

    #[test]
    fn too_few_counts() {
        let t = gaussian_tensor([0.0; 4], 999, 3);
        assert_eq!(
            fit_centers(&t, Coordinate::YB),
            Err(Error::InsufficientCounts { needed: 1000, have: 999 })
        );
    }

    #[test]
    fn fit_is_deterministic() {
        let t = gaussian_tensor([0.3, 0.0, 0.0, 0.0], 50_000, 4);
        assert_eq!(fit_centers(&t, Coordinate::XA).unwrap(), fit_centers(&t, Coordinate::XA).unwrap());
    }

    proptest! {
        #[test]
        fn split_partitions_counts(counts in proptest::collection::vec(0u64..50, 1..30), k in 1usize..8, seed: u64) {
            let total: u64 = counts.iter().sum();
            prop_assume!(total >= k as u64);
            let parts = split_counts(&counts, k, seed, "p").unwrap();
            prop_assert_eq!(parts.len(), k);
            let sizes: Vec<u64> = parts.iter().map(|p| p.iter().sum()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for bin in 0..counts.len() {
                prop_assert_eq!(parts.iter().map(|p| p[bin]).sum::<u64>(), counts[bin]);
            }
        }
    }
}
