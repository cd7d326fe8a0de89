use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::axes::Coordinate;
use crate::error::{Error, Result};

use super::grid::PixelGrid;
use super::pixel::ProbabilityTensor;

/// Detected coincidences per pixel cell `(X_A, Y_A, X_B, Y_B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceTensor {
    pub grid: PixelGrid,
    counts: Vec<u64>,
    total: u64,
    /// Free-form acquisition settings carried through serialization.
    pub meta: BTreeMap<String, String>,
}

impl CoincidenceTensor {
    pub fn new(grid: PixelGrid, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != grid.cells() {
            return Err(Error::Dimension(format!("{} counts for {} cells", counts.len(), grid.cells())));
        }
        let total = counts.iter().sum();
        Ok(Self { grid, counts, total, meta: BTreeMap::new() })
    }

    pub fn zeros(grid: PixelGrid) -> Self {
        Self { counts: vec![0; grid.cells()], grid, total: 0, meta: BTreeMap::new() }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, idx: [usize; 4]) -> u64 {
        self.counts[self.grid.flat_index(idx)]
    }

    pub fn marginal(&self, coord: Coordinate) -> Vec<u64> {
        let mut out = vec![0; self.grid.n_pixels];
        for (flat, &k) in self.counts.iter().enumerate() {
            if k > 0 {
                out[self.grid.unflatten(flat)[coord.index()]] += k;
            }
        }
        out
    }

    /// Non-empty cells as `(pixel indices, count)`, in flat order.
    pub fn nonzero(&self) -> impl Iterator<Item = ([usize; 4], u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(flat, &k)| (self.grid.unflatten(flat), k))
    }
}

/// 64-bit FNV-1a, used to turn stream names into ChaCha stream ids.
fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Deterministic generator for the named substream of `seed`.
pub fn stream_rng(seed: u64, stream: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(stream));
    rng
}

/// Multinomial draw of `n_events` over the cells of `probs`, renormalized to
/// the on-grid mass. Uses the default substream of `seed`.
pub fn sample_coincidences(probs: &ProbabilityTensor, n_events: u64, seed: u64) -> Result<CoincidenceTensor> {
    sample_with(probs, n_events, &mut stream_rng(seed, ""))
}

/// As [`sample_coincidences`], drawing from the named substream.
pub fn sample_coincidences_in(
    probs: &ProbabilityTensor,
    n_events: u64,
    seed: u64,
    stream: &str,
) -> Result<CoincidenceTensor> {
    sample_with(probs, n_events, &mut stream_rng(seed, stream))
}

/// Sequential conditional binomials: cell `i` receives
/// `Binomial(remaining events, p_i / remaining mass)`.
pub fn sample_with(probs: &ProbabilityTensor, n_events: u64, rng: &mut ChaCha8Rng) -> Result<CoincidenceTensor> {
    if probs.probs.len() != probs.grid.cells() {
        return Err(Error::Dimension(format!("{} probabilities for {} cells", probs.probs.len(), probs.grid.cells())));
    }
    if probs.probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidParameter("probabilities must be finite and non-negative".into()));
    }
    let total: f64 = probs.probs.iter().sum();
    if n_events > 0 && !(total > 0.0) {
        return Err(Error::InvalidParameter("probability tensor has zero mass".into()));
    }
    let mut counts = vec![0u64; probs.probs.len()];
    let mut left = n_events;
    let mut mass = total;
    let last = probs.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    for (i, &p) in probs.probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if p == 0.0 {
            continue;
        }
        let k = if i == last {
            left
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(left, q)
                .map_err(|e| Error::InvalidParameter(format!("binomial({left}, {q}): {e}")))?
                .sample(rng)
        };
        counts[i] = k;
        left -= k;
        mass -= p;
    }
    CoincidenceTensor::new(probs.grid, counts)
}
