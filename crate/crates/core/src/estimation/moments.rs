use serde::{Deserialize, Serialize};

use crate::axes::Coordinate;
use crate::wmsim::{CoincidenceTensor, PixelGrid, ProbabilityTensor};

/// Number of per-event features the estimators depend on.
pub const N_FEATURES: usize = 9;

/// Per-event features, in order: the four positions, the four A-B
/// products `xA·xB, xA·yB, yA·xB, yA·yB`, and Alice's sequential product
/// `xA·yA`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Position(Coordinate),
    Cross(usize, usize),
    SequentialA,
}

impl Feature {
    pub const ALL: [Feature; N_FEATURES] = [
        Feature::Position(Coordinate::XA),
        Feature::Position(Coordinate::YA),
        Feature::Position(Coordinate::XB),
        Feature::Position(Coordinate::YB),
        Feature::Cross(0, 0),
        Feature::Cross(0, 1),
        Feature::Cross(1, 0),
        Feature::Cross(1, 1),
        Feature::SequentialA,
    ];

    /// Index of the cross feature for Alice axis `a` and Bob axis `b`
    /// (0 = x, 1 = y).
    pub fn cross_index(a: usize, b: usize) -> usize {
        4 + 2 * a + b
    }

    pub const SEQUENTIAL_A_INDEX: usize = 8;

    fn eval(self, z: &[f64; 4]) -> f64 {
        match self {
            Feature::Position(c) => z[c.index()],
            Feature::Cross(a, b) => z[a] * z[2 + b],
            Feature::SequentialA => z[0] * z[1],
        }
    }
}

/// Empirical position moments of one acquisition, with pixel indices mapped
/// to pixel-center positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub n_events: u64,
    /// `⟨ζ_K⟩` in tensor order.
    pub mean: [f64; 4],
    /// Raw second moments `⟨ζ_c ζ_c'⟩`.
    pub second: [[f64; 4]; 4],
    /// Per-event covariance matrix of the four positions; the diagonal holds
    /// the variances `V²_ζK`.
    pub covariance: [[f64; 4]; 4],
    /// Means of the [`Feature::ALL`] features.
    pub features: [f64; N_FEATURES],
    /// Per-event covariance of the features.
    pub feature_covariance: [[f64; N_FEATURES]; N_FEATURES],
}

impl MomentSet {
    /// `⟨ζ_A ζ_B⟩` for Alice axis `a` and Bob axis `b` (0 = x, 1 = y).
    pub fn cross(&self, a: usize, b: usize) -> f64 {
        self.features[Feature::cross_index(a, b)]
    }

    /// `⟨X_A Y_A⟩`.
    pub fn sequential_a(&self) -> f64 {
        self.features[Feature::SEQUENTIAL_A_INDEX]
    }

    pub fn variance(&self, c: Coordinate) -> f64 {
        self.covariance[c.index()][c.index()]
    }

    /// Accumulates moments from `(pixel indices, weight)` pairs; weights
    /// need not be normalized.
    pub fn from_weighted(grid: &PixelGrid, cells: impl Iterator<Item = ([usize; 4], f64)>, n_events: u64) -> Self {
        let mut w_total = 0.0;
        let mut s1 = [0.0; N_FEATURES];
        let mut s2 = [[0.0; N_FEATURES]; N_FEATURES];
        for (idx, w) in cells {
            if w == 0.0 {
                continue;
            }
            let z = idx.map(|i| grid.center(i));
            let phi = Feature::ALL.map(|f| f.eval(&z));
            w_total += w;
            for i in 0..N_FEATURES {
                s1[i] += w * phi[i];
                for j in i..N_FEATURES {
                    s2[i][j] += w * phi[i] * phi[j];
                }
            }
        }
        let features = s1.map(|s| s / w_total);
        let mut feature_covariance = [[0.0; N_FEATURES]; N_FEATURES];
        for i in 0..N_FEATURES {
            for j in i..N_FEATURES {
                let c = s2[i][j] / w_total - features[i] * features[j];
                feature_covariance[i][j] = c;
                feature_covariance[j][i] = c;
            }
        }
        let mean = [features[0], features[1], features[2], features[3]];
        let mut second = [[0.0; 4]; 4];
        let mut covariance = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                covariance[i][j] = feature_covariance[i][j];
                second[i][j] = covariance[i][j] + mean[i] * mean[j];
            }
            covariance[i][i] = covariance[i][i].max(0.0);
        }
        Self { n_events, mean, second, covariance, features, feature_covariance }
    }
}

/// Moments of a coincidence tensor. A tensor without counts yields NaN
/// moments.
pub fn moments(tensor: &CoincidenceTensor) -> MomentSet {
    MomentSet::from_weighted(&tensor.grid, tensor.nonzero().map(|(i, k)| (i, k as f64)), tensor.total())
}

/// Exact moments of a probability tensor, normalized to its on-grid mass and
/// labeled with a nominal event count for uncertainty propagation.
pub fn expected_moments(probs: &ProbabilityTensor, n_events: u64) -> MomentSet {
    let grid = probs.grid;
    MomentSet::from_weighted(
        &grid,
        probs.probs.iter().enumerate().map(|(f, &p)| (grid.unflatten(f), p)),
        n_events,
    )
}
