use serde::{Deserialize, Serialize};
use libm::{erf, erfc};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// Half-width, in pointer widths, the grid must span around the beam center.
pub const COVERAGE_SIGMAS: f64 = 4.0;
/// Largest probability mass allowed to fall off the grid along any axis.
pub const MAX_TRUNCATION: f64 = 1e-4;

/// Square pixel grid shared by all four coordinates. Pixel `i` covers
/// `[origin + i·pitch, origin + (i+1)·pitch)`; the unperturbed beam is
/// centered at position zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelGrid {
    pub n_pixels: usize,
    pub pitch: f64,
    pub origin: f64,
}

impl Default for PixelGrid {
    /// 24 pixels of unit pitch centered on the beam.
    fn default() -> Self {
        Self::centered(24, 1.0).expect("valid default grid")
    }
}

impl PixelGrid {
    pub fn new(n_pixels: usize, pitch: f64, origin: f64) -> Result<Self> {
        if n_pixels < 2 {
            return Err(Error::InvalidParameter(format!("grid needs >= 2 pixels, got {n_pixels}")));
        }
        if !(pitch > 0.0 && pitch.is_finite()) || !origin.is_finite() {
            return Err(Error::InvalidParameter(format!("bad grid pitch {pitch} / origin {origin}")));
        }
        Ok(Self { n_pixels, pitch, origin })
    }

    /// Grid whose center coincides with the beam center.
    pub fn centered(n_pixels: usize, pitch: f64) -> Result<Self> {
        Self::new(n_pixels, pitch, -(n_pixels as f64) * pitch / 2.0)
    }

    pub fn edge(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.pitch
    }

    pub fn center(&self, i: usize) -> f64 {
        self.origin + (i as f64 + 0.5) * self.pitch
    }

    pub fn upper(&self) -> f64 {
        self.edge(self.n_pixels)
    }

    pub fn cells(&self) -> usize {
        self.n_pixels.pow(4)
    }

    /// Flat index of pixel `(xa, ya, xb, yb)`, last coordinate fastest.
    pub fn flat_index(&self, idx: [usize; 4]) -> usize {
        let n = self.n_pixels;
        ((idx[0] * n + idx[1]) * n + idx[2]) * n + idx[3]
    }

    pub fn unflatten(&self, mut flat: usize) -> [usize; 4] {
        let n = self.n_pixels;
        let mut out = [0; 4];
        for slot in out.iter_mut().rev() {
            *slot = flat % n;
            flat /= n;
        }
        out
    }

    /// Geometric guard: the grid spans `±4σ` around the beam center.
    pub fn check_span(&self, sigma: f64) -> Result<()> {
        let need = COVERAGE_SIGMAS * sigma;
        let tol = 1e-9 * self.pitch;
        if self.origin > -need + tol || self.upper() < need - tol {
            return Err(Error::Coverage(format!(
                "grid [{}, {}] does not span ±{COVERAGE_SIGMAS}σ = ±{need}",
                self.origin,
                self.upper()
            )));
        }
        Ok(())
    }

    /// Integral over every pixel of a unit Gaussian density of width `sigma`
    /// centered at `mean`.
    pub fn gaussian_bins(&self, mean: f64, sigma: f64) -> Vec<f64> {
        let z = |x: f64| (x - mean) / sigma;
        (0..self.n_pixels)
            .map(|i| normal_interval(z(self.edge(i)), z(self.edge(i + 1))))
            .collect()
    }
}

/// `Φ(b) - Φ(a)` for the standard normal, evaluated on the tail that keeps
/// full relative precision.
pub fn normal_interval(a: f64, b: f64) -> f64 {
    let s = FRAC_1_SQRT_2;
    if a >= 0.0 {
        0.5 * (erfc(a * s) - erfc(b * s))
    } else if b <= 0.0 {
        0.5 * (erfc(-b * s) - erfc(-a * s))
    } else {
        0.5 * (erf(b * s) - erf(a * s))
    }
}

/// `∫_bin f(ζ - d1) f(ζ - d2) dζ` for the normalized Gaussian pointer
/// amplitude `f(ζ) = (2πσ²)^{-1/4} exp(-ζ²/4σ²)`, for every pixel.
pub fn overlap_bins(grid: &PixelGrid, d1: f64, d2: f64, sigma: f64) -> Vec<f64> {
    let damp = pointer_overlap(d1, d2, sigma);
    let mut bins = grid.gaussian_bins(0.5 * (d1 + d2), sigma);
    bins.iter_mut().for_each(|b| *b *= damp);
    bins
}

/// `⟨f_{d1} | f_{d2}⟩ = exp(-(d1 - d2)² / 8σ²)`.
pub fn pointer_overlap(d1: f64, d2: f64, sigma: f64) -> f64 {
    let d = d1 - d2;
    (-(d * d) / (8.0 * sigma * sigma)).exp()
}
