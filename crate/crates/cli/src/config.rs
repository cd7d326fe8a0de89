//! Experiment configuration: a flat `key = value` file (TOML syntax) whose
//! entries can be overridden from the command line.
//!
//! Lengths are in pixel-pitch units and angles in radians:
//!
//! ```toml
//! visibility = 0.983
//! sigma = 3.0
//! g_over_sigma = 0.2      # all four couplings
//! g_yB = 0.5              # optional per-coupling override, length units
//! n_pixels = 24
//! pitch = 1.0
//! deltas = [0.0, 0.785398]
//! events = 1000000
//! seed = 42
//! shift_xA = 0.15         # injected wave-plate displacement
//! out = "riwm-out"
//! ```

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};
use std::path::{Path, PathBuf};

use riwm_core::theory::MeasurementSettings;
use riwm_core::wmsim::PixelGrid;
use riwm_core::{Coordinate, PerCoordinate};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// The nine mismatch angles of the default sweep.
pub fn default_deltas() -> Vec<f64> {
    vec![
        0.0,
        FRAC_PI_8,
        -FRAC_PI_8,
        FRAC_PI_4,
        -FRAC_PI_4,
        3.0 * FRAC_PI_8,
        -3.0 * FRAC_PI_8,
        FRAC_PI_2,
        -FRAC_PI_2,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub visibility: f64,
    /// Pointer width in pitch units.
    pub sigma: f64,
    /// Coupling lengths in tensor order `xA, yA, xB, yB`.
    pub g: PerCoordinate<f64>,
    pub n_pixels: usize,
    pub pitch: f64,
    pub deltas: Vec<f64>,
    /// Events per acquisition.
    pub events: u64,
    pub seed: u64,
    /// Wave-plate displacement injected into the measurement-angle runs.
    pub hwp_shift: PerCoordinate<f64>,
    pub out: PathBuf,
    /// Points on the dense theory curve.
    pub curve_points: usize,
    /// Random states in the bound verification battery.
    pub verify_states: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sigma = 3.0;
        Self {
            visibility: 0.983,
            sigma,
            g: [0.2 * sigma; 4],
            n_pixels: 24,
            pitch: 1.0,
            deltas: default_deltas(),
            events: 1_000_000,
            seed: 42,
            hwp_shift: [0.0; 4],
            out: PathBuf::from("riwm-out"),
            curve_points: 181,
            verify_states: 10_000,
        }
    }
}

/// Keys accepted in a config file. Every key is optional.
#[allow(non_snake_case)]
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    visibility: Option<f64>,
    sigma: Option<f64>,
    g_over_sigma: Option<f64>,
    g_xA: Option<f64>,
    g_yA: Option<f64>,
    g_xB: Option<f64>,
    g_yB: Option<f64>,
    n_pixels: Option<usize>,
    pitch: Option<f64>,
    deltas: Option<Vec<f64>>,
    events: Option<u64>,
    seed: Option<u64>,
    shift_xA: Option<f64>,
    shift_yA: Option<f64>,
    shift_xB: Option<f64>,
    shift_yB: Option<f64>,
    out: Option<PathBuf>,
    curve_points: Option<usize>,
    verify_states: Option<usize>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub deltas: Option<Vec<f64>>,
    pub events: Option<u64>,
    pub seed: Option<u64>,
    pub visibility: Option<f64>,
    pub g_over_sigma: Option<f64>,
    pub out: Option<PathBuf>,
    pub verify_states: Option<usize>,
}

impl ExperimentConfig {
    /// Parses config text on top of the defaults.
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, toml::de::Error> {
        let f: FileConfig = toml::from_str(text)?;
        let mut cfg = Self::default();
        cfg.sigma = f.sigma.unwrap_or(cfg.sigma);
        if let Some(r) = f.g_over_sigma {
            cfg.g = [r * cfg.sigma; 4];
        } else {
            cfg.g = [0.2 * cfg.sigma; 4];
        }
        for (c, v) in Coordinate::ALL.iter().zip([f.g_xA, f.g_yA, f.g_xB, f.g_yB]) {
            if let Some(v) = v {
                cfg.g[c.index()] = v;
            }
        }
        for (c, v) in Coordinate::ALL.iter().zip([f.shift_xA, f.shift_yA, f.shift_xB, f.shift_yB]) {
            if let Some(v) = v {
                cfg.hwp_shift[c.index()] = v;
            }
        }
        cfg.visibility = f.visibility.unwrap_or(cfg.visibility);
        cfg.n_pixels = f.n_pixels.unwrap_or(cfg.n_pixels);
        cfg.pitch = f.pitch.unwrap_or(cfg.pitch);
        cfg.deltas = f.deltas.unwrap_or(cfg.deltas);
        cfg.events = f.events.unwrap_or(cfg.events);
        cfg.seed = f.seed.unwrap_or(cfg.seed);
        cfg.out = f.out.unwrap_or(cfg.out);
        cfg.curve_points = f.curve_points.unwrap_or(cfg.curve_points);
        cfg.verify_states = f.verify_states.unwrap_or(cfg.verify_states);
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|source| CliError::ConfigFile { path: path.to_owned(), source })
    }

    /// Defaults, then `path` if given, then `overrides`; the result is
    /// validated.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = &o.deltas {
            self.deltas = d.clone();
        }
        if let Some(r) = o.g_over_sigma {
            self.g = [r * self.sigma; 4];
        }
        self.events = o.events.unwrap_or(self.events);
        self.seed = o.seed.unwrap_or(self.seed);
        self.visibility = o.visibility.unwrap_or(self.visibility);
        self.verify_states = o.verify_states.unwrap_or(self.verify_states);
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
    }

    pub fn grid(&self) -> Result<PixelGrid> {
        Ok(PixelGrid::centered(self.n_pixels, self.pitch)?)
    }

    /// Measurement settings at mismatch `delta` with the configured
    /// couplings.
    pub fn settings(&self, delta: f64) -> Result<MeasurementSettings> {
        let base = MeasurementSettings::standard(delta, 0.0, self.sigma)?;
        Ok(MeasurementSettings::new(base.angles(), delta, self.g, self.sigma)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(0.0..=1.0).contains(&self.visibility) {
            return bad(format!("visibility {} outside [0, 1]", self.visibility));
        }
        if self.events == 0 {
            return bad("events per acquisition must be positive".into());
        }
        if self.deltas.is_empty() {
            return bad("empty delta list".into());
        }
        if let Some(d) = self.deltas.iter().find(|d| !d.is_finite()) {
            return bad(format!("non-finite delta {d}"));
        }
        if self.curve_points < 2 {
            return bad("theory curve needs at least 2 points".into());
        }
        self.grid()?.check_span(self.sigma)?;
        self.settings(0.0)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_the_protocol() {
        let c = ExperimentConfig::default();
        assert_eq!(c.visibility, 0.983);
        assert_eq!(c.deltas.len(), 9);
        assert!(c.g.iter().all(|&g| (g / c.sigma - 0.2).abs() < 1e-15));
        c.validate().unwrap();
    }

    #[test]
    fn file_keys_and_overrides() {
        let text = "sigma = 2.5\ng_over_sigma = 0.1\ng_yB = 0.3\ndeltas = [0.1]\nshift_xA = 0.125\nseed = 7\n";
        let mut c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.g, [0.25, 0.25, 0.25, 0.3]);
        assert_eq!(c.hwp_shift, [0.125, 0.0, 0.0, 0.0]);
        assert_eq!(c.deltas, vec![0.1]);
        c.apply(&Overrides { seed: Some(9), g_over_sigma: Some(0.2), ..Default::default() });
        assert_eq!(c.seed, 9);
        assert_eq!(c.g, [0.5; 4]);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(ExperimentConfig::from_toml_str("visiblity = 0.9").is_err());
        let mut c = ExperimentConfig { events: 0, ..Default::default() };
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        c.events = 10;
        c.visibility = 1.5;
        assert!(c.validate().is_err());
        let c = ExperimentConfig { n_pixels: 8, ..Default::default() };
        assert!(matches!(c.validate(), Err(CliError::Core(riwm_core::Error::Coverage(_)))));
    }
}
