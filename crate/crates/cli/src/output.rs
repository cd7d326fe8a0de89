//! Artifact files. Numbers are written in Rust's shortest round-trip form
//! (scientific notation for very small or large magnitudes), so identical
//! inputs give byte-identical files.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use riwm_core::estimation::{CalibrationRecord, EstimateRecord, ShiftRecord};
use riwm_core::theory::werner_curves;
use riwm_core::wmsim::io::write_tensor;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::protocol::{run_protocol, Acquisition, PointResult, TheoryRecord};

pub const TABLES_CSV: &str = "tables.csv";
pub const ESTIMATES_JSON: &str = "estimates.json";
pub const CALIBRATION_JSON: &str = "calibration.json";
pub const THEORY_CURVE_CSV: &str = "theory_curve.csv";
pub const VERIFY_REPORT: &str = "verify_report.txt";

/// Header of `theory_curve.csv`.
pub const THEORY_CURVE_COLUMNS: [&str; 4] = ["delta", "B_theory", "Delta_theory", "RI_theory"];

/// Header of `tables.csv`: every estimate column followed by the theory
/// columns.
pub fn table_columns() -> Vec<&'static str> {
    EstimateRecord::COLUMNS.iter().chain(TheoryRecord::COLUMNS.iter()).copied().collect()
}

/// Files and directories written so far; removed again on drop unless
/// committed.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    /// Creates `dir` and any missing parents, remembering the new ones.
    pub fn create_dir(&mut self, dir: &Path) -> Result<()> {
        let mut missing = Vec::new();
        let mut p = Some(dir);
        while let Some(d) = p {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            missing.push(d.to_owned());
            p = d.parent();
        }
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        self.dirs.extend(missing.into_iter().rev());
        Ok(())
    }

    pub fn write(&mut self, path: PathBuf, contents: &[u8]) -> Result<()> {
        self.files.push(path.clone());
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
    }

    pub fn absorb(&mut self, mut other: Artifacts) {
        self.files.append(&mut other.files);
        self.dirs.append(&mut other.dirs);
        other.committed = true;
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.files)
    }
}

impl Drop for Artifacts {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{:?}", v + 0.0)))?;
    }
    w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))
}

/// Contents of `estimates.json` for one point.
#[derive(Debug, Clone, Serialize)]
pub struct PointEstimates {
    #[serde(flatten)]
    pub estimates: EstimateRecord,
    #[serde(flatten)]
    pub theory: TheoryRecord,
}

#[derive(Debug, Clone, Serialize)]
struct CalibrationFile<'a> {
    calibration: &'a CalibrationRecord,
    shift: &'a ShiftRecord,
}

impl PointResult {
    pub fn point_estimates(&self) -> PointEstimates {
        PointEstimates { estimates: self.record(), theory: self.theory }
    }

    fn table_row(&self) -> Vec<f64> {
        let t = &self.theory;
        let mut row = self.record().values().to_vec();
        row.extend([t.B_theory, t.Delta_theory, t.RI_theory]);
        row
    }
}

/// Writes the six tensors, `calibration.json`, `estimates.json` and a
/// one-row `tables.csv` into `dir`.
pub fn write_point(p: &PointResult, dir: &Path) -> Result<Artifacts> {
    let mut a = Artifacts::new();
    a.create_dir(dir)?;
    for (acq, t) in Acquisition::ALL.iter().zip(&p.tensors) {
        let mut buf = Vec::new();
        write_tensor(t, &mut buf)?;
        a.write(dir.join(format!("{}.txt", acq.name())), &buf)?;
    }
    let cal = CalibrationFile { calibration: &p.calibration, shift: &p.shift };
    a.write(dir.join(CALIBRATION_JSON), &json_bytes(&cal)?)?;
    a.write(dir.join(ESTIMATES_JSON), &json_bytes(&p.point_estimates())?)?;
    a.write(dir.join(TABLES_CSV), &csv_bytes(&table_columns(), [p.table_row()])?)?;
    Ok(a)
}

/// `run`: one protocol at `delta`, artifacts in `cfg.out`. Nothing is left
/// behind on failure.
pub fn run_to_dir(cfg: &ExperimentConfig, delta: f64) -> Result<(PointResult, Vec<PathBuf>)> {
    let p = run_protocol(cfg, delta)?;
    let files = write_point(&p, &cfg.out)?.commit();
    Ok((p, files))
}

/// Per-point subdirectory of a sweep.
pub fn point_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("point-{index:02}"))
}

/// Summary of one sweep point, without the tensors.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub point: PointEstimates,
    /// Values in [`table_columns`] order.
    pub row: Vec<f64>,
}

/// `sweep`: every configured δ in parallel, one subdirectory per point plus
/// the combined `tables.csv`, `estimates.json` and `theory_curve.csv`.
pub fn sweep_to_dir(cfg: &ExperimentConfig) -> Result<(Vec<SweepRow>, Vec<PathBuf>)> {
    cfg.validate()?;
    let points: Vec<Result<(SweepRow, Artifacts)>> = cfg
        .deltas
        .par_iter()
        .enumerate()
        .map(|(i, &delta)| {
            let p = run_protocol(cfg, delta)?;
            let a = write_point(&p, &point_dir(&cfg.out, i))?;
            Ok((SweepRow { point: p.point_estimates(), row: p.table_row() }, a))
        })
        .collect();
    let mut all = Artifacts::new();
    all.create_dir(&cfg.out)?;
    let mut rows = Vec::with_capacity(points.len());
    let mut first_err = None;
    for r in points {
        match r {
            Ok((row, a)) => {
                all.absorb(a);
                rows.push(row);
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    all.write(cfg.out.join(TABLES_CSV), &csv_bytes(&table_columns(), rows.iter().map(|r| r.row.clone()))?)?;
    let summaries: Vec<&PointEstimates> = rows.iter().map(|r| &r.point).collect();
    all.write(cfg.out.join(ESTIMATES_JSON), &json_bytes(&summaries)?)?;
    all.write(cfg.out.join(THEORY_CURVE_CSV), &theory_curve_csv(cfg.visibility, cfg.curve_points)?)?;
    Ok((rows, all.commit()))
}

/// Dense closed-form curves over `δ ∈ [-π/2, π/2]` for a Werner source.
pub fn theory_curve(visibility: f64, points: usize) -> Vec<[f64; 4]> {
    (0..points)
        .map(|i| {
            let delta = -FRAC_PI_2 + std::f64::consts::PI * i as f64 / (points - 1) as f64;
            let (b, d, ri) = werner_curves(visibility, delta);
            [delta, b, d, ri]
        })
        .collect()
}

pub fn theory_curve_csv(visibility: f64, points: usize) -> Result<Vec<u8>> {
    csv_bytes(&THEORY_CURVE_COLUMNS, theory_curve(visibility, points).into_iter().map(|r| r.to_vec()))
}

/// `theory`: writes only `theory_curve.csv`.
pub fn write_theory_curve(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let mut a = Artifacts::new();
    a.create_dir(&cfg.out)?;
    let path = cfg.out.join(THEORY_CURVE_CSV);
    a.write(path.clone(), &theory_curve_csv(cfg.visibility, cfg.curve_points)?)?;
    a.commit();
    Ok(path)
}

/// Writes `text` to `verify_report.txt` under `cfg.out`.
pub fn write_report(cfg: &ExperimentConfig, text: &str) -> Result<PathBuf> {
    let mut a = Artifacts::new();
    a.create_dir(&cfg.out)?;
    let path = cfg.out.join(VERIFY_REPORT);
    a.write(path.clone(), text.as_bytes())?;
    a.commit();
    Ok(path)
}
