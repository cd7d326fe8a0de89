//! Plain-text coincidence tensor format.
//!
//! ```text
//! # riwm-coincidences v1
//! # n_pixels = 24
//! # pitch = 1
//! # origin = -12
//! # total = 1000000
//! # meta.label = main
//! xa ya xb yb count
//! 0 11 12 9 1
//! ...
//! ```
//!
//! Header lines start with `#` and hold `key = value` pairs; `meta.*` keys
//! are free-form acquisition settings. After the column line, each row lists
//! the pixel indices and count of one non-empty cell, in flat-index order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::grid::PixelGrid;
use super::sample::CoincidenceTensor;

pub const MAGIC: &str = "riwm-coincidences v1";
const COLUMNS: &str = "xa ya xb yb count";

pub fn write_tensor<W: Write>(t: &CoincidenceTensor, mut w: W) -> Result<()> {
    writeln!(w, "# {MAGIC}")?;
    writeln!(w, "# n_pixels = {}", t.grid.n_pixels)?;
    writeln!(w, "# pitch = {}", t.grid.pitch)?;
    writeln!(w, "# origin = {}", t.grid.origin)?;
    writeln!(w, "# total = {}", t.total())?;
    for (k, v) in &t.meta {
        if k.contains(['=', '\n']) || v.contains('\n') {
            return Err(Error::InvalidParameter(format!("metadata entry {k:?} cannot be serialized")));
        }
        writeln!(w, "# meta.{k} = {v}")?;
    }
    writeln!(w, "{COLUMNS}")?;
    for (idx, k) in t.nonzero() {
        writeln!(w, "{} {} {} {} {k}", idx[0], idx[1], idx[2], idx[3])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensor<R: BufRead>(r: R) -> Result<CoincidenceTensor> {
    let mut lines = r.lines().enumerate();
    let bad = |n: usize, msg: &str| Error::Parse(format!("line {}: {msg}", n + 1));
    match lines.next() {
        Some((_, Ok(l))) if l.trim() == format!("# {MAGIC}") => {}
        _ => return Err(Error::Parse(format!("missing '# {MAGIC}' header"))),
    }
    let (mut n_pixels, mut pitch, mut origin, mut total) = (None, None, None, None);
    let mut meta = std::collections::BTreeMap::new();
    let mut in_body = false;
    let mut t: Option<CoincidenceTensor> = None;
    let mut counts: Vec<u64> = Vec::new();
    for (n, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if !in_body {
            if let Some(h) = line.strip_prefix('#') {
                let (k, v) = h.split_once('=').ok_or_else(|| bad(n, "header needs 'key = value'"))?;
                let (k, v) = (k.trim(), v.trim());
                let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n, &format!("bad number {s:?}")));
                match k {
                    "n_pixels" => n_pixels = Some(v.parse::<usize>().map_err(|_| bad(n, "bad n_pixels"))?),
                    "pitch" => pitch = Some(num(v)?),
                    "origin" => origin = Some(num(v)?),
                    "total" => total = Some(v.parse::<u64>().map_err(|_| bad(n, "bad total"))?),
                    _ => match k.strip_prefix("meta.") {
                        Some(m) => {
                            meta.insert(m.to_string(), v.to_string());
                        }
                        None => return Err(bad(n, &format!("unknown header key {k:?}"))),
                    },
                }
                continue;
            }
            if line != COLUMNS {
                return Err(bad(n, "expected column line"));
            }
            let missing = |what: &str| Error::Parse(format!("header lacks {what}"));
            let grid = PixelGrid::new(
                n_pixels.ok_or_else(|| missing("n_pixels"))?,
                pitch.ok_or_else(|| missing("pitch"))?,
                origin.ok_or_else(|| missing("origin"))?,
            )?;
            counts = vec![0; grid.cells()];
            t = Some(CoincidenceTensor::zeros(grid));
            in_body = true;
            continue;
        }
        let grid = t.as_ref().expect("set with body").grid;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(bad(n, "expected 5 columns"));
        }
        let mut idx = [0usize; 4];
        for (slot, f) in idx.iter_mut().zip(&fields[..4]) {
            *slot = f.parse().map_err(|_| bad(n, &format!("bad index {f:?}")))?;
            if *slot >= grid.n_pixels {
                return Err(bad(n, &format!("index {slot} outside grid")));
            }
        }
        let k: u64 = fields[4].parse().map_err(|_| bad(n, "bad count"))?;
        counts[grid.flat_index(idx)] += k;
    }
    let grid = t.ok_or_else(|| Error::Parse("missing column line".into()))?.grid;
    let mut out = CoincidenceTensor::new(grid, counts)?;
    if let Some(total) = total {
        if total != out.total() {
            return Err(Error::Parse(format!("header total {total} but rows sum to {}", out.total())));
        }
    }
    out.meta = meta;
    Ok(out)
}

pub fn save_tensor(t: &CoincidenceTensor, path: &Path) -> Result<()> {
    write_tensor(t, BufWriter::new(File::create(path)?))
}

pub fn load_tensor(path: &Path) -> Result<CoincidenceTensor> {
    read_tensor(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small(counts: Vec<u64>) -> CoincidenceTensor {
        let mut t = CoincidenceTensor::new(PixelGrid::new(3, 0.5, -0.75).unwrap(), counts).unwrap();
        t.meta.insert("label".into(), "calib-HV".into());
        t.meta.insert("alpha1".into(), "0.39269908169872414".into());
        t
    }

    #[test]
    fn header_layout() {
        let mut counts = vec![0; 81];
        counts[5] = 2;
        let mut buf = Vec::new();
        write_tensor(&small(counts), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# riwm-coincidences v1\n# n_pixels = 3\n# pitch = 0.5\n# origin = -0.75\n# total = 2\n"));
        assert!(text.ends_with("xa ya xb yb count\n0 0 1 2 2\n"));
    }

    #[test]
    fn rejects_inconsistent_total_and_bad_index() {
        let text = "# riwm-coincidences v1\n# n_pixels = 2\n# pitch = 1\n# origin = -1\n# total = 3\nxa ya xb yb count\n0 0 0 0 2\n";
        assert!(matches!(read_tensor(text.as_bytes()), Err(Error::Parse(_))));
        let text = "# riwm-coincidences v1\n# n_pixels = 2\n# pitch = 1\n# origin = -1\nxa ya xb yb count\n0 2 0 0 2\n";
        assert!(matches!(read_tensor(text.as_bytes()), Err(Error::Parse(_))));
        assert!(read_tensor("hello".as_bytes()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        let t = small((0..81).map(|i| i % 4).collect());
        save_tensor(&t, &path).unwrap();
        assert_eq!(load_tensor(&path).unwrap(), t);
    }

    proptest! {
        #[test]
        fn round_trip(counts in proptest::collection::vec(0u64..1000, 81)) {
            let t = small(counts);
            let mut buf = Vec::new();
            write_tensor(&t, &mut buf).unwrap();
            prop_assert_eq!(read_tensor(buf.as_slice()).unwrap(), t);
        }
    }
}
