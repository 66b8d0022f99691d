//! CSV and JSON file formats.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::IncrementSample;

/// Writes increments as `index,value`.
pub fn write_sample_csv(path: &Path, sample: &IncrementSample) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "value"])?;
    for (i, v) in sample.values.iter().enumerate() {
        w.write_record([i.to_string(), fmt_f64(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `index,value` file back into a sample with spacing `delta`.
pub fn read_sample_csv(path: &Path, delta: f64) -> Result<IncrementSample> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| Error::Config(format!("{}: missing `value` column", path.display())))?;
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = rec.get(col).unwrap_or("");
        let v: f64 = field.trim().parse().map_err(|_| {
            Error::Config(format!("{}: row {}: bad value `{field}`", path.display(), line + 2))
        })?;
        values.push(v);
    }
    IncrementSample::new(values, delta)
}

/// Writes a Hermitian half-grid as `xi,re,im` over the full symmetric grid.
pub fn write_complex_grid_csv(path: &Path, step: f64, half: &[Complex64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["xi", "re", "im"])?;
    let k = half.len() as i64;
    for m in (1 - k)..k {
        let v = if m < 0 { half[(-m) as usize].conj() } else { half[m as usize] };
        w.write_record([fmt_f64(m as f64 * step), fmt_f64(v.re), fmt_f64(v.im)])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a spatial estimate as `x,nu_hat`.
pub fn write_estimate_csv(path: &Path, xs: &[f64], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "nu_hat"])?;
    for (x, v) in xs.iter().zip(values) {
        w.write_record([fmt_f64(*x), fmt_f64(*v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Shortest round-tripping decimal form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
