//! CSV and JSON formats for records, lag estimates and spectra.
//!
//! Floats are written with 17 significant digits so files round-trip
//! bit-exactly and reruns can be compared byte for byte.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequential::{MeasurementProtocol, OutcomeRecord};
use crate::spectroscopy::{LagEstimate, Spectrum};

/// Covariance convention echoed in record metadata.
pub const FIELD_COVARIANCE_CONVENTION: &str = "field_cov = D/2";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_records<W: Write>(w: W, n: usize, records: &[OutcomeRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["record_id".to_string()];
    header.extend((1..=n).map(|j| format!("s_{j}")));
    out.write_record(&header)?;
    let mut row = Vec::with_capacity(n + 1);
    for (k, r) in records.iter().enumerate() {
        if r.len() != n {
            return Err(Error::domain(format!("record {k} has {} outcomes, expected {n}", r.len())));
        }
        row.clear();
        row.push(k.to_string());
        row.extend(r.outcomes().iter().map(|s| s.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a records CSV. Errors name the 1-based file line of the bad row.
pub fn read_records<R: Read>(r: R) -> Result<Vec<OutcomeRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("record_id") {
        return Err(Error::Parse {
            line: 1,
            message: "header must start with record_id".into(),
        });
    }
    for (j, h) in header.iter().enumerate().skip(1) {
        if h != format!("s_{j}") {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected column s_{j}, found {h:?}"),
            });
        }
    }
    let n = header.len() - 1;
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse { line, message };
        if row.len() != n + 1 {
            return Err(bad(format!("expected {} fields, found {}", n + 1, row.len())));
        }
        let mut s = Vec::with_capacity(n);
        for field in row.iter().skip(1) {
            match field.trim() {
                "1" | "+1" => s.push(1),
                "-1" => s.push(-1),
                other => return Err(bad(format!("outcome must be ±1, found {other:?}"))),
            }
        }
        records.push(OutcomeRecord::new(s).map_err(|e| bad(e.to_string()))?);
    }
    Ok(records)
}

fn write_rows<W: Write>(w: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for r in rows {
        out.write_record(&r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_lag_csv<W: Write>(w: W, est: &LagEstimate) -> Result<()> {
    write_rows(
        w,
        &["lag", "c_hat", "se"],
        est.c_hat
            .iter()
            .zip(&est.se)
            .enumerate()
            .map(|(m, (c, s))| vec![m.to_string(), fmt_f64(*c), fmt_f64(*s)]),
    )
}

pub fn write_spectrum_csv<W: Write>(w: W, spec: &Spectrum) -> Result<()> {
    write_rows(
        w,
        &["omega", "power", "se"],
        (0..spec.omega.len()).map(|k| vec![fmt_f64(spec.omega[k]), fmt_f64(spec.power[k]), fmt_f64(spec.se[k])]),
    )
}

/// Two-column CSV with an integer abscissa.
pub fn write_series_csv<W: Write>(w: W, x_name: &str, y_name: &str, x: &[usize], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::domain("series columns differ in length"));
    }
    write_rows(w, &[x_name, y_name], x.iter().zip(y).map(|(a, b)| vec![a.to_string(), fmt_f64(*b)]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub schema_version: u32,
    pub seed: u64,
    pub n_records: usize,
    pub protocol: MeasurementProtocol,
    pub bath: serde_json::Value,
    pub covariance_convention: String,
    pub include_quantum: bool,
    pub kernel: crate::correlations::WindowKernel,
    /// Largest off-diagonal classical block, for the weak-correlation check.
    pub max_off_diagonal: f64,
    pub clipped_eigenvalues: bool,
}

pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}
