//! File formats: series CSV, JSON documents, surface and heatmap CSV.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use plumetrace::cov::{CovFile, CovModel};
use plumetrace::estimate::{Heatmap, StatSurface};
use plumetrace::MultiSeries;

use crate::error::{CliError, Result};

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::format(path, format!("{other:?}")),
    }
}

/// Scientific notation with 17 significant digits, enough to round-trip.
pub fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads `t,c1,...,cd` with `t` running `1..=N`.
pub fn read_series(path: &Path) -> Result<MultiSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let d = headers.len().saturating_sub(1);
    if headers.get(0) != Some("t") || d == 0 {
        return Err(CliError::format(path, "header must be t,c1,...,cd"));
    }
    for (i, h) in headers.iter().skip(1).enumerate() {
        if h != format!("c{}", i + 1) {
            return Err(CliError::format(
                path,
                format!("column {} must be named c{}", i + 2, i + 1),
            ));
        }
    }
    let mut columns = vec![Vec::new(); d];
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = row + 2;
        let t: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| CliError::format(path, format!("line {line}: bad time index")))?;
        if t != row + 1 {
            return Err(CliError::format(
                path,
                format!("line {line}: expected t = {}, found {t}", row + 1),
            ));
        }
        for (i, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| CliError::format(path, format!("line {line}: bad value {field:?}")))?;
            columns[i].push(v);
        }
    }
    Ok(MultiSeries::new(columns)?)
}

pub fn write_series(path: &Path, series: &MultiSeries) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=series.d()).map(|i| format!("c{i}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for t in 0..series.n() {
        let mut row = vec![(t + 1).to_string()];
        row.extend(series.components().iter().map(|c| fmt_value(c[t])));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::format(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Covariance files keep the core error so singular matrices map to the
/// numerical exit code.
pub fn read_cov(path: &Path) -> Result<CovModel> {
    let file: CovFile = read_json(path)?;
    Ok(CovModel::try_from(file)?)
}

pub fn write_surface_csv(path: &Path, surface: &StatSurface) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "y", "alpha", "value"])
        .map_err(|e| csv_err(path, e))?;
    for e in &surface.entries {
        let value = e.value.map_or_else(|| "NaN".to_string(), fmt_value);
        w.write_record([
            e.params.x_s.to_string(),
            e.params.y_s.to_string(),
            e.params.alpha.to_string(),
            value,
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_heatmap_csv(path: &Path, heat: &Heatmap) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "y", "value"])
        .map_err(|e| csv_err(path, e))?;
    for c in &heat.cells {
        w.write_record([c.x.to_string(), c.y.to_string(), fmt_value(c.value)])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}
