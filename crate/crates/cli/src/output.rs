//! Row types and their CSV / JSON encodings.
//!
//! SNR sweeps use the fixed column set
//! `grid_value, beta_omega, snr, snr_weak, delta_snr, n_max, converged, phase, eta`;
//! `phase` and `eta` are only filled for the Dicke model. Other quantities use
//! `grid_value, beta_omega, index, value, reference, n_max, converged`.
//! Missing values are empty cells in CSV and `null` in JSON. Floats are
//! written in shortest round-trip form, so parsing an emitted table gives
//! back the same rows bit for bit.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use equiprobe_core::DeltaConvention;
use serde::{Deserialize, Serialize};

use crate::config::{Axis, Model, Quantity};
use crate::error::{CliError, Result};

pub const SNR_COLUMNS: [&str; 9] =
    ["grid_value", "beta_omega", "snr", "snr_weak", "delta_snr", "n_max", "converged", "phase", "eta"];
pub const VALUE_COLUMNS: [&str; 7] = ["grid_value", "beta_omega", "index", "value", "reference", "n_max", "converged"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrRow {
    pub grid_value: f64,
    pub beta_omega: f64,
    pub snr: Option<f64>,
    pub snr_weak: f64,
    pub delta_snr: Option<f64>,
    pub n_max: Option<usize>,
    pub converged: bool,
    pub phase: Option<String>,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueRow {
    pub grid_value: f64,
    pub beta_omega: Option<f64>,
    /// Level number for `levels`, 0 otherwise.
    pub index: usize,
    pub value: Option<f64>,
    pub reference: Option<f64>,
    pub n_max: Option<usize>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rows", rename_all = "snake_case")]
pub enum Rows {
    Snr(Vec<SnrRow>),
    Value(Vec<ValueRow>),
}

impl Rows {
    pub fn len(&self) -> usize {
        match self {
            Rows::Snr(r) => r.len(),
            Rows::Value(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub axis: Axis,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub label: String,
    pub series: Vec<SeriesValue>,
    pub rows: Rows,
}

/// A grid point whose computation failed; the matching row carries empty
/// values and `converged = false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub curve: String,
    pub grid_value: f64,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub schema_version: i64,
    pub figure: Option<String>,
    pub model: Model,
    pub quantity: Quantity,
    pub grid_axis: Axis,
    pub delta: DeltaConvention,
    pub curves: Vec<Curve>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Label used for file names and comment headers, e.g. `g_omega-0.3`.
pub fn curve_label(series: &[SeriesValue]) -> String {
    if series.is_empty() {
        return "all".to_string();
    }
    series.iter().map(|s| format!("{}-{}", s.axis.as_str(), s.value)).collect::<Vec<_>>().join("_")
}

pub fn rows_to_csv(rows: &Rows) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    let table = |e: csv::Error| CliError::Table(e.to_string());
    match rows {
        Rows::Snr(rs) => {
            if rs.is_empty() {
                w.write_record(SNR_COLUMNS).map_err(table)?;
            }
            for r in rs {
                w.serialize(r).map_err(table)?;
            }
        }
        Rows::Value(rs) => {
            if rs.is_empty() {
                w.write_record(VALUE_COLUMNS).map_err(table)?;
            }
            for r in rs {
                w.serialize(r).map_err(table)?;
            }
        }
    }
    w.into_inner().map_err(|e| CliError::Table(e.to_string()))
}

/// Reads CSV rows, choosing the row type from the header. Lines starting
/// with `#` are skipped.
pub fn rows_from_csv<R: Read>(reader: R) -> Result<Rows> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let table = |e: csv::Error| CliError::Table(e.to_string());
    let headers: Vec<String> = r.headers().map_err(table)?.iter().map(str::to_string).collect();
    if headers == SNR_COLUMNS {
        Ok(Rows::Snr(r.deserialize().collect::<std::result::Result<_, _>>().map_err(table)?))
    } else if headers == VALUE_COLUMNS {
        Ok(Rows::Value(r.deserialize().collect::<std::result::Result<_, _>>().map_err(table)?))
    } else {
        Err(CliError::Table(format!("unrecognised header: {}", headers.join(","))))
    }
}

pub fn to_json(out: &SweepOutput) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(out).map_err(|e| CliError::Table(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

pub fn from_json(bytes: &[u8]) -> Result<SweepOutput> {
    serde_json::from_slice(bytes).map_err(|e| CliError::Table(e.to_string()))
}

/// CSV for every curve, concatenated with a `# curve: <label>` line before
/// each table. Used when several curves go to one stream.
pub fn curves_to_csv_stream(out: &SweepOutput) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for c in &out.curves {
        if out.curves.len() > 1 {
            buf.extend_from_slice(format!("# curve: {}\n", c.label).as_bytes());
        }
        buf.extend(rows_to_csv(&c.rows)?);
    }
    Ok(buf)
}

/// Path of one curve's CSV when a sweep has several curves:
/// `dir/stem_label.csv`.
pub fn curve_path(base: &Path, label: &str) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}_{label}.{ext}"))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Write { path: parent.to_path_buf(), source })?;
    }
    std::fs::write(path, bytes).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

/// Writes a sweep. CSV with one curve goes to `path` as is; with several
/// curves each goes to [`curve_path`]. JSON always writes one document.
/// Returns the files written. `None` writes to standard output.
pub fn emit(out: &SweepOutput, format: Format, path: Option<&Path>) -> Result<Vec<PathBuf>> {
    match (format, path) {
        (Format::Json, Some(p)) => {
            write_file(p, &to_json(out)?)?;
            Ok(vec![p.to_path_buf()])
        }
        (Format::Csv, Some(p)) if out.curves.len() == 1 => {
            write_file(p, &rows_to_csv(&out.curves[0].rows)?)?;
            Ok(vec![p.to_path_buf()])
        }
        (Format::Csv, Some(p)) => {
            let mut written = Vec::new();
            for c in &out.curves {
                let cp = curve_path(p, &c.label);
                write_file(&cp, &rows_to_csv(&c.rows)?)?;
                written.push(cp);
            }
            Ok(written)
        }
        (fmt, None) => {
            let bytes = match fmt {
                Format::Json => to_json(out)?,
                Format::Csv => curves_to_csv_stream(out)?,
            };
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes).map_err(|source| CliError::Write { path: PathBuf::from("<stdout>"), source })?;
            Ok(Vec::new())
        }
    }
}
