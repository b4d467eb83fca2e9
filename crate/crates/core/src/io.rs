//! On-disk formats: SRRM binary matrices, calibration statistics and
//! experiment reports.
//!
//! SRRM layout: the magic `SRRM`, a version byte (`0x01`), a dtype byte
//! (`0x01` = little-endian f64), rows and cols as little-endian `u64`, then
//! the row-major payload. All writes go to a temporary sibling file that is
//! renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrrError};
use crate::harness::{ExperimentReport, ReportRow};
use crate::linalg::{Matrix, MAX_DIM};
use crate::scaling::CalibrationStats;

pub const MAGIC: &[u8; 4] = b"SRRM";
pub const FORMAT_VERSION: u8 = 0x01;
pub const DTYPE_F64: u8 = 0x01;
const HEADER_LEN: usize = 4 + 1 + 1 + 8 + 8;

pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.data().len());
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.push(DTYPE_F64);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN {
        return Err(SrrError::Format(format!("file too short for a header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(SrrError::Format("bad magic, not an SRRM file".into()));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(SrrError::Format(format!("unsupported format version {}", bytes[4])));
    }
    if bytes[5] != DTYPE_F64 {
        return Err(SrrError::Format(format!("unsupported dtype {}", bytes[5])));
    }
    let dim = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"));
    let (rows, cols) = (dim(6), dim(14));
    if rows > MAX_DIM as u64 || cols > MAX_DIM as u64 {
        return Err(SrrError::Format(format!("dimensions {rows}x{cols} exceed the supported maximum {MAX_DIM}")));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != 8 * rows * cols {
        return Err(SrrError::Format(format!(
            "payload of {} bytes does not match {rows}x{cols} f64 values",
            payload.len()
        )));
    }
    let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| SrrError::input(format!("'{}' is not a file path", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| with_path(e, path))
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    atomic_write(path, &encode_matrix(m))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| with_path(e, path))?;
    decode_matrix(&bytes).map_err(|e| match e {
        SrrError::Format(msg) => SrrError::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn with_path(e: std::io::Error, path: &Path) -> SrrError {
    SrrError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Sidecar metadata stored next to a calibration second-moment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMeta {
    pub dim: usize,
    pub sample_count: usize,
}

/// `<path>.meta.json`.
pub fn calibration_meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Stores `second_moment` as SRRM at `path` and the sample count in a JSON sidecar.
pub fn write_calibration(path: &Path, stats: &CalibrationStats) -> Result<()> {
    let meta = CalibrationMeta { dim: stats.dim, sample_count: stats.sample_count };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| SrrError::Format(e.to_string()))?;
    write_matrix(path, &stats.second_moment)?;
    atomic_write(&calibration_meta_path(path), format!("{json}\n").as_bytes())
}

pub fn read_calibration(path: &Path) -> Result<CalibrationStats> {
    let m = read_matrix(path)?;
    let meta_path = calibration_meta_path(path);
    let text = fs::read_to_string(&meta_path).map_err(|e| with_path(e, &meta_path))?;
    let meta: CalibrationMeta = serde_json::from_str(&text)
        .map_err(|e| SrrError::Format(format!("{}: {e}", meta_path.display())))?;
    if meta.dim != m.rows() {
        return Err(SrrError::Format(format!(
            "metadata dimension {} does not match the {}x{} matrix",
            meta.dim,
            m.rows(),
            m.cols()
        )));
    }
    CalibrationStats::from_second_moment(m, meta.sample_count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = SrrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(SrrError::input(format!("unknown report format '{other}' (expected csv or json)"))),
        }
    }
}

/// Serializes `records` as CSV with a header row.
pub fn to_csv<T: Serialize>(records: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| SrrError::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| SrrError::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| SrrError::Format(e.to_string()))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| SrrError::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Report rows as CSV, or the whole report (rows and aggregates) as JSON.
pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => to_csv::<ReportRow>(&report.rows),
        ReportFormat::Json => to_json(report),
    }
}

pub fn write_report(path: &Path, report: &ExperimentReport, format: ReportFormat) -> Result<()> {
    atomic_write(path, render_report(report, format)?.as_bytes())
}
