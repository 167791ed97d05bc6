//! File plumbing shared by the command-line front end: run manifests,
//! atomic writes, fixed-precision serialization, and matrix payloads.

use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::qudit::DensityMatrix;
use crate::{CMatrix, Error, Result, C64};

/// Provenance header recorded in every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub created: String,
}

impl RunManifest {
    pub fn new(command: &str, config_path: Option<&Path>, seed: u64, output_dir: &Path) -> Self {
        Self {
            command: command.to_string(),
            config_path: config_path.map(Path::to_path_buf),
            seed,
            output_dir: output_dir.to_path_buf(),
            created: created_timestamp(),
        }
    }
}

/// RFC 3339 creation timestamp. Honors SOURCE_DATE_EPOCH (seconds since the
/// Unix epoch) so that archived or tested runs can be byte-reproducible;
/// falls back to the wall clock.
pub fn created_timestamp() -> String {
    let stamp = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|secs| OffsetDateTime::from_unix_timestamp(secs).ok())
        .unwrap_or_else(OffsetDateTime::now_utc);
    stamp
        .format(&Rfc3339)
        .expect("RFC 3339 formatting of a valid timestamp")
}

/// Rounds to 12 significant digits: every number leaving this crate goes
/// through here, so outputs are stable against formatting-library details
/// while exceeding all working tolerances.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor();
    if magnitude < -290.0 {
        // Scaling would overflow; values this small sit below every
        // tolerance in the crate, so pass them through unchanged.
        return x;
    }
    let scale = 10f64.powf(11.0 - magnitude);
    (x * scale).round() / scale
}

/// Recursively rounds every number in a JSON tree to 12 significant digits.
pub fn round_json(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if !n.is_i64() && !n.is_u64() {
                    if let Some(rounded) = serde_json::Number::from_f64(round_sig(f)) {
                        *value = Value::Number(rounded);
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// 12-significant-digit scientific notation for CSV cells.
pub fn format_sig(x: f64) -> String {
    format!("{x:.11e}")
}

/// Writes through a temporary file in the destination directory followed by
/// an atomic rename, so failed runs never leave partial outputs behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut file = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    std::io::Write::write_all(&mut file, bytes)?;
    file.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Serializes with 12-significant-digit floats and writes atomically.
pub fn write_json_atomic<T: Serialize>(path: &Path, payload: &T) -> Result<()> {
    let mut value = serde_json::to_value(payload)?;
    round_json(&mut value);
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Passes a value through its on-disk representation (12-significant-digit
/// floats), so that computations done in-process agree exactly with what a
/// consumer of the written file would recompute.
pub fn canonical<T: Serialize + DeserializeOwned>(payload: &T) -> Result<T> {
    let mut value = serde_json::to_value(payload)?;
    round_json(&mut value);
    Ok(serde_json::from_value(value)?)
}

/// Reads and deserializes a JSON file, attaching the path and serde's
/// line/column diagnostics to any failure.
pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidRecord(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidRecord(format!("{}: {e}", path.display())))
}

/// A complex matrix as a flat row-major list of [re, im] pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixPayload {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixPayload {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", self.rows * self.cols),
                got: format!("{}", self.data.len()),
            });
        }
        let mut m = CMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let [re, im] = self.data[i * self.cols + j];
                m[(i, j)] = C64::new(re, im);
            }
        }
        Ok(m)
    }
}

/// A real matrix (error bars) as a flat row-major list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealMatrixPayload {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RealMatrixPayload {
    pub fn from_matrix(m: &nalgebra::DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

/// Renders a bipartite qutrit state for a report.
pub fn density_payload(rho: &DensityMatrix) -> MatrixPayload {
    MatrixPayload::from_matrix(rho.matrix())
}
