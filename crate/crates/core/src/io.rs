//! Run-directory files: JSON manifests, CSV tables and little-endian binary
//! arrays with JSON shape sidecars. Every file carries a schema version.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::{NetworkSpec, ParamLayout};
use crate::optimize::SnapshotStore;

pub const SCHEMA_VERSION: u32 = 1;

/// Shape descriptor written next to every `.bin` file as `<name>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayHeader {
    pub schema_version: u32,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub order: String,
    /// Present for parameter vectors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<ParamHeader>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamHeader {
    pub spec: NetworkSpec,
    pub layout: ParamLayout,
}

impl ArrayHeader {
    fn new(shape: Vec<usize>) -> Self {
        Self { schema_version: SCHEMA_VERSION, shape, dtype: "f64le".into(), order: "row_major".into(), layout: None }
    }
}

fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn check_version(path: &Path, found: u32) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::Schema { path: path.to_path_buf(), found, expected: SCHEMA_VERSION });
    }
    Ok(())
}

fn write_bin(path: &Path, data: &[f64], header: &ArrayHeader) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    write_json(&sidecar_path(path), header)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_bin(path, m.as_slice(), &ArrayHeader::new(vec![m.rows(), m.cols()]))
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    write_bin(path, v, &ArrayHeader::new(vec![v.len()]))
}

/// Every snapshot of a run as a `(T+1) × |θ|` matrix, streamed to disk.
pub fn write_snapshots(path: &Path, snapshots: &SnapshotStore) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut failure = None;
    snapshots.for_each(|_, row| {
        if failure.is_none() {
            let bytes: Vec<u8> = row.iter().flat_map(|v| v.to_le_bytes()).collect();
            if let Err(e) = out.write_all(&bytes) {
                failure = Some(e);
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(Error::io(path, e));
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    write_json(&sidecar_path(path), &ArrayHeader::new(vec![snapshots.len(), snapshots.dim()]))
}

/// Parameter vector with its layout, so it can be reloaded and unflattened.
pub fn write_params(path: &Path, spec: &NetworkSpec, params: &[f64]) -> Result<()> {
    let layout = spec.layout();
    if params.len() != layout.total {
        return Err(Error::Dimension { what: "parameters", expected: layout.total, got: params.len() });
    }
    let mut header = ArrayHeader::new(vec![params.len()]);
    header.layout = Some(ParamHeader { spec: spec.clone(), layout });
    write_bin(path, params, &header)
}

/// Reads a `.bin` array and its sidecar, checking the schema version and size.
pub fn read_array(path: &Path) -> Result<(ArrayHeader, Vec<f64>)> {
    let side = sidecar_path(path);
    let raw: serde_json::Value = read_json(&side)?;
    let found = raw.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    check_version(&side, found)?;
    let header: ArrayHeader = serde_json::from_value(raw)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected: usize = header.shape.iter().product();
    if bytes.len() != expected * 8 {
        return Err(Error::Dimension { what: "binary array length", expected: expected * 8, got: bytes.len() });
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok((header, data))
}

pub fn read_params(path: &Path) -> Result<(NetworkSpec, Vec<f64>)> {
    let (header, data) = read_array(path)?;
    let p = header.layout.ok_or_else(|| Error::Contract(format!("{} has no parameter layout", path.display())))?;
    if p.spec.layout() != p.layout {
        return Err(Error::Contract(format!("{}: layout does not match its network spec", path.display())));
    }
    Ok((p.spec, data))
}

/// CSV table whose first line is `# schema_version=N`.
pub struct CsvWriter {
    path: PathBuf,
    buf: String,
    columns: usize,
}

impl CsvWriter {
    pub fn new(path: impl Into<PathBuf>, header: &[&str]) -> Self {
        let mut buf = format!("# schema_version={SCHEMA_VERSION}\n");
        buf.push_str(&header.join(","));
        buf.push('\n');
        Self { path: path.into(), buf, columns: header.len() }
    }

    pub fn row(&mut self, values: &[CsvValue]) {
        debug_assert_eq!(values.len(), self.columns);
        let cells: Vec<String> = values.iter().map(CsvValue::render).collect();
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn finish(self) -> Result<()> {
        let mut f = fs::File::create(&self.path).map_err(|e| Error::io(&self.path, e))?;
        f.write_all(self.buf.as_bytes()).map_err(|e| Error::io(&self.path, e))
    }
}

pub enum CsvValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl CsvValue {
    fn render(&self) -> String {
        match self {
            CsvValue::Int(i) => i.to_string(),
            CsvValue::Float(x) if x.is_nan() => "nan".into(),
            CsvValue::Float(x) => format!("{x:e}"),
            CsvValue::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for CsvValue {
    fn from(x: f64) -> Self {
        CsvValue::Float(x)
    }
}

impl From<usize> for CsvValue {
    fn from(i: usize) -> Self {
        CsvValue::Int(i as i64)
    }
}

impl From<bool> for CsvValue {
    fn from(b: bool) -> Self {
        CsvValue::Int(b as i64)
    }
}

impl From<&str> for CsvValue {
    fn from(s: &str) -> Self {
        CsvValue::Text(s.to_string())
    }
}

/// Rows of a CSV written by [`CsvWriter`], after checking its version line.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let version = lines.next().and_then(|l| l.strip_prefix("# schema_version=")).and_then(|v| v.parse().ok()).unwrap_or(0);
    check_version(path, version)?;
    let header = lines.next().unwrap_or_default().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_params;

    #[test]
    fn params_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let spec = NetworkSpec::elliptic_1d(5);
        let params = init_params(&spec, 3, 1.0);
        let path = dir.path().join("params.bin");
        write_params(&path, &spec, &params).unwrap();
        let (spec2, back) = read_params(&path).unwrap();
        assert_eq!(spec2, spec);
        assert_eq!(back.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), params.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn unknown_schema_versions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        write_matrix(&path, &Matrix::identity(2)).unwrap();
        let (h, data) = read_array(&path).unwrap();
        assert_eq!((h.shape, data), (vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]));
        let side = dir.path().join("m.json");
        let text = fs::read_to_string(&side).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 7");
        fs::write(&side, text).unwrap();
        assert!(matches!(read_array(&path), Err(Error::Schema { found: 7, .. })));

        let csv = dir.path().join("t.csv");
        let mut w = CsvWriter::new(&csv, &["a", "b"]);
        w.row(&[1usize.into(), f64::NAN.into()]);
        w.finish().unwrap();
        let (header, rows) = read_csv(&csv).unwrap();
        assert_eq!(header, vec!["a", "b"]);
        assert_eq!(rows, vec![vec!["1".to_string(), "nan".to_string()]]);
    }
}
