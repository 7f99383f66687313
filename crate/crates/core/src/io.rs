//! Result files: RFC-4180 CSV with round-trip floats, and raw little-endian
//! `f64` arrays with a `key = value` text sidecar.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv { path: path.to_path_buf(), source }
}

/// 17 significant digits, enough to recover every `f64` exactly.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// One CSV field.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// A header and rows of equal width.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// Column `name` parsed as `f64`.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        self.rows
            .iter()
            .map(|r| match &r[j] {
                Cell::Num(v) => Some(*v),
                Cell::Int(v) => Some(*v as f64),
                Cell::Text(s) => s.parse().ok(),
            })
            .collect()
    }
}

/// Writes `table` with `\n` line endings; an empty table is header only.
pub fn write_csv(path: &Path, table: &Table) -> Result<(), IoError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(csv_err(path))?;
    w.write_record(&table.header).map_err(csv_err(path))?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render)).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a CSV written by [`write_csv`]. Fields that parse as numbers come
/// back as [`Cell::Num`], everything else as text.
pub fn read_csv(path: &Path) -> Result<Table, IoError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        rows.push(rec.iter().map(|f| f.parse::<f64>().map(Cell::Num).unwrap_or_else(|_| Cell::Text(f.to_string()))).collect());
    }
    Ok(Table { header, rows })
}

/// Description written next to a raw array.
#[derive(Clone, Debug, PartialEq)]
pub struct RawMeta {
    /// Row-major shape; the product is the element count.
    pub shape: Vec<usize>,
    /// Free-text grid description, e.g. `X = linspace(0, 8, 256)`.
    pub grid: String,
    pub units: String,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

/// Writes `data` as little-endian `f64` to `path` and the sidecar to
/// `path.txt`.
pub fn write_raw(path: &Path, data: &[f64], meta: &RawMeta) -> Result<(), IoError> {
    let count: usize = meta.shape.iter().product();
    if count != data.len() {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            message: format!("shape {:?} holds {count} values, got {}", meta.shape, data.len()),
        });
    }
    let mut bytes = Vec::with_capacity(8 * data.len());
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(io_err(path))?;
    let side = sidecar_path(path);
    let mut f = fs::File::create(&side).map_err(io_err(&side))?;
    let shape: Vec<String> = meta.shape.iter().map(|n| n.to_string()).collect();
    writeln!(f, "dtype = f64le").map_err(io_err(&side))?;
    writeln!(f, "shape = {}", shape.join(" x ")).map_err(io_err(&side))?;
    writeln!(f, "grid = {}", meta.grid).map_err(io_err(&side))?;
    writeln!(f, "units = {}", meta.units).map_err(io_err(&side))?;
    Ok(())
}

/// Reads a raw array and its sidecar.
pub fn read_raw(path: &Path) -> Result<(Vec<f64>, RawMeta), IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(io_err(&side))?;
    let bad = |message: String| IoError::Format { path: side.clone(), message };
    let mut meta = RawMeta { shape: Vec::new(), grid: String::new(), units: String::new() };
    for line in text.lines() {
        let Some((k, v)) = line.split_once(" = ") else { continue };
        match k {
            "dtype" if v != "f64le" => return Err(bad(format!("unsupported dtype {v}"))),
            "shape" => {
                meta.shape = v
                    .split(" x ")
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(|_| bad(format!("bad shape {v}"))))
                    .collect::<Result<_, _>>()?
            }
            "grid" => meta.grid = v.to_string(),
            "units" => meta.units = v.to_string(),
            _ => {}
        }
    }
    if bytes.len() % 8 != 0 || bytes.len() / 8 != meta.shape.iter().product::<usize>() {
        return Err(bad(format!("{} bytes do not match shape {:?}", bytes.len(), meta.shape)));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((data, meta))
}
