//! Tile-embedding files.
//!
//! Binary layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "HHOT"
//! 4       4     u32 version = 1
//! 8       4     u32 n_rows
//! 12      4     u32 dim
//! 16      4*n*d f32 values, row-major
//! ```
//!
//! Files ending in `.csv` or `.txt` are read as comma-separated rows of
//! numbers instead; that path is slower and meant for small fixtures.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HHOT";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// A decoded embedding matrix, one tile per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub values: Array2<f64>,
}

impl EmbeddingFile {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

fn is_text(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("csv") | Some("txt")
    )
}

pub fn read_embedding_file(path: impl AsRef<Path>) -> Result<EmbeddingFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if is_text(path) {
        parse_csv(path, &bytes)
    } else {
        decode_binary(path, &bytes)
    }
}

pub fn decode_binary(path: &Path, bytes: &[u8]) -> Result<EmbeddingFile> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::format(path, "bad magic, expected \"HHOT\""));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let (n, d) = (word(8) as usize, word(12) as usize);
    if n == 0 || d == 0 {
        return Err(Error::format(path, format!("empty matrix {n}x{d}")));
    }
    let expected = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::format(path, "header counts overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::format(
            path,
            format!(
                "truncated payload: header declares {n}x{d} ({expected} bytes), found {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(
            path,
            format!("{} trailing bytes after {n}x{d} payload", payload.len() - expected),
        ));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(
            path,
            format!("non-finite value at row {}, column {}", pos / d, pos % d),
        ));
    }
    Ok(EmbeddingFile {
        values: Array2::from_shape_vec((n, d), values).expect("length checked"),
    })
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<EmbeddingFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut values = Vec::new();
    let mut dim = None;
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        if dim.is_some_and(|d| d != record.len()) {
            return Err(Error::format(
                path,
                format!("row {r} has {} columns, expected {}", record.len(), dim.unwrap()),
            ));
        }
        dim = Some(record.len());
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::format(path, format!("non-numeric cell `{cell}` at row {r}, column {c}")))?;
            if !v.is_finite() {
                return Err(Error::format(path, format!("non-finite value at row {r}, column {c}")));
            }
            values.push(v);
        }
        rows += 1;
    }
    let dim = dim.ok_or_else(|| Error::format(path, "no rows"))?;
    Ok(EmbeddingFile {
        values: Array2::from_shape_vec((rows, dim), values).expect("rectangular"),
    })
}

/// Encodes values in the binary format (stored as 32-bit floats).
pub fn encode_binary(values: &Array2<f64>) -> Vec<u8> {
    let (n, d) = values.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n * d);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for v in values.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn write_embedding_file(path: impl AsRef<Path>, values: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let bytes = if is_text(path) {
        let mut s = String::new();
        for row in values.outer_iter() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s.into_bytes()
    } else {
        encode_binary(values)
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
