//! Distance-matrix CSV files.
//!
//! ```text
//! # epsilon_inner=0.25
//! # epsilon_outer=
//! # debiased=true
//! # metric=hhot
//! # subsample=
//! # seed=
//! # version=hhot 0.1.0
//! # unconverged=0
//! # rows=2
//! # cols=2
//! id,s1,s2
//! s1,0,1.5
//! s2,1.5,0
//! ```
//!
//! Absent optional values are written as an empty string. Any other
//! `# key=value` line lands in `metadata.extra`. Entries use the shortest
//! decimal form that parses back to the same `f64`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hierarchy::{DistanceMatrix, MatrixMetadata};

const KNOWN_KEYS: [&str; 10] = [
    "epsilon_inner",
    "epsilon_outer",
    "debiased",
    "metric",
    "subsample",
    "seed",
    "version",
    "unconverged",
    "rows",
    "cols",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

pub fn format_distance_matrix(m: &DistanceMatrix) -> Result<String> {
    let md = &m.metadata;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(&format!("# {k}={v}\n"));
    };
    kv("epsilon_inner", opt(&md.epsilon_inner));
    kv("epsilon_outer", opt(&md.epsilon_outer));
    kv("debiased", md.debiased.to_string());
    kv("metric", md.metric.clone());
    kv("subsample", opt(&md.subsample));
    kv("seed", opt(&md.seed));
    kv("version", md.version.clone());
    kv("unconverged", md.unconverged.to_string());
    kv("rows", m.row_ids.len().to_string());
    kv("cols", m.col_ids.len().to_string());
    for (k, v) in &md.extra {
        if k.contains('=') || k.contains('\n') || v.contains('\n') || KNOWN_KEYS.contains(&k.as_str()) {
            return Err(Error::InvalidConfig(format!("metadata entry `{k}` cannot be written")));
        }
        kv(k, v.clone());
    }

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidConfig(format!("writing matrix: {e}"));
    let mut header = vec!["id".to_string()];
    header.extend(m.col_ids.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (id, row) in m.row_ids.iter().zip(m.entries.outer_iter()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let body = w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    out.push_str(std::str::from_utf8(&body).expect("utf-8 fields"));
    Ok(out)
}

pub fn write_distance_matrix(m: &DistanceMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    m.validate()?;
    let text = format_distance_matrix(m)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_distance_matrix(path: impl AsRef<Path>) -> Result<DistanceMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_distance_matrix(path, &text)
}

fn schema(path: &Path, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn parse_opt<T: FromStr>(path: &Path, key: &str, v: &str) -> Result<Option<T>> {
    if v.is_empty() {
        return Ok(None);
    }
    v.parse()
        .map(Some)
        .map_err(|_| schema(path, format!("metadata `{key}` has invalid value `{v}`")))
}

pub fn parse_distance_matrix(path: &Path, text: &str) -> Result<DistanceMatrix> {
    let mut md = MatrixMetadata {
        version: String::new(),
        ..MatrixMetadata::default()
    };
    let mut seen = BTreeMap::new();
    let (mut rows, mut cols): (Option<usize>, Option<usize>) = (None, None);
    let mut body_start = text.len();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let Some(rest) = line.strip_prefix('#') else {
            body_start = offset;
            break;
        };
        offset += line.len();
        let rest = rest.trim_end_matches(['\n', '\r']);
        let rest = rest.strip_prefix(' ').unwrap_or(rest);
        let Some((k, v)) = rest.split_once('=') else {
            return Err(schema(path, format!("metadata line `#{rest}` is not key=value")));
        };
        if seen.insert(k.to_string(), ()).is_some() {
            return Err(schema(path, format!("duplicate metadata key `{k}`")));
        }
        match k {
            "epsilon_inner" => md.epsilon_inner = parse_opt(path, k, v)?,
            "epsilon_outer" => md.epsilon_outer = parse_opt(path, k, v)?,
            "debiased" => {
                md.debiased = parse_opt(path, k, v)?.ok_or_else(|| schema(path, "metadata `debiased` is empty"))?
            }
            "metric" => md.metric = v.to_string(),
            "subsample" => md.subsample = parse_opt(path, k, v)?,
            "seed" => md.seed = parse_opt(path, k, v)?,
            "version" => md.version = v.to_string(),
            "unconverged" => md.unconverged = parse_opt(path, k, v)?.unwrap_or(0),
            "rows" => rows = parse_opt(path, k, v)?,
            "cols" => cols = parse_opt(path, k, v)?,
            _ => {
                md.extra.insert(k.to_string(), v.to_string());
            }
        }
    }
    if !seen.contains_key("debiased") || !seen.contains_key("metric") {
        return Err(schema(path, "metadata header must declare `debiased` and `metric`"));
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(&text.as_bytes()[body_start..]);
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| schema(path, "missing header row"))?
        .map_err(|e| schema(path, e.to_string()))?;
    if header.get(0) != Some("id") {
        return Err(schema(path, "header row must start with `id`"));
    }
    let col_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let m = col_ids.len();
    let mut row_ids = Vec::new();
    let mut values = Vec::new();
    for (r, rec) in records.enumerate() {
        let rec = rec.map_err(|e| schema(path, e.to_string()))?;
        if rec.len() != m + 1 {
            return Err(schema(
                path,
                format!("row {r} has {} fields, header has {}", rec.len(), m + 1),
            ));
        }
        row_ids.push(rec[0].to_string());
        for (c, cell) in rec.iter().skip(1).enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| schema(path, format!("row {r}, column {c}: `{cell}` is not a number")))?;
            values.push(v);
        }
    }
    if row_ids.is_empty() {
        return Err(schema(path, "no data rows"));
    }
    if rows.is_some_and(|n| n != row_ids.len()) || cols.is_some_and(|n| n != m) {
        return Err(schema(
            path,
            format!(
                "header declares {}x{}, found {}x{m}",
                opt(&rows),
                opt(&cols),
                row_ids.len()
            ),
        ));
    }
    let entries = Array2::from_shape_vec((row_ids.len(), m), values).expect("rectangular");
    DistanceMatrix::new(row_ids, col_ids, entries, md).map_err(|e| schema(path, e.to_string()))
}

/// Writes `id,label` rows for slides that carry a label.
pub fn write_labels(path: impl AsRef<Path>, labels: &[(String, String)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let err = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(["id", "label"]).map_err(err)?;
    for (id, label) in labels {
        w.write_record([id, label]).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().from_reader(bytes.as_slice());
    let headers = reader.headers().map_err(|e| schema(path, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "label" {
        return Err(schema(path, "labels file header must be `id,label`"));
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| schema(path, e.to_string()))?;
        out.push((rec[0].to_string(), rec[1].to_string()));
    }
    Ok(out)
}
