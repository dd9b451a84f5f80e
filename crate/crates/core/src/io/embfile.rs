//! Embedding files: a JSON document with one matrix row per line.
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "vertex_count": 4,
//!   "k_s": 8, "k_t": 8, "k_p": 6,
//!   "distance": "spacetime",        (optional)
//!   "reduction": "prod_sum",        (optional)
//!   "tau": 0.8,
//!   "positions": [[x, y, z], ...],
//!   "x": [[...k_s + k_t values], ...],
//!   "y_root": ..., "y_prev": ..., "y_next": ...   (k_p values per row)
//! }
//! ```

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;
use serde_json::{Map, Value};

use crate::embedding::{Dims, DistanceMode, ReductionMode, VertexEmbeddings};
use crate::error::{Error, Result};

use super::{read_text, write_bytes_atomic};

pub const FORMAT_VERSION: i64 = 1;

const FIELDS: [&str; 13] = [
    "format_version",
    "vertex_count",
    "k_s",
    "k_t",
    "k_p",
    "distance",
    "reduction",
    "tau",
    "positions",
    "x",
    "y_root",
    "y_prev",
    "y_next",
];

/// Embeddings with the vertex positions they decode onto and, optionally,
/// the modes they were fitted with.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingFile {
    pub embeddings: VertexEmbeddings,
    pub positions: Vec<Point3<f64>>,
    pub distance: Option<DistanceMode>,
    pub reduction: Option<ReductionMode>,
}

impl EmbeddingFile {
    pub fn new(embeddings: VertexEmbeddings, positions: Vec<Point3<f64>>) -> Self {
        Self {
            embeddings,
            positions,
            distance: None,
            reduction: None,
        }
    }
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        field: field.into(),
        message: message.into(),
    }
}

fn number(v: f64) -> String {
    // serde_json prints the shortest representation that parses back to
    // the same bits.
    serde_json::to_string(&v).expect("finite floats serialize")
}

fn push_rows(out: &mut String, name: &str, data: &[f64], rows: usize, width: usize, last: bool) {
    let _ = write!(out, "  \"{name}\": [");
    if rows == 0 {
        out.push(']');
    } else {
        for r in 0..rows {
            out.push_str("\n    [");
            for (i, v) in data[r * width..(r + 1) * width].iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&number(*v));
            }
            out.push(']');
            if r + 1 < rows {
                out.push(',');
            }
        }
        out.push_str("\n  ]");
    }
    out.push_str(if last { "\n" } else { ",\n" });
}

/// Serialized form of `file`; identical input gives identical bytes.
pub fn render_embeddings(file: &EmbeddingFile) -> Result<String> {
    let emb = &file.embeddings;
    emb.check()?;
    if file.positions.len() != emb.vertex_count {
        return Err(Error::DimensionMismatch {
            expected: emb.vertex_count,
            found: file.positions.len(),
        });
    }
    let all_finite = file.positions.iter().all(|p| p.iter().all(|v| v.is_finite()))
        && [&emb.x, &emb.y_root, &emb.y_prev, &emb.y_next].iter().all(|b| b.iter().all(|v| v.is_finite()))
        && emb.tau.is_finite();
    if !all_finite {
        return Err(Error::NonFinite("embedding file"));
    }

    let d = emb.dims;
    let mut s = String::from("{\n");
    let _ = writeln!(s, "  \"format_version\": {FORMAT_VERSION},");
    let _ = writeln!(s, "  \"vertex_count\": {},", emb.vertex_count);
    let _ = writeln!(s, "  \"k_s\": {},", d.k_s);
    let _ = writeln!(s, "  \"k_t\": {},", d.k_t);
    let _ = writeln!(s, "  \"k_p\": {},", d.k_p);
    if let Some(m) = file.distance {
        let _ = writeln!(s, "  \"distance\": \"{}\",", m.name());
    }
    if let Some(m) = file.reduction {
        let _ = writeln!(s, "  \"reduction\": \"{}\",", m.name());
    }
    let _ = writeln!(s, "  \"tau\": {},", number(emb.tau));
    let flat: Vec<f64> = file.positions.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
    push_rows(&mut s, "positions", &flat, emb.vertex_count, 3, false);
    push_rows(&mut s, "x", &emb.x, emb.vertex_count, d.k(), false);
    push_rows(&mut s, "y_root", &emb.y_root, emb.vertex_count, d.k_p, false);
    push_rows(&mut s, "y_prev", &emb.y_prev, emb.vertex_count, d.k_p, false);
    push_rows(&mut s, "y_next", &emb.y_next, emb.vertex_count, d.k_p, true);
    s.push_str("}\n");
    Ok(s)
}

pub fn write_embeddings(file: &EmbeddingFile, path: &Path) -> Result<()> {
    write_bytes_atomic(path, render_embeddings(file)?.as_bytes())
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingFile> {
    parse_embeddings(&read_text(path)?, path)
}

fn get<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<&'a Value> {
    obj.get(field).ok_or_else(|| schema(field, "missing field"))
}

fn get_count(obj: &Map<String, Value>, field: &str) -> Result<usize> {
    get(obj, field)?
        .as_u64()
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| schema(field, "expected a non-negative integer"))
}

fn get_f64(obj: &Map<String, Value>, field: &str) -> Result<f64> {
    get(obj, field)?.as_f64().ok_or_else(|| schema(field, "expected a number"))
}

fn get_matrix(obj: &Map<String, Value>, field: &str, rows: usize, width: usize) -> Result<Vec<f64>> {
    let arr = get(obj, field)?.as_array().ok_or_else(|| schema(field, "expected an array of rows"))?;
    if arr.len() != rows {
        return Err(schema(field, format!("expected {rows} rows, found {}", arr.len())));
    }
    let mut out = Vec::with_capacity(rows * width);
    for (r, row) in arr.iter().enumerate() {
        let at = || format!("{field}[{r}]");
        let row = row.as_array().ok_or_else(|| schema(at(), "expected an array"))?;
        if row.len() != width {
            return Err(schema(at(), format!("expected {width} values, found {}", row.len())));
        }
        for v in row {
            out.push(v.as_f64().ok_or_else(|| schema(at(), "expected numbers"))?);
        }
    }
    Ok(out)
}

fn get_mode<T: std::str::FromStr>(obj: &Map<String, Value>, field: &str) -> Result<Option<T>> {
    match obj.get(field) {
        None => Ok(None),
        Some(v) => {
            let name = v.as_str().ok_or_else(|| schema(field, "expected a string"))?;
            name.parse().map(Some).map_err(|_| schema(field, format!("unknown mode `{name}`")))
        }
    }
}

/// Parses an embedding document; `origin` only labels syntax errors.
pub fn parse_embeddings(text: &str, origin: &Path) -> Result<EmbeddingFile> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let obj = value.as_object().ok_or_else(|| schema("<root>", "expected an object"))?;

    let version = get(obj, "format_version")?
        .as_i64()
        .ok_or_else(|| schema("format_version", "expected an integer"))?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if let Some(unknown) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(schema(unknown.as_str(), "unknown field"));
    }

    let n = get_count(obj, "vertex_count")?;
    let dims = Dims {
        k_s: get_count(obj, "k_s")?,
        k_t: get_count(obj, "k_t")?,
        k_p: get_count(obj, "k_p")?,
    };
    if dims.k_s == 0 {
        return Err(schema("k_s", "must be at least 1"));
    }
    let tau = get_f64(obj, "tau")?;
    let flat = get_matrix(obj, "positions", n, 3)?;
    let positions = flat.chunks(3).map(|c| Point3::new(c[0], c[1], c[2])).collect();
    let embeddings = VertexEmbeddings {
        dims,
        vertex_count: n,
        x: get_matrix(obj, "x", n, dims.k())?,
        y_root: get_matrix(obj, "y_root", n, dims.k_p)?,
        y_prev: get_matrix(obj, "y_prev", n, dims.k_p)?,
        y_next: get_matrix(obj, "y_next", n, dims.k_p)?,
        tau,
    };
    Ok(EmbeddingFile {
        embeddings,
        positions,
        distance: get_mode(obj, "distance")?,
        reduction: get_mode(obj, "reduction")?,
    })
}
