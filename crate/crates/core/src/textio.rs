//! Line-oriented text container shared by the instance, training-set and
//! weights files.
//!
//! ```text
//! # aego <kind> v<version>
//! key = value
//! matrix <name> <rows> <cols>
//! <row 0, space separated>
//! ...
//! ```
//!
//! Floats are written with the shortest representation that parses back to
//! the identical `f64`, so files round-trip bit-for-bit.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextDoc {
    pub kind: String,
    pub version: u32,
    pub header: Vec<(String, String)>,
    pub matrices: Vec<MatrixBlock>,
}

impl TextDoc {
    pub fn new(kind: &str, version: u32) -> Self {
        TextDoc {
            kind: kind.to_string(),
            version,
            header: Vec::new(),
            matrices: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        assert!(
            !value.contains('\n'),
            "header values must be single-line ({key})"
        );
        self.header.push((key.to_string(), value));
        self
    }

    pub fn push_matrix(&mut self, name: &str, rows: usize, cols: usize, data: Vec<f64>) {
        assert_eq!(rows * cols, data.len(), "matrix {name} has wrong length");
        self.matrices.push(MatrixBlock {
            name: name.to_string(),
            rows,
            cols,
            data,
        });
    }

    pub fn raw(&self, key: &str) -> Result<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::parse(&self.kind, format!("missing header key `{key}`")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|_| Error::parse(&self.kind, format!("bad value `{raw}` for `{key}`")))
    }

    /// Comma-separated list value.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let raw = self.raw(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| {
                    Error::parse(&self.kind, format!("bad list item `{s}` for `{key}`"))
                })
            })
            .collect()
    }

    pub fn matrix(&self, name: &str) -> Result<&MatrixBlock> {
        self.matrices
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::parse(&self.kind, format!("missing matrix `{name}`")))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# aego {} v{}", self.kind, self.version);
        for (k, v) in &self.header {
            let _ = writeln!(out, "{k} = {v}");
        }
        for m in &self.matrices {
            let _ = writeln!(out, "matrix {} {} {}", m.name, m.rows, m.cols);
            for r in 0..m.rows {
                let row = &m.data[r * m.cols..(r + 1) * m.cols];
                let mut first = true;
                for v in row {
                    if !first {
                        out.push(' ');
                    }
                    first = false;
                    let _ = write!(out, "{v}");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str, expected_kind: &str) -> Result<Self> {
        let mut lines = text.lines();
        let magic = lines
            .next()
            .ok_or_else(|| Error::parse(expected_kind, "empty file"))?;
        let mut parts = magic.split_whitespace();
        let (hash, tool, kind, version) = (parts.next(), parts.next(), parts.next(), parts.next());
        if hash != Some("#") || tool != Some("aego") || kind != Some(expected_kind) {
            return Err(Error::parse(
                expected_kind,
                format!("unexpected magic line `{magic}`"),
            ));
        }
        let version: u32 = version
            .and_then(|v| v.strip_prefix('v'))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(expected_kind, "missing version"))?;

        let mut doc = TextDoc::new(expected_kind, version);
        let mut lines = lines.peekable();
        while let Some(line) = lines.next() {
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("matrix ") {
                let fields: Vec<&str> = rest.split_whitespace().collect();
                if fields.len() != 3 {
                    return Err(Error::parse(expected_kind, format!("bad matrix line `{line}`")));
                }
                let rows: usize = fields[1]
                    .parse()
                    .map_err(|_| Error::parse(expected_kind, "bad row count"))?;
                let cols: usize = fields[2]
                    .parse()
                    .map_err(|_| Error::parse(expected_kind, "bad column count"))?;
                let mut data = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    let row = lines.next().ok_or_else(|| {
                        Error::parse(expected_kind, format!("matrix {} truncated at row {r}", fields[0]))
                    })?;
                    let before = data.len();
                    for tok in row.split_whitespace() {
                        let v: f64 = tok.parse().map_err(|_| {
                            Error::parse(expected_kind, format!("bad float `{tok}`"))
                        })?;
                        data.push(v);
                    }
                    if data.len() - before != cols {
                        return Err(Error::parse(
                            expected_kind,
                            format!("matrix {} row {r} has wrong width", fields[0]),
                        ));
                    }
                }
                doc.matrices.push(MatrixBlock {
                    name: fields[0].to_string(),
                    rows,
                    cols,
                    data,
                });
            } else if let Some((k, v)) = line.split_once('=') {
                doc.header.push((k.trim().to_string(), v.trim().to_string()));
            } else {
                return Err(Error::parse(expected_kind, format!("unrecognized line `{line}`")));
            }
        }
        Ok(doc)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
        }
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path, expected_kind: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, expected_kind)
    }
}

pub(crate) fn join_list<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}
