//! Tab-separated report tables with a commented metadata header.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::simulate::write_atomic_bytes;

/// A rectangular report: metadata lines, named columns, one row per id.
/// Floats are written with Rust's shortest round-trip formatting, so
/// `read(write(t)) == t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    /// Echoed as `# key: value` lines above the column header.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub id: String,
    pub values: Vec<f64>,
}

impl ReportTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            meta: Vec::new(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.meta.push((key.into(), value.into()));
    }

    pub fn push_row(&mut self, id: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::ShapeMismatch(format!(
                "report row carries {} values for {} columns",
                values.len(),
                self.columns.len()
            )));
        }
        self.rows.push(ReportRow {
            id: id.into(),
            values,
        });
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_tsv(&self) -> String {
        let mut text = String::new();
        for (k, v) in &self.meta {
            writeln!(text, "# {k}: {v}").expect("string write");
        }
        text.push_str("id");
        for c in &self.columns {
            text.push('\t');
            text.push_str(c);
        }
        text.push('\n');
        for row in &self.rows {
            text.push_str(&row.id);
            for v in &row.values {
                text.push('\t');
                write!(text, "{v}").expect("string write");
            }
            text.push('\n');
        }
        text
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic_bytes(path.as_ref(), self.to_tsv().as_bytes())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut meta = Vec::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.trim_start().split_once(": ") {
                    meta.push((k.to_string(), v.to_string()));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match &columns {
                None => {
                    if fields.first() != Some(&"id") {
                        return Err(Error::Parse {
                            path: path.to_path_buf(),
                            detail: format!("line {}: header must start with 'id'", lineno + 1),
                        });
                    }
                    columns = Some(fields[1..].iter().map(|s| s.to_string()).collect());
                }
                Some(cols) => {
                    if fields.len() != cols.len() + 1 {
                        return Err(Error::Parse {
                            path: path.to_path_buf(),
                            detail: format!(
                                "line {}: {} fields for {} columns",
                                lineno + 1,
                                fields.len(),
                                cols.len() + 1
                            ),
                        });
                    }
                    let mut values = Vec::with_capacity(cols.len());
                    for f in &fields[1..] {
                        let v = match *f {
                            "inf" | "+inf" => f64::INFINITY,
                            "-inf" => f64::NEG_INFINITY,
                            "NaN" => f64::NAN,
                            other => other.parse().map_err(|_| Error::Parse {
                                path: path.to_path_buf(),
                                detail: format!("line {}: bad number {other:?}", lineno + 1),
                            })?,
                        };
                        values.push(v);
                    }
                    rows.push(ReportRow {
                        id: fields[0].to_string(),
                        values,
                    });
                }
            }
        }
        Ok(Self {
            meta,
            columns: columns.ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                detail: "no column header found".into(),
            })?,
            rows,
        })
    }
}
