//! Structured-text reports.
//!
//! ```text
//! report align
//! kind = linear
//! mean_cos = 0.71
//!
//! [table per_token]
//! token_id,token,cos
//! 0,a,0.5
//! ```
//!
//! The first line names the report type. Key/value lines follow until the
//! first `[table <name>]` marker; each table is CSV with a header row and
//! ends at a blank line or the next marker.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Parses a whole column as `f64`.
    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .column_index(name)
            .ok_or_else(|| Error::InvalidArgument(format!("table {} has no column {name}", self.name)))?;
        self.rows
            .iter()
            .map(|r| {
                r[idx].parse::<f64>().map_err(|_| {
                    Error::InvalidArgument(format!("column {name}: bad number {:?}", r[idx]))
                })
            })
            .collect()
    }

    pub fn column_str(&self, name: &str) -> Option<Vec<&str>> {
        let idx = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub kind: String,
    pub fields: Vec<(String, String)>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            ..Self::default()
        }
    }

    /// Sets a field, replacing an earlier value with the same key.
    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        debug_assert!(!key.contains('=') && !key.contains('\n') && !value.contains('\n'));
        match self.fields.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.fields.push((key.to_owned(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        let v = self
            .get(key)
            .ok_or_else(|| Error::InvalidArgument(format!("report has no field {key}")))?;
        v.parse()
            .map_err(|_| Error::InvalidArgument(format!("field {key}: bad number {v:?}")))
    }

    pub fn add_table(&mut self, table: Table) {
        self.tables.push(table);
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("report {}\n", self.kind);
        for (k, v) in &self.fields {
            out.push_str(&format!("{k} = {v}\n"));
        }
        for t in &self.tables {
            out.push_str(&format!("\n[table {}]\n", t.name));
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            w.write_record(&t.columns).expect("in-memory write");
            for r in &t.rows {
                w.write_record(r).expect("in-memory write");
            }
            out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 in, utf8 out"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().peekable();
        let kind = match lines.next() {
            Some((_, l)) => l
                .strip_prefix("report ")
                .map(|k| k.trim().to_owned())
                .filter(|k| !k.is_empty())
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    msg: format!("expected `report <kind>`, found {l:?}"),
                })?,
            None => {
                return Err(Error::Parse {
                    line: 1,
                    msg: "empty report".into(),
                })
            }
        };
        let mut report = Report::new(kind);
        while let Some(&(idx, line)) = lines.peek() {
            if line.starts_with("[table ") {
                break;
            }
            lines.next();
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: format!("expected `key = value`, found {line:?}"),
            })?;
            report.set(k.trim(), v.trim());
        }
        while let Some((idx, line)) = lines.next() {
            if line.trim().is_empty() {
                continue;
            }
            let name = line
                .strip_prefix("[table ")
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| Error::Parse {
                    line: idx + 1,
                    msg: format!("expected `[table <name>]`, found {line:?}"),
                })?;
            let mut body = String::new();
            while let Some(&(_, l)) = lines.peek() {
                if l.trim().is_empty() || l.starts_with("[table ") {
                    break;
                }
                body.push_str(l);
                body.push('\n');
                lines.next();
            }
            let mut rdr = csv::ReaderBuilder::new().from_reader(body.as_bytes());
            let columns: Vec<String> = rdr
                .headers()
                .map_err(|e| Error::Parse {
                    line: idx + 2,
                    msg: e.to_string(),
                })?
                .iter()
                .map(str::to_owned)
                .collect();
            let mut table = Table {
                name: name.to_owned(),
                columns,
                rows: Vec::new(),
            };
            for (r, rec) in rdr.records().enumerate() {
                let rec = rec.map_err(|e| Error::Parse {
                    line: idx + 3 + r,
                    msg: e.to_string(),
                })?;
                table.rows.push(rec.iter().map(str::to_owned).collect());
            }
            report.tables.push(table);
        }
        Ok(report)
    }
}

pub fn write_report(report: &Report, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, report.to_text()).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Report> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Report::parse(&text)
}
