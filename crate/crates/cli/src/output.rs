use std::io::Write;

use anyhow::Result;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn csv_field(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    /// Non-finite numbers become the strings `inf`, `-inf` and `NaN`.
    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(fmt_f64(*v)),
            Cell::Int(v) => json!(v),
            Cell::Bool(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
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

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        // shortest representation that round-trips
        format!("{v:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }
}

/// Run metadata. Deliberately free of timestamps and host details so that
/// identical runs give identical bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub extra: Map<String, Value>,
}

impl Meta {
    pub fn new(command: &'static str, seed: Option<u64>, config_text: &str) -> Self {
        let digest = Sha256::digest(config_text.as_bytes());
        let config_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Self { command, seed, config_sha256, extra: Map::new() }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.extra.insert(key.to_owned(), value.into());
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("tool".into(), json!("occtime"));
        m.insert("tool_version".into(), json!(env!("CARGO_PKG_VERSION")));
        m.insert("core_version".into(), json!(occupation::VERSION));
        m.insert("command".into(), json!(self.command));
        m.insert("seed".into(), json!(self.seed));
        m.insert("config_sha256".into(), json!(self.config_sha256));
        for (k, v) in &self.extra {
            m.insert(k.clone(), v.clone());
        }
        Value::Object(m)
    }
}

pub fn write_csv<W: Write>(table: &Table, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::Necessary).from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::csv_field))?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_json(meta: &Meta, table: &Table) -> Value {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|row| {
            let obj: Map<String, Value> =
                table.columns.iter().zip(row).map(|(c, v)| ((*c).to_owned(), v.json())).collect();
            Value::Object(obj)
        })
        .collect();
    json!({ "meta": meta.to_json(), "rows": rows })
}

pub fn write_json<W: Write>(meta: &Meta, table: &Table, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, &to_json(meta, table))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write<W: Write>(format: Format, meta: &Meta, table: &Table, out: W) -> Result<()> {
    match format {
        Format::Csv => write_csv(table, out),
        Format::Json => write_json(meta, table, out),
    }
}
