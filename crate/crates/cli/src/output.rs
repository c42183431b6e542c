//! Report assembly and CSV/JSON emission. Every file starts with the tool
//! version, the config hash and the seed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::Format;
use crate::error::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Meta {
    pub fn new(command: &str, config_sha256: &str, seed: u64) -> Self {
        Meta { tool: "rydgate".into(), version: VERSION.into(), command: command.into(), config_sha256: config_sha256.into(), seed }
    }

    pub fn comment_line(&self) -> String {
        format!("# rydgate {} config_sha256={} seed={}", self.version, self.config_sha256, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|x| num(*x)).collect());
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column_f64(&self, name: &str) -> Vec<f64> {
        let i = self.column_index(name).expect("column exists");
        self.rows.iter().map(|r| r[i].as_f64().unwrap_or(f64::NAN)).collect()
    }
}

pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

pub fn text(s: impl Into<String>) -> Value {
    Value::String(s.into())
}

/// A command's result: ordered scalars, notes and tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub scalars: Vec<(String, Value)>,
    pub notes: Vec<String>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report { command: command.into(), scalars: Vec::new(), notes: Vec::new(), tables: Vec::new() }
    }

    pub fn scalar(&mut self, key: &str, v: f64) {
        self.scalars.push((key.into(), num(v)));
    }

    pub fn value(&mut self, key: &str, v: Value) {
        self.scalars.push((key.into(), v));
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.scalars.iter().find(|(k, _)| k == key).and_then(|(_, v)| v.as_f64())
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Human summary for stdout.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.scalars {
            s.push_str(&format!("{k} = {}\n", cell(v)));
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        for t in &self.tables {
            s.push_str(&format!("table {} ({} rows)\n", t.name, t.rows.len()));
        }
        s
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "NaN".into(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn write_csv(path: &Path, meta: &Meta, columns: &[String], rows: &[Vec<Value>]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{}", meta.comment_line())?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(columns)?;
    for r in rows {
        w.write_record(r.iter().map(cell))?;
    }
    w.flush()?;
    Ok(())
}

/// Write the report into `dir`; returns the files written.
pub fn emit(report: &Report, meta: &Meta, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    match format {
        Format::Csv => {
            let p = dir.join(format!("{}_summary.csv", report.command));
            let mut rows: Vec<Vec<Value>> = report.scalars.iter().map(|(k, v)| vec![text(k.clone()), v.clone()]).collect();
            rows.extend(report.notes.iter().map(|n| vec![text("note"), text(n.clone())]));
            write_csv(&p, meta, &["key".into(), "value".into()], &rows)?;
            out.push(p);
            for t in &report.tables {
                let p = dir.join(format!("{}_{}.csv", report.command, t.name));
                write_csv(&p, meta, &t.columns, &t.rows)?;
                out.push(p);
            }
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                meta: &'a Meta,
                report: &'a Report,
            }
            let p = dir.join(format!("{}.json", report.command));
            let mut s = serde_json::to_string_pretty(&Doc { meta, report })?;
            s.push('\n');
            fs::write(&p, s)?;
            out.push(p);
        }
    }
    Ok(out)
}

/// Read a (theta_rad, parity) CSV; lines starting with '#' are skipped.
pub fn read_parity_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| crate::error::CliError::Config(format!("{}: missing column {name}", path.display())))
    };
    let (ct, cp) = (col("theta_rad")?, col("parity")?);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| crate::error::CliError::Config(format!("{}: bad number in row {:?}", path.display(), rec)))
        };
        out.push((parse(ct)?, parse(cp)?));
    }
    Ok(out)
}
