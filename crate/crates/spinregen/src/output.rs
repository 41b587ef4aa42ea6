//! CSV tables and the versioned JSON summary.
//!
//! Every file starts with the config hash and master seed: CSV files in a
//! leading `#` line, JSON files as fields. Numbers carry 9 significant digits.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::protocol::TraceResult;

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::param(
                "format",
                format!("`{other}` is not csv or json"),
            )),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Provenance written into every output file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMeta {
    pub config_sha256: String,
    pub master_seed: u64,
}

/// Named columns of equal length.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<(String, Vec<f64>)>,
}

impl Table {
    pub fn new() -> Self {
        Table::default()
    }

    pub fn with(mut self, name: &str, values: Vec<f64>) -> Self {
        self.columns.push((name.to_string(), values));
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map(|c| c.1.len()).unwrap_or(0)
    }

    fn check(&self) -> Result<()> {
        let n = self.rows();
        match self.columns.iter().find(|c| c.1.len() != n) {
            Some((name, v)) => Err(Error::Output(format!(
                "column `{name}` has {} rows, expected {n}",
                v.len()
            ))),
            None => Ok(()),
        }
    }
}

/// Nine significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.8e}")
}

fn round9(v: f64) -> Value {
    if v.is_finite() {
        json!(fmt_num(v).parse::<f64>().unwrap_or(v))
    } else {
        Value::Null
    }
}

pub fn write_csv(table: &Table, meta: &RunMeta, path: &Path) -> Result<()> {
    table.check()?;
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(table.columns.iter().map(|c| c.0.as_str()))
        .map_err(|e| Error::Output(e.to_string()))?;
    for i in 0..table.rows() {
        w.write_record(table.columns.iter().map(|c| fmt_num(c.1[i])))
            .map_err(|e| Error::Output(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| Error::Output(e.to_string()))?;
    let mut bytes = format!(
        "# spinregen {} config_sha256={} master_seed={}\n",
        env!("CARGO_PKG_VERSION"),
        meta.config_sha256,
        meta.master_seed
    )
    .into_bytes();
    bytes.extend(body);
    write_file(path, &bytes)
}

/// Columns as JSON arrays next to the provenance.
pub fn write_table_json(table: &Table, meta: &RunMeta, path: &Path) -> Result<()> {
    table.check()?;
    let mut columns = serde_json::Map::new();
    for (name, v) in &table.columns {
        columns.insert(
            name.clone(),
            Value::Array(v.iter().map(|&x| round9(x)).collect()),
        );
    }
    let doc = json!({
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "generator": format!("spinregen {}", env!("CARGO_PKG_VERSION")),
        "config_sha256": meta.config_sha256,
        "master_seed": meta.master_seed,
        "columns": Value::Object(columns),
    });
    write_json(&doc, path)
}

pub fn write_table(table: &Table, format: Format, meta: &RunMeta, path: &Path) -> Result<()> {
    match format {
        Format::Csv => write_csv(table, meta, path),
        Format::Json => write_table_json(table, meta, path),
    }
}

/// Time series of a run: time_s, retrieval, excitations, pop1, pop2,
/// transmission, noise_photons.
pub fn trace_table(result: &TraceResult) -> Table {
    Table::new()
        .with("time_s", result.time_s.clone())
        .with("retrieval", result.retrieval.clone())
        .with("excitations", result.excitations.clone())
        .with("pop1", result.pop1.clone())
        .with("pop2", result.pop2.clone())
        .with("transmission", result.transmission.clone())
        .with("noise_photons", result.noise_photons.clone())
}

/// Writes the time series of `result`. The JSON form also carries the read
/// and probe records and the excitation budget.
pub fn emit_traces(
    result: &TraceResult,
    format: Format,
    path: &Path,
    meta: &RunMeta,
) -> Result<()> {
    let table = trace_table(result);
    match format {
        Format::Csv => write_csv(&table, meta, path),
        Format::Json => {
            let mut columns = serde_json::Map::new();
            for (name, v) in &table.columns {
                columns.insert(
                    name.clone(),
                    Value::Array(v.iter().map(|&x| round9(x)).collect()),
                );
            }
            let reads: Vec<Value> = result
                .reads
                .iter()
                .map(|r| json!({"time_s": round9(r.time), "efficiency": round9(r.efficiency), "noise_photons": round9(r.noise_photons)}))
                .collect();
            let doc = json!({
                "schema_version": SUMMARY_SCHEMA_VERSION,
                "generator": format!("spinregen {}", env!("CARGO_PKG_VERSION")),
                "config_sha256": meta.config_sha256,
                "master_seed": meta.master_seed,
                "trials": result.trials,
                "input_photons": round9(result.input_photons),
                "leaked_fraction": round9(result.leaked_fraction),
                "reads": reads,
                "budget": {
                    "retrieved": round9(result.budget.retrieved),
                    "leaked": round9(result.budget.leaked),
                    "lost": round9(result.budget.lost),
                    "remaining": round9(result.remaining),
                },
                "columns": Value::Object(columns),
            });
            write_json(&doc, path)
        }
    }
}

/// Headline numbers and provenance of one CLI run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub command: String,
    pub meta: RunMeta,
    /// Canonical TOML of the effective config.
    pub config_echo: String,
    pub defaulted_keys: Vec<String>,
    pub calibrated_kappa: Option<f64>,
    pub headline: BTreeMap<String, f64>,
}

impl RunSummary {
    pub fn to_json(&self) -> Value {
        let headline: serde_json::Map<String, Value> = self
            .headline
            .iter()
            .map(|(k, &v)| (k.clone(), round9(v)))
            .collect();
        json!({
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "generator": format!("spinregen {}", env!("CARGO_PKG_VERSION")),
            "command": self.command,
            "config_sha256": self.meta.config_sha256,
            "master_seed": self.meta.master_seed,
            "defaulted_keys": self.defaulted_keys,
            "calibrated_kappa_per_s": self.calibrated_kappa.map(round9),
            "headline": Value::Object(headline),
            "config": self.config_echo,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(&self.to_json(), path)
    }
}

fn write_json(doc: &Value, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc).map_err(|e| Error::Output(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> RunMeta {
        RunMeta {
            config_sha256: "ab".repeat(32),
            master_seed: 9,
        }
    }

    #[test]
    fn empty_trace_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        emit_traces(&TraceResult::default(), Format::Csv, &path, &meta()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with('#') && lines[0].contains("master_seed=9"));
        assert_eq!(
            lines[1],
            "time_s,retrieval,excitations,pop1,pop2,transmission,noise_photons"
        );
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(1.0 / 3.0), "3.33333333e-1");
        assert_eq!(fmt_num(0.0), "0.00000000e0");
    }

    #[test]
    fn ragged_table_is_rejected() {
        let t = Table::new().with("a", vec![1.0]).with("b", vec![]);
        let dir = tempfile::tempdir().unwrap();
        assert!(write_csv(&t, &meta(), &dir.path().join("x.csv")).is_err());
    }

    #[test]
    fn io_errors_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let e = write_csv(&Table::new(), &meta(), &blocker.join("sub/out.csv")).unwrap_err();
        assert!(e.to_string().contains("file"), "{e}");
    }
}
