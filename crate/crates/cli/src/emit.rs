//! CSV and JSON emission. Output bytes depend only on the values written.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nls_core::experiments::{Assertion, Table};
use serde::Serialize;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

fn cell(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

/// Names row, units row, then one row per axis value.
pub fn table_csv(table: &Table) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let series = std::iter::once(&table.axis).chain(&table.columns);
    w.write_record(series.clone().map(|s| s.name.as_str()))?;
    w.write_record(series.clone().map(|s| s.unit.as_str()))?;
    for k in 0..table.axis.values.len() {
        w.write_record(series.clone().map(|s| s.values.get(k).map(|&x| cell(x)).unwrap_or_default()))?;
    }
    w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))
}

pub fn assertions_csv(assertions: &[Assertion]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["assertion", "n", "measured", "requirement", "passed"])?;
    w.write_record(["", "points", "value", "", "bool"])?;
    for a in assertions {
        w.write_record([
            a.name.clone(),
            a.n.map(|n| n.to_string()).unwrap_or_default(),
            cell(a.measured),
            a.comparison.to_string(),
            a.passed.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))
}

pub fn scalars_csv(scalars: &BTreeMap<String, f64>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "value"])?;
    w.write_record(["", "value"])?;
    for (k, v) in scalars {
        w.write_record([k.clone(), cell(*v)])?;
    }
    w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))
}

pub fn json_bytes(value: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("results serialize");
    out.push(b'\n');
    out
}

/// Collects written files so the manifest can list them.
pub struct Emitter {
    dir: PathBuf,
    pub artifacts: Vec<String>,
}

impl Emitter {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })?;
        Ok(Self { dir: dir.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
        self.artifacts.push(name.to_string());
        Ok(path)
    }

    /// Tables, scalars and assertions as CSV files, or `value` as `<stem>.json`.
    pub fn emit(
        &mut self,
        format: Format,
        stem: &str,
        value: &impl Serialize,
        tables: &[Table],
        scalars: &BTreeMap<String, f64>,
        assertions: &[Assertion],
    ) -> Result<(), CliError> {
        match format {
            Format::Json => {
                self.write(&format!("{stem}.json"), &json_bytes(value))?;
            }
            Format::Csv => {
                for t in tables {
                    self.write(&format!("{}.csv", t.name), &table_csv(t)?)?;
                }
                self.write("scalars.csv", &scalars_csv(scalars)?)?;
                self.write("assertions.csv", &assertions_csv(assertions)?)?;
            }
        }
        Ok(())
    }
}
