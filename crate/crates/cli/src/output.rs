//! CSV tables with JSON sidecars.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Rows collected in memory and written once, so row order never depends
/// on scheduling.
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Writer {
    dir: PathBuf,
    command: &'static str,
    config: Value,
}

impl Writer {
    pub fn new(dir: &Path, command: &'static str, config: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), command, config: serde_json::to_value(config)? })
    }

    /// Writes `<name>.csv` and its sidecar `<name>.json` holding the
    /// resolved config and `results`.
    pub fn table(&self, table: &Table, results: &impl Serialize) -> Result<PathBuf> {
        let path = self.dir.join(format!("{}.csv", table.name));
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.json(&table.name, results)?;
        Ok(path)
    }

    pub fn json(&self, name: &str, results: &impl Serialize) -> Result<PathBuf> {
        let path = self.dir.join(format!("{name}.json"));
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config,
            "results": results,
        });
        std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
