//! Result tables, invariant checks and the files written for each run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_header(name: &str, header: Vec<String>) -> Self {
        Self { name: name.to_string(), header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width of {}", self.name);
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Shortest round-trip text of a float.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: String,
    pub expected: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, measured: impl Into<String>, expected: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, measured: measured.into(), expected: expected.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool_version: &'static str,
    pub config: ExperimentConfig,
    pub summary: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// Wall-clock per stage; written to `metadata.json` only, so that
    /// `report.json` is reproducible.
    #[serde(skip)]
    pub stages: Vec<Stage>,
    #[serde(skip)]
    pub svgs: Vec<(String, String)>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes the CSV tables, `report.json`, `metadata.json` and any SVGs;
    /// returns the written paths.
    pub fn write(&self, dir: &Path, threads: usize) -> Result<Vec<PathBuf>, WriteError> {
        fs::create_dir_all(dir).map_err(|e| WriteError::new(dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: &str, body: &str| -> Result<(), WriteError> {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| WriteError::new(&p, e))?;
            written.push(p);
            Ok(())
        };
        for t in &self.tables {
            put(&t.file_name(), &t.to_csv())?;
        }
        put("report.json", &(serde_json::to_string_pretty(self).expect("report serializes") + "\n"))?;
        let meta = serde_json::json!({
            "tool_version": TOOL_VERSION,
            "finished_unix_seconds": std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            "threads": threads,
            "out_dir": dir.display().to_string(),
            "stages": self.stages,
        });
        put("metadata.json", &(serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n"))?;
        for (name, body) in &self.svgs {
            put(name, body)?;
        }
        Ok(written)
    }

    /// One line per check, for terminals.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {}: {} (expected {})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.expected
            );
        }
        s
    }
}

#[derive(Debug)]
pub struct WriteError {
    pub path: PathBuf,
    pub source: std::io::Error,
}

impl WriteError {
    pub fn new(path: &Path, source: std::io::Error) -> Self {
        Self { path: path.to_path_buf(), source }
    }
}

impl std::fmt::Display for WriteError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cannot write {}: {}", self.path.display(), self.source)
    }
}

impl std::error::Error for WriteError {}
