//! CSV tables and the run record.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so the
//! bytes of a table depend only on the values in it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Bumped whenever a CSV header changes.
pub const SCHEMA_VERSION: u32 = 1;

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x}")
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Collects the files written by one run.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| io_error(root, e))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write_csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        let path = self.root.join(name);
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&path).map_err(|e| io_error(&path, e))?;
        w.write_record(header).map_err(|e| io_error(&path, e))?;
        for row in rows {
            w.write_record(row).map_err(|e| io_error(&path, e))?;
        }
        w.flush().map_err(|e| io_error(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes `run.json` listing every file written so far. `config` holds
    /// the keys as given; `resolved` the validated settings with defaults.
    pub fn write_manifest(
        &mut self,
        command: &str,
        seed: u64,
        config: &std::collections::BTreeMap<String, String>,
        resolved: &str,
    ) -> Result<(), CliError> {
        let record = RunRecord {
            schema_version: SCHEMA_VERSION,
            library_version: extremal_kpca::VERSION,
            command,
            seed,
            config,
            resolved,
            files: &self.written,
        };
        let text = serde_json::to_string_pretty(&record).map_err(|e| CliError::Runtime(e.to_string()))?;
        self.write_text("run.json", &(text + "\n"))
    }
}

#[derive(Serialize)]
struct RunRecord<'a> {
    schema_version: u32,
    library_version: &'a str,
    command: &'a str,
    seed: u64,
    config: &'a std::collections::BTreeMap<String, String>,
    resolved: &'a str,
    files: &'a [String],
}

pub fn header(fixed: &[&str]) -> Vec<String> {
    fixed.iter().map(|s| s.to_string()).collect()
}

/// `prefix1, …, prefixd`.
pub fn component_names(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}
