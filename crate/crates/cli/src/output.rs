//! Result files and the run manifest.

use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// One CSV cell.
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> Result<String, CliError> {
        Ok(match self {
            Cell::Num(v) if !v.is_finite() => return Err(CliError::Runtime(format!("non-finite value {v} in output"))),
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(t) => t.clone(),
            Cell::Empty => String::new(),
        })
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// Collects output files, then writes them with a manifest.
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    scenario: &'a str,
    config_hash: &'a str,
    seed: u64,
    created: String,
    files: Vec<FileEntry>,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<Cell>>) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(header).map_err(runtime)?;
        for row in rows {
            let cells = row.iter().map(Cell::render).collect::<Result<Vec<_>, _>>()?;
            w.write_record(&cells).map_err(runtime)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let v = serde_json::to_value(value).map_err(runtime)?;
        check_finite(&v)?;
        let mut bytes = serde_json::to_vec_pretty(&v).map_err(runtime)?;
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    pub fn text(&mut self, name: &str, text: &str) {
        self.files.push((name.to_string(), text.as_bytes().to_vec()));
    }

    /// Writes every file and `manifest.json` listing them with checksums.
    pub fn finish(mut self, command: &str, scenario: &str, config_hash: &str, seed: u64) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        self.files.sort_by(|a, b| a.0.cmp(&b.0));
        let mut entries = Vec::new();
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
            entries.push(FileEntry {
                path: name.clone(),
                bytes: bytes.len(),
                sha256: hex::encode(Sha256::digest(bytes)),
            });
        }
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            scenario,
            config_hash,
            seed,
            created: timestamp()?,
            files: entries,
        };
        let path = self.dir.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(runtime)?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        Ok(self.dir)
    }
}

/// `SOURCE_DATE_EPOCH` when set, so repeated runs can be byte-identical; the
/// current time otherwise.
fn timestamp() -> Result<String, CliError> {
    let t = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(s) => {
            let secs: i64 = s
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("SOURCE_DATE_EPOCH `{s}` is not an integer")))?;
            DateTime::<Utc>::from_timestamp(secs, 0)
                .ok_or_else(|| CliError::Config(format!("SOURCE_DATE_EPOCH `{s}` is out of range")))?
        }
        Err(_) => Utc::now(),
    };
    Ok(t.to_rfc3339_opts(SecondsFormat::Secs, true))
}

fn check_finite(v: &serde_json::Value) -> Result<(), CliError> {
    match v {
        // serde_json maps non-finite floats to null; refuse rather than emit them
        serde_json::Value::Null => Err(CliError::Runtime("non-finite value in JSON output".into())),
        serde_json::Value::Array(a) => a.iter().try_for_each(check_finite),
        serde_json::Value::Object(o) => o.values().try_for_each(check_finite),
        _ => Ok(()),
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}
