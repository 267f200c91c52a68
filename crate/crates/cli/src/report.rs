//! Run directories: `manifest.json`, `summary.json`, an optional
//! `witness.json`, and CSV tables whose first line documents the schema.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::RunError;

/// A CSV table. Cells are stored preformatted so two runs produce the
/// same bytes.
pub struct Table {
    pub name: &'static str,
    schema: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    raw: Option<Vec<u8>>,
}

impl Table {
    pub fn new(name: &'static str, schema: &'static str, header: &[&'static str]) -> Self {
        Self {
            name,
            schema,
            header: header.to_vec(),
            rows: Vec::new(),
            raw: None,
        }
    }

    /// A table already rendered to CSV, header included.
    pub fn raw(name: &'static str, schema: &'static str, body: Vec<u8>) -> Self {
        Self {
            name,
            schema,
            header: Vec::new(),
            rows: Vec::new(),
            raw: Some(body),
        }
    }

    pub fn push<const N: usize>(&mut self, row: [String; N]) {
        debug_assert_eq!(N, self.header.len());
        self.rows.push(row.to_vec());
    }

    pub fn render(&self) -> Result<Vec<u8>, RunError> {
        let mut out = format!("# {}\n", self.schema).into_bytes();
        match &self.raw {
            Some(body) => out.extend_from_slice(body),
            None => {
                let mut w = csv::Writer::from_writer(&mut out);
                w.write_record(&self.header).map_err(csv_err)?;
                for row in &self.rows {
                    w.write_record(row).map_err(csv_err)?;
                }
                w.flush()?;
            }
        }
        Ok(out)
    }
}

fn csv_err(e: csv::Error) -> RunError {
    RunError::Io(std::io::Error::other(e))
}

/// SHA-256 over the config echo followed by the input bytes.
pub fn content_hash(config_echo: &Value, input: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config_echo).expect("json values serialize"));
    h.update([0u8]);
    h.update(input);
    hex::encode(h.finalize())
}

/// Creates `root/<timestamp>-<hash12>`, adding a counter if a run with the
/// same hash landed in the same second.
pub fn create_run_dir(root: &Path, stamp: &str, hash: &str) -> Result<PathBuf, RunError> {
    fs::create_dir_all(root)?;
    let base = format!("{stamp}-{}", &hash[..12]);
    for attempt in 0u32.. {
        let name = if attempt == 0 { base.clone() } else { format!("{base}-{attempt}") };
        let dir = root.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!("u32 counter exhausted")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| RunError::Io(e.into()))?;
    f.write_all(b"\n")?;
    Ok(())
}
