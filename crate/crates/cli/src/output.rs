use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Files staged in memory and written together; if any write fails, the
/// ones already written are removed again.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl OutputSet {
    pub fn add(&mut self, path: PathBuf, body: impl Into<Vec<u8>>) {
        self.files.push((path, body.into()));
    }

    pub fn add_json<T: Serialize>(&mut self, path: PathBuf, value: &T) -> Result<(), CliError> {
        let mut body = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::Numeric(format!("cannot encode {}: {e}", path.display())))?;
        body.push(b'\n');
        self.add(path, body);
        Ok(())
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut written: Vec<PathBuf> = Vec::new();
        for (path, body) in &self.files {
            let result = path
                .parent()
                .filter(|d| !d.as_os_str().is_empty())
                .map_or(Ok(()), fs::create_dir_all)
                .and_then(|_| fs::write(path, body));
            if let Err(e) = result {
                for done in &written {
                    let _ = fs::remove_file(done);
                }
                return Err(CliError::io(path, e));
            }
            written.push(path.clone());
        }
        Ok(written)
    }
}

/// File-name-safe form of a series label.
pub fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "series".into()
    } else {
        s
    }
}

/// Three-decimal rendering used by the human-readable tables.
pub fn fixed3(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        let s = format!("{v:.3}");
        if s == "-0.000" {
            "0.000".into()
        } else {
            s
        }
    }
}
