//! CSV and JSON emission. Every CSV starts with a comment line recording
//! the config hash and artifact version, followed by a header row; numbers
//! are written in scientific notation with 17 significant digits so doubles
//! round-trip losslessly.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17-significant-digit scientific notation.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct OutDir {
    dir: PathBuf,
    hash: String,
}

impl OutDir {
    pub fn new(dir: Option<PathBuf>, hash: &str) -> Result<Self, CliError> {
        let dir = dir.unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutDir {
            dir,
            hash: hash.to_string(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_csv(
        &self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut out = String::new();
        out.push_str(&format!(
            "# config_hash={} artifact_version={ARTIFACT_VERSION}\n",
            self.hash
        ));
        out.push_str(&header.join(","));
        out.push('\n');
        for row in rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        write_file(&path, out.as_bytes())?;
        Ok(path)
    }

    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut body = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::config(format!("cannot serialize {name}: {e}")))?;
        body.push(b'\n');
        write_file(&path, &body)?;
        Ok(path)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(bytes)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}
