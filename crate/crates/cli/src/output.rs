//! Run directories and fixed-precision CSV output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Seventeen significant digits: enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

/// `<case>_<scheme>_ord<K+1>_N<NNNN>`.
pub fn artifact_stem(case: &str, scheme: &str, k: usize, n: usize) -> String {
    format!("{case}_{scheme}_ord{}_N{n:04}", k + 1)
}

#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    pub fn create(path: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(Self { path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn target(&mut self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    /// Echo the resolved configuration as a one-table TOML file.
    pub fn write_config<T: Serialize>(&mut self, command: &str, cfg: &T) -> Result<(), CliError> {
        let mut doc = toml::Table::new();
        let table = toml::Value::try_from(cfg).map_err(|e| CliError::Config(e.to_string()))?;
        doc.insert(command.to_string(), table);
        let text = toml::to_string(&doc).map_err(|e| CliError::Config(e.to_string()))?;
        let path = self.target("config.toml");
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        let path = self.target(name);
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }

    /// Write a CSV table; numeric cells are formatted by the caller.
    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        let path = self.target(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))
    }
}
