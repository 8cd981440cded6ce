//! Configuration: flat per-command TOML tables merged with command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use gfq_core::cases::{CaseKind, InitMode};
use gfq_core::dec_time::MAX_SUBSTEPS;
use gfq_core::{DecConfig, SchemeKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MAX_DEGREE: usize = 8;
pub const MAX_CELLS: usize = 1024;

/// Every key a command may read. Absent keys fall back to the config file,
/// then to the command's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct Settings {
    pub case: Option<String>,
    pub scheme: Option<String>,
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub ns: Option<Vec<usize>>,
    pub alpha: Option<f64>,
    pub cfl: Option<f64>,
    pub m: Option<usize>,
    pub p: Option<usize>,
    pub init: Option<String>,
    pub t_final: Option<f64>,
    pub cadence: Option<usize>,
    pub seed: Option<u64>,
    pub audit: Option<String>,
    pub samples: Option<usize>,
    pub cells: Option<usize>,
    pub jobs: Option<usize>,
    pub state: Option<bool>,
}

impl Settings {
    /// Keys set here win over `base`.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            case: self.case.or(base.case),
            scheme: self.scheme.or(base.scheme),
            k: self.k.or(base.k),
            n: self.n.or(base.n),
            ns: self.ns.or(base.ns),
            alpha: self.alpha.or(base.alpha),
            cfl: self.cfl.or(base.cfl),
            m: self.m.or(base.m),
            p: self.p.or(base.p),
            init: self.init.or(base.init),
            t_final: self.t_final.or(base.t_final),
            cadence: self.cadence.or(base.cadence),
            seed: self.seed.or(base.seed),
            audit: self.audit.or(base.audit),
            samples: self.samples.or(base.samples),
            cells: self.cells.or(base.cells),
            jobs: self.jobs.or(base.jobs),
            state: self.state.or(base.state),
        }
    }

    pub fn require<T: Clone>(value: &Option<T>, key: &str) -> Result<T, CliError> {
        value
            .clone()
            .ok_or_else(|| CliError::Config(format!("missing required setting '{key}'")))
    }
}

/// Read the table named `command` from a TOML file. A missing table is empty.
pub fn load_table(path: &Path, command: &str) -> Result<Settings, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut doc: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    match doc.remove(command) {
        None => Ok(Settings::default()),
        Some(value) => value
            .try_into()
            .map_err(|e| CliError::Config(format!("{}: [{command}]: {e}", path.display()))),
    }
}

pub fn parse_case(s: &str) -> Result<CaseKind, CliError> {
    s.parse()
        .map_err(|e: gfq_core::Error| CliError::Config(e.to_string()))
}

pub fn parse_scheme(s: &str) -> Result<SchemeKind, CliError> {
    s.parse()
        .map_err(|e: gfq_core::Error| CliError::Config(e.to_string()))
}

pub fn parse_schemes(s: &str) -> Result<Vec<SchemeKind>, CliError> {
    s.split(',').map(|x| parse_scheme(x.trim())).collect()
}

pub fn parse_init(s: &str) -> Result<InitMode, CliError> {
    s.parse()
        .map_err(|e: gfq_core::Error| CliError::Config(e.to_string()))
}

pub fn check_degree(k: usize) -> Result<usize, CliError> {
    if !(1..=MAX_DEGREE).contains(&k) {
        return Err(CliError::Config(format!(
            "K must lie in 1..={MAX_DEGREE}, got {k}"
        )));
    }
    Ok(k)
}

pub fn check_cells(n: usize) -> Result<usize, CliError> {
    if !(2..=MAX_CELLS).contains(&n) {
        return Err(CliError::Config(format!(
            "N must lie in 2..={MAX_CELLS}, got {n}"
        )));
    }
    Ok(n)
}

pub fn check_alpha(alpha: f64) -> Result<f64, CliError> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(CliError::Config(format!(
            "alpha must be finite and >= 0, got {alpha}"
        )));
    }
    Ok(alpha)
}

pub fn dec_config(s: &Settings) -> Result<DecConfig, CliError> {
    let cfl = s.cfl.unwrap_or(DecConfig::default().cfl);
    if !(cfl > 0.0 && cfl.is_finite()) {
        return Err(CliError::Config(format!("cfl must be positive, got {cfl}")));
    }
    if let Some(m) = s.m {
        if !(1..=MAX_SUBSTEPS).contains(&m) {
            return Err(CliError::Config(format!(
                "M must lie in 1..={MAX_SUBSTEPS}, got {m}"
            )));
        }
    }
    if s.p == Some(0) {
        return Err(CliError::Config("P must be at least 1".into()));
    }
    Ok(DecConfig {
        cfl,
        subtimesteps: s.m,
        iterations: s.p,
    })
}

pub fn check_time(t: f64) -> Result<f64, CliError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(CliError::Config(format!(
            "final time must be finite and >= 0, got {t}"
        )));
    }
    Ok(t)
}

/// Output directory: the explicit flag, else `$GFQ_OUTPUT_ROOT/<label>`, else
/// `runs/<label>`.
pub fn run_dir(explicit: Option<PathBuf>, label: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let root = std::env::var_os(crate::OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"));
        root.join(label)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = Settings {
            k: Some(2),
            alpha: Some(0.3),
            ..Default::default()
        };
        let flags = Settings {
            k: Some(3),
            ..Default::default()
        };
        let s = flags.over(file);
        assert_eq!(s.k, Some(3));
        assert_eq!(s.alpha, Some(0.3));
    }

    #[test]
    fn ranges() {
        assert!(check_degree(0).is_err());
        assert!(check_degree(9).is_err());
        assert!(check_degree(8).is_ok());
        assert!(check_cells(1025).is_err());
        assert!(check_alpha(-0.1).is_err());
        assert!(check_alpha(0.0).is_ok());
    }

    #[test]
    fn unknown_keys_rejected() {
        let doc: toml::Table = toml::from_str("[run]\nkk = 1\n").unwrap();
        let r: Result<Settings, _> = doc["run"].clone().try_into();
        assert!(r.is_err());
    }
}
