//! Option merging and exit-code mapping.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::str::FromStr;

/// A command failure carrying its exit code: 1 for I/O and validation
/// failures, 2 for usage errors, 3 for numeric faults.
pub struct Failure {
    pub code: ExitCode,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: ExitCode::from(2),
            message: message.into(),
        }
    }

    pub fn usage_from(err: aln::Error) -> Failure {
        Failure::usage(err.to_string())
    }

    pub fn runtime(message: impl Into<String>) -> Failure {
        Failure {
            code: ExitCode::from(1),
            message: message.into(),
        }
    }
}

impl From<aln::Error> for Failure {
    fn from(err: aln::Error) -> Failure {
        let code = if err.is_numeric_fault() { 3 } else { 1 };
        Failure {
            code: ExitCode::from(code),
            message: err.to_string(),
        }
    }
}

/// Key-value options loaded from a `--config` file. Keys are long flag names
/// without the leading dashes; explicit flags always win.
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<ConfigFile, Failure> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::runtime(format!("cannot read config {}: {e}", path.display())))?;
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Failure::usage(format!(
                        "config {} line {}: expected key=value",
                        path.display(),
                        idx + 1
                    ))
                })?;
                values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(ConfigFile { values })
    }

    fn lookup<T: FromStr>(&self, key: &str) -> Result<Option<T>, Failure> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Failure::usage(format!("config value {key}={raw:?} has the wrong type"))
            }),
        }
    }

    /// defaults < config file < flag.
    pub fn resolve<T: FromStr>(
        &self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, Failure> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.lookup(key)?.unwrap_or(default)),
        }
    }

    pub fn resolve_opt<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, Failure> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.lookup(key),
        }
    }

    pub fn resolve_required<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<T, Failure> {
        self.resolve_opt(key, flag)?
            .ok_or_else(|| Failure::usage(format!("missing required option --{key}")))
    }
}
