use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// A problem with the command line or the config file; exits with code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Unwraps a required setting.
pub fn required<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| usage(format!("missing required setting `--{}`", name.replace('_', "-"))))
}

const SECTIONS: [&str; 7] = ["serve", "make-hits", "qc", "analyze", "train", "eval", "report"];

/// Parsed config file.
#[derive(Debug, Default)]
pub struct ConfigFile {
    table: toml::Table,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<ConfigFile> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        for (key, value) in &table {
            if !SECTIONS.contains(&key.as_str()) || !value.is_table() {
                return Err(usage(format!("{}: unknown section `{key}`", path.display())));
            }
        }
        Ok(ConfigFile { table })
    }

    /// Overlays the flags that were given onto the `[section]` table.
    pub fn merge<T: Serialize + DeserializeOwned>(&self, section: &str, flags: &T) -> Result<T> {
        let mut merged = match self.table.get(section) {
            Some(t) => serde_json::to_value(t)?,
            None => Value::Object(Default::default()),
        };
        let Value::Object(over) = serde_json::to_value(flags)? else {
            unreachable!("argument structs serialize to objects");
        };
        let target = merged.as_object_mut().expect("sections are tables");
        for (k, v) in over {
            target.insert(k.replace('-', "_"), v);
        }
        serde_json::from_value(merged).map_err(|e| usage(format!("[{section}]: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::TrainArgs;

    fn file(text: &str) -> ConfigFile {
        ConfigFile { table: toml::from_str(text).unwrap() }
    }

    #[test]
    fn flags_win_over_the_file() {
        let cfg = file("[train]\nlambda = 5.0\nepochs = 3\n");
        let flags = TrainArgs { lambda: Some(50.0), ..Default::default() };
        let t = cfg.merge("train", &flags).unwrap();
        assert_eq!(t.lambda, Some(50.0));
        assert_eq!(t.epochs, Some(3));
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let cfg = file("[train]\nlamda = 5.0\n");
        let err = cfg.merge("train", &TrainArgs::default()).unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }
}
