//! Flag and config-file layering.
//!
//! Config files hold `key = value` lines (`#` starts a comment); keys are the
//! long flag names of the subcommand. Flags win over the file. Every value the
//! run actually uses, defaults included, is recorded for the echo file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// A problem with the command line or config file (exit code 2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, UsageError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key = value, got {raw:?}", n + 1)))?;
        let key = k.trim().replace('_', "-");
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(usage(format!("config line {}: {key} given twice", n + 1)));
        }
    }
    Ok(out)
}

/// Merged settings for one subcommand.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    used: std::cell::RefCell<BTreeMap<String, String>>,
}

impl Settings {
    /// `allowed` lists the subcommand's keys; file keys outside it are rejected.
    pub fn layer(
        file: BTreeMap<String, String>,
        flags: BTreeMap<String, String>,
        allowed: &[String],
    ) -> Result<Self, UsageError> {
        if let Some(k) = file.keys().find(|k| !allowed.contains(k)) {
            return Err(usage(format!("unknown config key {k:?}")));
        }
        let mut values = file;
        values.extend(flags);
        values.remove("config");
        Ok(Settings { values, used: Default::default() })
    }

    pub fn from_file_and_flags(
        config: Option<&Path>,
        flags: BTreeMap<String, String>,
        allowed: &[String],
    ) -> Result<Self, UsageError> {
        let file = match config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| usage(format!("config file {}: {e}", p.display())))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        Self::layer(file, flags, allowed)
    }

    fn record(&self, key: &str, value: String) {
        self.used.borrow_mut().insert(key.to_string(), value);
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, UsageError>
    where
        T::Err: fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => {
                let parsed = v.parse::<T>().map_err(|e| usage(format!("--{key} {v:?}: {e}")))?;
                self.record(key, v.clone());
                Ok(Some(parsed))
            }
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, UsageError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)?.ok_or_else(|| usage(format!("missing required setting {key} (--{key})")))
    }

    pub fn get_or<T: FromStr + fmt::Display>(&self, key: &str, default: T) -> Result<T, UsageError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, default.to_string());
                Ok(default)
            }
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool, UsageError> {
        self.get_or(key, false)
    }

    /// Comma-separated list; `default` is used (and echoed) when absent.
    pub fn list<T: FromStr>(&self, key: &str, default: Option<&str>) -> Result<Option<Vec<T>>, UsageError>
    where
        T::Err: fmt::Display,
    {
        let raw = match (self.values.get(key), default) {
            (Some(v), _) => v.clone(),
            (None, Some(d)) => d.to_string(),
            (None, None) => return Ok(None),
        };
        let items: Vec<&str> = raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if items.is_empty() {
            return Err(usage(format!("--{key}: empty list")));
        }
        let parsed = items
            .iter()
            .map(|s| s.parse::<T>().map_err(|e| usage(format!("--{key} item {s:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        self.record(key, items.join(","));
        Ok(Some(parsed))
    }

    pub fn require_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, UsageError>
    where
        T::Err: fmt::Display,
    {
        self.list(key, None)?.ok_or_else(|| usage(format!("missing required setting {key} (--{key})")))
    }

    /// `key=value` lines of every value used, sorted by key.
    pub fn echo(&self, command: &str) -> String {
        let mut out = format!("command={command}\n");
        for (k, v) in self.used.borrow().iter() {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn file_syntax() {
        let m = parse_config_text("# run\nseed = 7\nslopes=1, 2 # trailing\n\ndata_dir = /tmp/x\n").unwrap();
        assert_eq!(m, map(&[("seed", "7"), ("slopes", "1, 2"), ("data-dir", "/tmp/x")]));
        assert!(parse_config_text("seed 7").is_err());
        assert!(parse_config_text("seed=1\nseed=2").is_err());
    }

    #[test]
    fn flags_override_file_and_echo_shows_final_value() {
        let allowed: Vec<String> = ["seed", "epochs"].iter().map(|s| s.to_string()).collect();
        let s = Settings::layer(map(&[("seed", "1"), ("epochs", "3")]), map(&[("seed", "9")]), &allowed).unwrap();
        assert_eq!(s.require::<u64>("seed").unwrap(), 9);
        assert_eq!(s.get_or("epochs", 5usize).unwrap(), 3);
        assert_eq!(s.get_or("lr", 0.01f64).unwrap(), 0.01);
        assert_eq!(s.echo("train"), "command=train\nepochs=3\nlr=0.01\nseed=9\n");
    }

    #[test]
    fn errors_name_the_setting() {
        let allowed = vec!["seed".to_string()];
        let s = Settings::layer(BTreeMap::new(), BTreeMap::new(), &allowed).unwrap();
        assert!(s.require::<u64>("seed").unwrap_err().0.contains("seed"));
        let bad = Settings::layer(map(&[("sed", "1")]), BTreeMap::new(), &allowed).unwrap_err();
        assert!(bad.0.contains("sed"));
        let empty = Settings::layer(BTreeMap::new(), map(&[("attacks", " , ")]), &allowed).unwrap();
        assert!(empty.list::<String>("attacks", None).is_err());
    }
}
