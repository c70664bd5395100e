//! Flat `key = value` config files. Keys are long flag names without the
//! leading dashes; blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};

use crate::UsageError;

pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "out-dir",
    "topology",
    "p",
    "p-grid",
    "lambda",
    "lambda-grid",
    "reps",
    "max-iters",
    "rel-tol",
    "tau-scale",
    "freeze-instance",
    "raw-features",
    "instance-dir",
];

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    source: String,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{source}:{}: expected `key = value`", idx + 1)))?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(usage(format!("{source}:{}: unknown key `{key}`", idx + 1)));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(usage(format!("{source}:{}: key `{key}` repeated", idx + 1)));
            }
        }
        Ok(Self {
            values,
            source: source.to_string(),
        })
    }

    /// The command-line value if given, else the parsed file value.
    pub fn pick<T: FromStr>(&self, cli: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        self.values
            .get(key)
            .map(|raw| {
                raw.parse::<T>()
                    .map_err(|e| usage(format!("{}: bad value `{raw}` for `{key}`: {e}", self.source)))
            })
            .transpose()
    }

    /// Comma-separated lists, e.g. `p-grid = 0.1,0.5,0.9`.
    pub fn pick_list(&self, cli: Option<Vec<f64>>, key: &str) -> Result<Option<Vec<f64>>> {
        if cli.is_some() {
            return Ok(cli);
        }
        self.values
            .get(key)
            .map(|raw| parse_list(raw).map_err(|e| usage(format!("{}: `{key}`: {e}", self.source))))
            .transpose()
    }

    /// Boolean switches: set when either the flag or a truthy file value is present.
    pub fn pick_flag(&self, cli: bool, key: &str) -> Result<bool> {
        if cli {
            return Ok(true);
        }
        match self.values.get(key).map(String::as_str) {
            None | Some("false") | Some("0") => Ok(false),
            Some("true") | Some("1") => Ok(true),
            Some(other) => Err(usage(format!("{}: `{key}` must be true or false, got `{other}`", self.source))),
        }
    }
}

pub fn parse_list(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().map_err(|_| anyhow!("cannot parse `{s}` as a number"))
        })
        .collect()
}

fn usage(msg: String) -> anyhow::Error {
    UsageError(msg).into()
}
