//! Key-value configuration files and flag/file/default resolution.
//!
//! A config file holds one `key = value` per line; `#` starts a comment.
//! Keys are the long flag names without leading dashes, e.g.
//! `n-select = 20` or `adm-mode = single-step`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;

use crate::error::{CliError, CliResult, ExitCode};

pub const KNOWN_KEYS: &[&str] = &[
    "n-select",
    "lambda-rel",
    "tau-rel",
    "direction",
    "mu",
    "inner-tol",
    "inner-max-iter",
    "outer-tol",
    "outer-max-iter",
    "adm-mode",
    "warm-start-lambda",
    "projection",
    "lambda-a",
    "lambda-b",
    "max-frames",
    "threads",
    "seed",
    "height",
    "width",
    "frames",
    "square",
    "speed",
    "noise-sigma",
    "n",
    "standard-n",
];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::new(ExitCode::Usage, format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text).map_err(|m| CliError::usage(format!("{}: {m}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", no + 1))?;
            let key = key.trim().trim_start_matches("--").to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(format!("line {}: unknown key '{key}'", no + 1));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::usage(format!("config key '{key}': {e}")))
            })
            .transpose()
    }

    /// Flag value if given, else the config value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// Like [`ConfigFile::pick`] for clap value enums.
    pub fn pick_enum<T: ValueEnum>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.raw(key) {
            None => Ok(default),
            Some(v) => T::from_str(v, true).map_err(|e| CliError::usage(format!("config key '{key}': {e}"))),
        }
    }
}

/// A number or the word `auto`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutoOr(pub Option<f64>);

impl FromStr for AutoOr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self(None));
        }
        s.parse::<f64>()
            .map(|v| Self(Some(v)))
            .map_err(|_| format!("expected a number or 'auto', got '{s}'"))
    }
}

/// Frame counts given as `a..b` (inclusive), a comma list, or a mix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountList(pub Vec<usize>);

impl FromStr for CountList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let parse = |t: &str| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("invalid count '{t}' in '{s}'"))
            };
            if let Some((a, b)) = part.split_once("..") {
                let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
                if a > b {
                    return Err(format!("empty range '{part}'"));
                }
                out.extend(a..=b);
            } else {
                out.push(parse(part)?);
            }
        }
        if out.is_empty() {
            return Err("no frame counts given".into());
        }
        Ok(Self(out))
    }
}
