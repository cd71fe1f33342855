//! Flat `key=value` configuration.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored. Keys are
//! dotted (`textadain.p`, `train.iterations`); later assignments win, which is
//! also how command-line overrides are layered on top of a file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::textadain::{DonorSource, TextAdainConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", n + 1)));
            }
            cfg.set(k, v.trim());
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Apply `key=value` overrides, e.g. from repeated `--set` flags.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{}` is not key=value", o.as_ref())))?;
            self.set(k.trim(), v.trim());
        }
        Ok(())
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Parse `key` if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::Config(format!("{key}: cannot parse `{v}`: {e}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Keys outside `known` (so typos fail loudly instead of being ignored).
    pub fn unknown_keys(&self, known: &[&str]) -> Vec<String> {
        self.keys().filter(|k| !known.contains(k)).map(str::to_string).collect()
    }

    /// The `textadain.*` section over the library defaults, plus the
    /// `textadain.enabled` switch (default off).
    pub fn textadain(&self) -> Result<(bool, TextAdainConfig)> {
        let d = TextAdainConfig::default();
        let cfg = TextAdainConfig {
            p: self.get_or("textadain.p", d.p)?,
            k: self.get_or("textadain.k", d.k)?,
            eps: self.get_or("textadain.eps", d.eps)?,
            kept: self.get_or("textadain.kept", d.kept)?,
            donor: self.get_or::<DonorSource>("textadain.donor", d.donor)?,
        };
        cfg.validate()?;
        Ok((self.get_or("textadain.enabled", false)?, cfg))
    }

    /// Render back to the file format (sorted by key).
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

pub const TEXTADAIN_KEYS: &[&str] = &[
    "textadain.p",
    "textadain.k",
    "textadain.eps",
    "textadain.kept",
    "textadain.donor",
    "textadain.enabled",
];
