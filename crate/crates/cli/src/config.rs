//! `key = value` run configuration with defaults, an optional file layer
//! and command-line overrides, in that order of precedence.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Known keys of one command with their default values; an empty default
/// means the key must be supplied.
pub type Schema = &'static [(&'static str, &'static str)];

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(schema: Schema) -> Self {
        Self { values: schema.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are
    /// skipped; unknown and repeated keys are errors.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("{origin}:{}: expected `key = value`", n + 1))?;
            let (k, v) = (k.trim(), v.trim());
            if !self.values.contains_key(k) {
                bail!("{origin}:{}: unknown key `{k}`", n + 1);
            }
            if seen.insert(k.to_string(), n + 1).is_some() {
                bail!("{origin}:{}: key `{k}` given twice", n + 1);
            }
            self.values.insert(k.to_string(), v.to_string());
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Command-line value for `key`, if the flag was given.
    pub fn set<T: Display>(&mut self, key: &str, value: Option<T>) {
        assert!(self.values.contains_key(key), "flag {key} missing from schema");
        if let Some(v) = value {
            self.values.insert(key.to_string(), v.to_string());
        }
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("key {key} missing from schema"))
    }

    pub fn get<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        let v = self.raw(key);
        if v.is_empty() {
            bail!("missing required setting `{key}`");
        }
        v.parse().map_err(|e| anyhow!("bad value `{v}` for `{key}`: {e}"))
    }

    /// `None` for an empty value.
    pub fn optional<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if self.raw(key).is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    /// Sorted `key = value` lines; feeding them back reproduces the run.
    pub fn echo(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Three comma-separated fractions for train, valid and test.
pub fn split_sizes(spec: &str, n: usize) -> Result<[usize; 3]> {
    let parts: Vec<f64> = spec.split(',').map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| anyhow!("split `{spec}`: {e}"))?;
    if parts.len() != 3 || parts.iter().any(|f| !(0.0..=1.0).contains(f)) || parts.iter().sum::<f64>() > 1.0 + 1e-9 {
        bail!("split `{spec}` must be three fractions in [0, 1] summing to at most 1");
    }
    Ok([0, 1, 2].map(|i| (parts[i] * n as f64 + 1e-9).floor() as usize))
}
