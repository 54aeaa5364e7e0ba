use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use dner_core::neural::ScorerConfig;

pub const PATH_KEYS: [&str; 7] = [
    "train",
    "dev",
    "test",
    "external",
    "dev_external",
    "checkpoint",
    "report",
];

/// Scorer hyperparameters plus the file paths a run touches.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub scorer: ScorerConfig,
    pub paths: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if PATH_KEYS.contains(&key) {
            self.paths.insert(key.to_string(), value.to_string());
            return Ok(());
        }
        if !self.scorer.set(key, value)? {
            bail!("unknown config key `{key}`");
        }
        Ok(())
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("{origin}:{}: expected `key = value`", i + 1);
            };
            self.set(k.trim(), v.trim())
                .with_context(|| format!("{origin}:{}", i + 1))?;
        }
        Ok(())
    }

    /// `KEY=VALUE` from the command line.
    pub fn apply_override(&mut self, pair: &str) -> Result<()> {
        let Some((k, v)) = pair.split_once('=') else {
            bail!("override `{pair}` is not KEY=VALUE");
        };
        self.set(k.trim(), v.trim())
    }

    pub fn path(&self, key: &str) -> Option<&str> {
        self.paths.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.path(key)
            .with_context(|| format!("missing path `{key}` (flag --{key} or config key)"))
    }

    pub fn to_text(&self) -> String {
        let mut out = self.scorer.to_text();
        for key in PATH_KEYS {
            if let Some(v) = self.paths.get(key) {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        out
    }
}
