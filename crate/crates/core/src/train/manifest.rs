use crate::error::Result;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

/// Ordered `key=value` record of a run: settings, seed, data hash and
/// metrics. Keys are unique; setting an existing key replaces its value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunManifest {
    entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    /// Adds every pair under `prefix.`.
    pub fn extend<'a>(&mut self, prefix: &str, pairs: impl IntoIterator<Item = (&'a str, String)>) {
        for (k, v) in pairs {
            self.set(format!("{prefix}.{k}"), v);
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            writeln!(out, "{k}={v}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Self {
        let mut m = Self::new();
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                m.set(k, v);
            }
        }
        m
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
