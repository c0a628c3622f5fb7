//! Flat `key=value` text files with `#` comment lines.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KvError {
    #[error("line {line}: expected key=value, got {content:?}")]
    Syntax { line: usize, content: String },
    #[error("duplicate key {0:?}")]
    Duplicate(String),
    #[error("missing key {0:?}")]
    Missing(String),
    #[error("key {key:?}: invalid value {value:?}")]
    Invalid { key: String, value: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Ordered key/value pairs; written back in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
    index: BTreeMap<String, usize>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, KvError> {
        let mut kv = KeyValues::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| KvError::Io(e.to_string()))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (k, v) = trimmed.split_once('=').ok_or_else(|| KvError::Syntax {
                line: i + 1,
                content: line.clone(),
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(KvError::Syntax {
                    line: i + 1,
                    content: line.clone(),
                });
            }
            if kv.index.contains_key(k) {
                return Err(KvError::Duplicate(k.to_string()));
            }
            kv.set(k, v.trim());
        }
        Ok(kv)
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(out, "{k}={v}")?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Self {
        let value = value.to_string();
        match self.index.get(key) {
            Some(&i) => self.entries[i].1 = value,
            None => {
                self.index.insert(key.to_string(), self.entries.len());
                self.entries.push((key.to_string(), value));
            }
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.index.get(key).map(|&i| self.entries[i].1.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, KvError> {
        self.get(key).ok_or_else(|| KvError::Missing(key.to_string()))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, KvError> {
        self.get(key)
            .map(|v| {
                v.parse().map_err(|_| KvError::Invalid {
                    key: key.to_string(),
                    value: v.to_string(),
                })
            })
            .transpose()
    }

    pub fn parse_required<T: FromStr>(&self, key: &str) -> Result<T, KvError> {
        self.parse(key)?.ok_or_else(|| KvError::Missing(key.to_string()))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }
}
