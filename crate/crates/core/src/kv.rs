//! Flat `key=value` text files. Reports, shard manifests, stage markers and
//! run configs all use this format: one pair per line, `#` comment lines
//! ignored, keys sorted on write, and an optional trailing `checksum` line
//! covering everything above it.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hashing::sha256_hex;

pub const CHECKSUM_KEY: &str = "checksum";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    entries: BTreeMap<String, String>,
}

impl KvFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        debug_assert!(!key.contains('=') && !key.contains('\n'));
        debug_assert!(!value.contains('\n'));
        self.entries.insert(key.to_string(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::Format(format!("missing key `{key}`")))?;
        raw.parse()
            .map_err(|_| Error::Format(format!("key `{key}` has unparsable value `{raw}`")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Serializes sorted pairs plus the trailing checksum line.
    pub fn to_string_with_checksum(&self) -> String {
        let mut body = String::new();
        for (k, v) in &self.entries {
            body.push_str(k);
            body.push('=');
            body.push_str(v);
            body.push('\n');
        }
        let digest = sha256_hex(body.as_bytes());
        format!("{body}{CHECKSUM_KEY}={digest}\n")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string_with_checksum())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut body = String::new();
        let mut found_checksum = None;
        for line in text.lines() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad key-value line `{line}`")))?;
            if k == CHECKSUM_KEY {
                found_checksum = Some(v.to_string());
                continue;
            }
            body.push_str(line);
            body.push('\n');
            entries.insert(k.to_string(), v.to_string());
        }
        if let Some(found) = found_checksum {
            let expect = sha256_hex(body.as_bytes());
            if found != expect {
                return Err(Error::Format(format!(
                    "key-value checksum mismatch: file says {found}, content hashes to {expect}"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }
}
