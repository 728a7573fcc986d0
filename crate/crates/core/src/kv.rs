//! Flat `key = value` text documents and versioned artifact headers.
//!
//! Every artifact written by this crate starts with a version line of the
//! form `#magpose-<kind> v<N>`. Lines starting with `#` are otherwise
//! comments; blank lines are ignored.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Renders the version line for an artifact kind.
pub fn header(kind: &str, version: u32) -> String {
    format!("#magpose-{kind} v{version}")
}

/// Checks a version line, returning [`Error::Version`] on any mismatch.
pub fn check_header(line: &str, kind: &str, version: u32) -> Result<()> {
    let expected = header(kind, version);
    let found = line.trim_end_matches(['\r', '\n']);
    // extra space-separated attributes may follow the version token
    let prefix = found.split_whitespace().take(2).collect::<Vec<_>>().join(" ");
    if prefix == expected {
        Ok(())
    } else {
        Err(Error::Version {
            expected,
            found: found.to_string(),
        })
    }
}

/// Ordered key/value pairs; later `set` calls replace earlier values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    entries: Vec<(String, String)>,
}

impl KvDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected key = value", i + 1)))?;
            doc.set(k.trim(), v.trim());
        }
        Ok(doc)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Format(format!("missing key {key}")))
    }

    pub fn parse_value<V: FromStr>(&self, key: &str) -> Result<V> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::Format(format!("bad value for {key}: {raw}")))
    }

    pub fn parse_or<V: FromStr>(&self, key: &str, default: V) -> Result<V> {
        match self.get(key) {
            Some(_) => self.parse_value(key),
            None => Ok(default),
        }
    }

    /// Parses a comma-separated list of floats.
    pub fn parse_list(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.require(key)?;
        parse_f64_list(raw).map_err(|_| Error::Format(format!("bad list for {key}")))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn extend(&mut self, other: &KvDoc) {
        for (k, v) in other.entries() {
            self.set(k, v);
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

pub fn format_f64_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn parse_f64_list(raw: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|s| s.trim().parse()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        let doc = KvDoc::parse("#magpose-meta v1\nseed = 7\n\n name=abc \nlist = 1,2.5\n").unwrap();
        assert_eq!(doc.get("name"), Some("abc"));
        assert_eq!(doc.parse_value::<u64>("seed").unwrap(), 7);
        assert_eq!(doc.parse_list("list").unwrap(), vec![1.0, 2.5]);
        let again = KvDoc::parse(&doc.render()).unwrap();
        assert_eq!(again, doc);
    }

    #[test]
    fn bad_line_is_rejected() {
        assert!(KvDoc::parse("no equals sign").is_err());
    }

    #[test]
    fn header_check() {
        assert!(check_header("#magpose-model v1", "model", 1).is_ok());
        assert!(check_header("#magpose-dataset v1 id=abc", "dataset", 1).is_ok());
        assert!(matches!(
            check_header("#magpose-model v2", "model", 1),
            Err(Error::Version { .. })
        ));
    }
}
