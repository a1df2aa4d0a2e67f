//! Flat UTF-8 `key = value` configuration files.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored and
//! there is no nesting. Lists are comma separated. The same format is used
//! for scene presets, sweep specifications, stack sidecars, metrics and run
//! manifests, so [`KeyValues`] also renders itself back to text.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Ordered set of configuration entries. Keys are unique.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    origin: String,
    entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn new(origin: impl Into<String>) -> Self {
        KeyValues {
            origin: origin.into(),
            entries: Vec::new(),
        }
    }

    pub fn parse(text: &str, origin: impl Into<String>) -> Result<Self> {
        let mut kv = KeyValues::new(origin);
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                origin: kv.origin.clone(),
                reason: format!("line {}: expected `key = value`", lineno + 1),
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Config {
                    origin: kv.origin.clone(),
                    reason: format!("line {}: malformed key `{key}`", lineno + 1),
                });
            }
            if kv.contains(key) {
                return Err(Error::Config {
                    origin: kv.origin.clone(),
                    reason: format!("duplicate key `{key}`"),
                });
            }
            kv.entries.push((key.to_string(), value.trim().to_string()));
        }
        Ok(kv)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.display().to_string())
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.iter().any(|(k, _)| k == key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Rejects any key not present in `allowed`.
    pub fn ensure_known(&self, allowed: &[&str]) -> Result<()> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(key) => Err(Error::UnknownKey {
                key: key.to_string(),
                origin: self.origin.clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require_raw(&self, key: &str) -> Result<&str> {
        self.raw(key).ok_or_else(|| Error::MissingKey {
            key: key.to_string(),
            origin: self.origin.clone(),
        })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key).map(|v| self.parse_value(key, v)).transpose()
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require_raw(key)?;
        self.parse_value(key, raw)
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma separated list. An empty value yields an empty list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(raw) = self.raw(key) else {
            return Ok(None);
        };
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| self.parse_value(key, s))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn parse_value<T: FromStr>(&self, key: &str, raw: &str) -> Result<T> {
        raw.parse::<T>().map_err(|_| Error::Config {
            origin: self.origin.clone(),
            reason: format!("key `{key}`: cannot parse `{raw}`"),
        })
    }

    /// Sets `key`, replacing an earlier value in place.
    pub fn set(&mut self, key: impl Into<String>, value: impl Display) {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn set_list<T: Display>(&mut self, key: impl Into<String>, values: &[T]) {
        let joined = values
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(",");
        self.set(key, joined);
    }

    pub fn extend_from(&mut self, other: &KeyValues) {
        for (k, v) in &other.entries {
            self.set(k.clone(), v);
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let kv = KeyValues::parse("# preset\n\nt_r = 10 # period\nsbr = 0.5, 1,2\n", "t").unwrap();
        assert_eq!(kv.require::<f64>("t_r").unwrap(), 10.0);
        assert_eq!(
            kv.get_list::<f64>("sbr").unwrap().unwrap(),
            vec![0.5, 1.0, 2.0]
        );
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert!(KeyValues::parse("a = 1\na = 2", "t").is_err());
        assert!(KeyValues::parse("just words", "t").is_err());
        assert!(KeyValues::parse("two words = 1", "t").is_err());
    }

    #[test]
    fn unknown_and_missing_keys_are_named() {
        let kv = KeyValues::parse("t_r = 1\nbogus = 2", "f").unwrap();
        match kv.ensure_known(&["t_r"]) {
            Err(Error::UnknownKey { key, .. }) => assert_eq!(key, "bogus"),
            other => panic!("{other:?}"),
        }
        match kv.require::<f64>("n_r") {
            Err(Error::MissingKey { key, .. }) => assert_eq!(key, "n_r"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn text_round_trip() {
        let mut kv = KeyValues::new("x");
        kv.set("a", 0.1f64);
        kv.set_list("b", &[1.5f64, 2.0]);
        kv.set("a", 3);
        let back = KeyValues::parse(&kv.to_text(), "x").unwrap();
        assert_eq!(back.entries(), kv.entries());
    }
}
