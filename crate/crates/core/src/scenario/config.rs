//! Flat `key = value` scenario files.
//!
//! ```text
//! file    := line*
//! line    := blank | comment | entry
//! comment := '#' any*
//! entry   := key '=' value [ws '#' any*]
//! key     := ident ('.' ident)*        ident := [A-Za-z_][A-Za-z0-9_]*
//! value   := any text up to the end of line or comment, trimmed;
//!            one pair of enclosing double quotes is stripped
//! ```
//!
//! Keys are unique. Every key must be consumed by the reader; leftovers are
//! reported with their line numbers.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use crate::error::{OtError, Result};

#[derive(Debug)]
pub struct Config {
    entries: BTreeMap<String, (String, usize)>,
    used: RefCell<BTreeSet<String>>,
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && k.split('.').all(|id| {
            let mut c = id.chars();
            matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_')
                && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
        })
}

fn err(line: usize, msg: impl Into<String>) -> OtError {
    OtError::Config { line, msg: msg.into() }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let (k, v) = s.split_once('=').ok_or_else(|| err(line, format!("expected `key = value`, got `{s}`")))?;
            let key = k.trim();
            if !valid_key(key) {
                return Err(err(line, format!("malformed key `{key}`")));
            }
            let mut v = v.trim();
            if let Some(q) = v.strip_prefix('"') {
                let end = q.find('"').ok_or_else(|| err(line, "unterminated quote"))?;
                let rest = q[end + 1..].trim();
                if !(rest.is_empty() || rest.starts_with('#')) {
                    return Err(err(line, format!("trailing text `{rest}` after quoted value")));
                }
                v = &q[..end];
            } else if let Some(at) = v.find(" #").or_else(|| v.find("\t#")) {
                v = v[..at].trim_end();
            }
            if v.is_empty() {
                return Err(err(line, format!("empty value for `{key}`")));
            }
            if let Some((_, first)) = entries.insert(key.to_string(), (v.to_string(), line)) {
                return Err(err(line, format!("duplicate key `{key}` (first set on line {first})")));
            }
        }
        Ok(Self { entries, used: RefCell::new(BTreeSet::new()) })
    }

    /// Raw value and its line.
    pub fn raw(&self, key: &str) -> Option<(&str, usize)> {
        let (v, l) = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some((v.as_str(), *l))
    }

    pub fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.1)
    }

    /// Parses `key` with `f`, attaching the line number to any error.
    pub fn get_with<V>(&self, key: &str, f: impl FnOnce(&str) -> Result<V>) -> Result<Option<V>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => f(v).map(Some).map_err(|e| match e {
                OtError::Config { .. } => e,
                OtError::Invalid(msg) => err(line, format!("{key}: {msg}")),
                other => err(line, format!("{key}: {other}")),
            }),
        }
    }

    pub fn get<V: FromStr>(&self, key: &str) -> Result<Option<V>> {
        self.get_with(key, |v| v.parse::<V>().map_err(|_| OtError::Invalid(format!("cannot parse `{v}`"))))
    }

    pub fn require<V: FromStr>(&self, key: &str) -> Result<V> {
        self.get(key)?.ok_or_else(|| err(0, format!("missing required key `{key}`")))
    }

    /// Fails on the first key nobody read.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.entries.iter().filter(|(k, _)| !used.contains(*k)).min_by_key(|(_, (_, l))| *l) {
            Some((k, (_, l))) => Err(err(*l, format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries_and_comments() {
        let c = Config::parse("# head\nname = demo\n\ncost = \"log\"  # trailing\nmesh.resolution=128 # r\n").unwrap();
        assert_eq!(c.raw("name"), Some(("demo", 2)));
        assert_eq!(c.require::<String>("cost").unwrap(), "log");
        assert_eq!(c.get::<usize>("mesh.resolution").unwrap(), Some(128));
        assert_eq!(c.get::<usize>("solver.tol").unwrap(), None);
        c.finish().unwrap();
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = Config::parse("a = 1\nnot an entry\n").unwrap_err();
        assert_eq!(e, OtError::Config { line: 2, msg: "expected `key = value`, got `not an entry`".into() });
        assert!(matches!(Config::parse("a = 1\n\na = 2").unwrap_err(), OtError::Config { line: 3, .. }));
        assert!(matches!(Config::parse("x..y = 1").unwrap_err(), OtError::Config { line: 1, .. }));
        assert!(matches!(Config::parse("x = \"open").unwrap_err(), OtError::Config { line: 1, .. }));
        let c = Config::parse("a = 1\nb = two\n").unwrap();
        assert!(matches!(c.get::<usize>("b").unwrap_err(), OtError::Config { line: 2, .. }));
        assert!(matches!(c.finish().unwrap_err(), OtError::Config { line: 1, .. }));
    }
}
