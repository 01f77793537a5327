//! Flat, sectioned `key = value` configuration text.
//!
//! ```text
//! # comment
//! [grid]
//! scheme = gauss-legendre
//! nodes = 64
//! csco.degeneracy = 1      # dotted keys work anywhere
//! ```
//!
//! A `[name]` header prefixes every following key with `name.` until the next
//! header; `[]` clears the prefix. Keys are `[A-Za-z0-9_]` segments joined by
//! dots. Everything after `#` is a comment. Duplicate keys are errors.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    pub entries: BTreeMap<String, Entry>,
}

/// Syntax or validation failure tied to a line and/or key.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            key: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "key `{k}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key.split('.').all(|seg| {
            !seg.is_empty() && seg.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        })
}

pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
    let mut out = RawConfig::default();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line, "section header is missing `]`"))?
                .trim();
            if !name.is_empty() && !valid_key(name) {
                return Err(ConfigError::at(line, format!("bad section name `{name}`")));
            }
            section = name.to_string();
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| {
            ConfigError::at(line, format!("expected `key = value`, got `{body}`"))
        })?;
        let k = k.trim();
        if !valid_key(k) {
            return Err(ConfigError::at(line, format!("bad key `{k}`")));
        }
        let key = if section.is_empty() {
            k.to_string()
        } else {
            format!("{section}.{k}")
        };
        let value = v.trim();
        if value.is_empty() {
            return Err(ConfigError {
                line: Some(line),
                key: Some(key),
                message: "empty value".into(),
            });
        }
        if let Some(prev) = out.entries.get(&key) {
            return Err(ConfigError {
                line: Some(line),
                key: Some(key),
                message: format!("duplicate key, first set on line {}", prev.line),
            });
        }
        out.entries.insert(
            key,
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_dotted_keys() {
        let c = parse(
            "# top\n[grid]\nnodes = 64 # trailing\nscheme=gauss-legendre\n[]\nkms.t_max = 4\n",
        )
        .unwrap();
        assert_eq!(c.entries["grid.nodes"].value, "64");
        assert_eq!(c.entries["grid.nodes"].line, 3);
        assert_eq!(c.entries["grid.scheme"].value, "gauss-legendre");
        assert_eq!(c.entries["kms.t_max"].value, "4");
    }

    #[test]
    fn errors_carry_line_and_key() {
        let e = parse("a = 1\nb\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse("[x]\ny = 1\ny = 2\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("x.y"));
        assert!(e.to_string().contains("line 3"));
        assert!(parse("[grid\n").is_err());
        assert!(parse("a..b = 1\n").is_err());
        assert!(parse("a = \n").is_err());
    }
}
