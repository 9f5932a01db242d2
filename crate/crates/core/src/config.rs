//! Plain-text `key = value` configuration files with `#` comments.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl Entry {
    pub fn number(&self) -> Result<f64> {
        self.value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.invalid("a finite number"))
    }

    pub fn integer(&self) -> Result<u64> {
        self.value
            .parse::<u64>()
            .map_err(|_| self.invalid("a non-negative integer"))
    }

    pub fn invalid(&self, expected: &str) -> Error {
        Error::Config(format!(
            "line {}: {} = {:?} is not {expected}",
            self.line, self.key, self.value
        ))
    }

    pub fn unknown(&self) -> Error {
        Error::Config(format!("line {}: unknown key {:?}", self.line, self.key))
    }
}

/// Sets the slot named by `entry.key`, if any. Returns whether a slot
/// matched.
pub fn assign(entry: &Entry, slots: &mut [(&str, &mut f64)]) -> Result<bool> {
    match slots.iter_mut().find(|(k, _)| *k == entry.key) {
        Some((_, slot)) => {
            **slot = entry.number()?;
            Ok(true)
        }
        None => Ok(false),
    }
}

/// Splits a config file into entries. Blank lines and `#` comments (whole
/// line or trailing) are skipped; a repeated key keeps every occurrence so
/// the last one wins when applied in order.
pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`, got {raw:?}", i + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config(format!(
                "line {}: empty key or value in {raw:?}",
                i + 1
            )));
        }
        entries.push(Entry {
            line: i + 1,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let text = "# detector\n onset_threshold_db = 10 # dB\n\ntail_min_s=0.12\n";
        let e = parse(text).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].key, "onset_threshold_db");
        assert_eq!(e[0].number().unwrap(), 10.0);
        assert_eq!(e[1].line, 4);
        assert_eq!(e[1].number().unwrap(), 0.12);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse("just words\n").is_err());
        assert!(parse("= 3\n").is_err());
        assert!(parse("key =\n").is_err());
        let e = parse("seed = -1\nx = nan").unwrap();
        assert!(e[0].integer().is_err());
        assert!(e[1].number().is_err());
    }
}
