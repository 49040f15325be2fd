//! Flat `key = value` config files.
//!
//! ```text
//! # comments start with '#'
//! dict = dct
//! sr = 0.4, 0.6, 0.8
//! max_iter = 50
//! sigma1 = 0.32
//! ```

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEntry {
    /// 1-based line number, for error messages.
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_config(text: &str) -> Result<Vec<ConfigEntry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Malformed {
                what: "config",
                reason: format!("line {}: expected `key = value`", i + 1),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Malformed {
                what: "config",
                reason: format!("line {}: empty key", i + 1),
            });
        }
        out.push(ConfigEntry {
            line: i + 1,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ExperimentSpec;

    #[test]
    fn parses_comments_and_blanks() {
        let e = parse_config("# header\n\ndict = haar-wp  # inline\nsr=0.5,1\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].key, "dict");
        assert_eq!(e[0].value, "haar-wp");
        assert_eq!(e[0].line, 3);
        assert_eq!(e[1].value, "0.5,1");
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(parse_config("dict dct").is_err());
        assert!(parse_config(" = 3").is_err());
    }

    #[test]
    fn unknown_key_reports_line() {
        let e = parse_config("n = 64\nwidth = 3\n").unwrap();
        let mut spec = ExperimentSpec::default();
        let err = spec.apply(&e).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
