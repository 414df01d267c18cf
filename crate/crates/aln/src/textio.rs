//! Shared helpers for the line-delimited text formats (datasets, checkpoints,
//! metrics, reports).
//!
//! Records are single lines of space-separated `key=value` fields. Floats are
//! always written with 17 significant digits (`{:.16e}`), which round-trips
//! f64 exactly: save -> load -> save reproduces files byte for byte.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// 17-significant-digit scientific notation; parses back to the same bits.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Parse {
        line,
        detail: format!("invalid float {s:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            detail: format!("non-finite float {s:?}"),
        });
    }
    Ok(v)
}

pub(crate) fn format_f64_list(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 24);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format_f64(*v));
    }
    out
}

pub(crate) fn parse_f64_list(s: &str, line: usize) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|tok| parse_f64(tok, line)).collect()
}

/// One parsed `key=value` record.
#[derive(Debug)]
pub(crate) struct Fields {
    pairs: Vec<(String, String)>,
    pub line: usize,
}

impl Fields {
    pub fn parse(text: &str, line: usize) -> Result<Fields> {
        let mut pairs = Vec::new();
        for token in text.split_whitespace() {
            let (key, value) = token.split_once('=').ok_or_else(|| Error::Parse {
                line,
                detail: format!("expected key=value, got {token:?}"),
            })?;
            pairs.push((key.to_string(), value.to_string()));
        }
        Ok(Fields { pairs, line })
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Parse {
                line: self.line,
                detail: format!("missing field {key:?}"),
            })
    }

    pub fn get_opt(&self, key: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        self.get(key)?.parse().map_err(|_| Error::Parse {
            line: self.line,
            detail: format!("field {key:?} is not a count"),
        })
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        self.get(key)?.parse().map_err(|_| Error::Parse {
            line: self.line,
            detail: format!("field {key:?} is not an integer"),
        })
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        parse_f64(self.get(key)?, self.line)
    }
}

/// Write a whole file atomically: write to a sibling temp file, then rename.
pub(crate) fn write_atomic(path: &Path, body: &str) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(body.as_bytes())?;
        file.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips_exactly() {
        let values = [
            0.0,
            -0.0,
            1.0,
            -1.5,
            std::f64::consts::PI,
            1e-300,
            -2.2250738585072014e-308,
            1.7976931348623157e308,
            0.1 + 0.2,
        ];
        for &v in &values {
            let s = format_f64(v);
            let back = parse_f64(&s, 1).unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v} -> {s}");
            // Reformatting the parsed value gives identical text.
            assert_eq!(s, format_f64(back));
        }
    }

    #[test]
    fn parse_rejects_non_finite() {
        assert!(parse_f64("NaN", 3).is_err());
        assert!(parse_f64("inf", 3).is_err());
        assert!(parse_f64("1e999", 3).is_err());
    }

    #[test]
    fn fields_report_line_numbers() {
        let err = Fields::parse("id=a junk", 7).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
        let fields = Fields::parse("a=1 b=2", 9).unwrap();
        match fields.get("missing").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 9),
            other => panic!("unexpected {other:?}"),
        }
    }
}
