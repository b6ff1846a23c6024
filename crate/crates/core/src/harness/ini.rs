//! Flat `key = value` files with `[section]` headers.
//!
//! `#` and `;` start comments. Keys may repeat; the consumer decides whether
//! repetition is meaningful.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse_ini(text: &str) -> Result<Vec<Entry>> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find(['#', ';']) {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Format(format!("line {line_no}: unterminated section header")))?
                .trim();
            if name.is_empty() {
                return Err(Error::Format(format!("line {line_no}: empty section name")));
            }
            section = name.to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {line_no}: expected `key = value`")))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Format(format!("line {line_no}: empty key")));
        }
        out.push(Entry {
            section: section.clone(),
            key: key.to_string(),
            value: v.trim().to_string(),
            line: line_no,
        });
    }
    Ok(out)
}
