//! Minimal CSV helpers for the numeric tables this crate emits. Fields never
//! contain commas or quotes, so no quoting is needed.

use crate::error::{Error, Result};

/// Shortest text that parses back to the identical `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn parse_f64(field: &str, column: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("column `{column}`: {field:?} is not a number")))
}

pub fn parse_usize(field: &str, column: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("column `{column}`: {field:?} is not an integer")))
}

/// Splits CSV text into rows after checking the header line exactly.
pub fn parse_table(text: &str, header: &str) -> Result<Vec<Vec<String>>> {
    let mut lines = text.lines();
    let found = lines
        .next()
        .ok_or_else(|| Error::Format("empty CSV".into()))?;
    if found.trim_end() != header {
        return Err(Error::Format(format!(
            "unexpected CSV header {found:?}, expected {header:?}"
        )));
    }
    let width = header.split(',').count();
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let fields: Vec<String> = l.split(',').map(str::to_string).collect();
            if fields.len() != width {
                return Err(Error::Format(format!(
                    "CSV line {}: {} fields, expected {width}",
                    i + 2,
                    fields.len()
                )));
            }
            Ok(fields)
        })
        .collect()
}
