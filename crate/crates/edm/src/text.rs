//! Shared pieces of the plain-text formats.

use std::path::Path;
use std::str::FromStr;

use crate::error::{parse_error, Result};

/// Seventeen significant digits: enough to read back the identical `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse().ok()
}

/// `key = value` lines, skipping blanks and `#` comments. Yields 1-based
/// line numbers.
pub fn key_values<'a>(
    path: &'a Path,
    text: &'a str,
) -> impl Iterator<Item = Result<(usize, &'a str, &'a str)>> + 'a {
    text.lines().enumerate().filter_map(move |(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            return None;
        }
        Some(match line.split_once('=') {
            Some((k, v)) => Ok((i + 1, k.trim(), v.trim())),
            None => Err(parse_error(
                path,
                i + 1,
                format!("expected `key = value`, found `{line}`"),
            )),
        })
    })
}

pub fn parse_value<T: FromStr>(path: &Path, line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| parse_error(path, line, format!("invalid value `{value}` for `{key}`")))
}

pub fn fmt_list<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

pub fn parse_list<T: FromStr>(value: &str) -> Option<Vec<T>> {
    if value.trim().is_empty() {
        return Some(Vec::new());
    }
    value.split(',').map(|v| v.trim().parse().ok()).collect()
}
