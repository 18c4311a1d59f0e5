// SPDX-License-Identifier: MIT OR Apache-2.0

//! Series files: one non-negative integer per line, or two-column `t,count`
//! CSV with an optional header. Lines starting with `#` and blank lines are
//! ignored.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based line number in the input.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Plain,
    Csv,
}

pub fn parse_series(text: &str) -> Result<(Vec<u32>, Format), ParseError> {
    let mut counts = Vec::new();
    let mut format = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| ParseError { line: line_no, message };
        let fmt = *format.get_or_insert(if line.contains(',') { Format::Csv } else { Format::Plain });
        match fmt {
            Format::Plain => {
                if line.contains(',') {
                    return Err(err("comma in a one-column file".into()));
                }
                counts.push(parse_count(line).map_err(err)?);
            }
            Format::Csv => {
                let fields: Vec<&str> = line.split(',').map(str::trim).collect();
                if fields.len() != 2 {
                    return Err(err(format!("expected 2 columns `t,count`, found {}", fields.len())));
                }
                if counts.is_empty() && fields[1].parse::<i64>().is_err() && fields[0].parse::<i64>().is_err() {
                    // header row
                    continue;
                }
                if fields[0].parse::<i64>().is_err() {
                    return Err(err(format!("time index '{}' is not an integer", fields[0])));
                }
                counts.push(parse_count(fields[1]).map_err(err)?);
            }
        }
    }
    if counts.is_empty() {
        return Err(ParseError { line: text.lines().count().max(1), message: "no observations".into() });
    }
    Ok((counts, format.unwrap_or(Format::Plain)))
}

fn parse_count(s: &str) -> Result<u32, String> {
    s.parse::<u32>().map_err(|_| format!("'{s}' is not a non-negative integer count"))
}

/// One count per line, LF-terminated.
pub fn format_series(counts: &[u32]) -> String {
    let mut out = String::with_capacity(counts.len() * 3);
    for c in counts {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out
}
