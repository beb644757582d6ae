//! CSV and argument parsing helpers.

use std::fmt;
use std::io::Read;
use std::ops::RangeInclusive;
use std::path::Path;

/// An input problem detected by the front end itself.
#[derive(Debug)]
pub struct InputError {
    pub code: &'static str,
    pub message: String,
}

impl InputError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        InputError { code, message: message.into() }
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for InputError {}

/// Reads a numeric CSV. A first line with any non-numeric field is treated
/// as a header; every row must have the same number of columns.
pub fn read_csv(path: &Path) -> Result<Vec<Vec<f64>>, InputError> {
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| InputError::new("INPUT_UNREADABLE", format!("{}: {e}", path.display())))?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<Vec<Vec<f64>>, InputError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| InputError::new("INPUT_MALFORMED", e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if line == 0 => continue,
            Err(_) => {
                return Err(InputError::new("INPUT_NON_NUMERIC", format!("non-numeric cell on line {}", line + 1)));
            }
        }
    }
    if rows.is_empty() {
        return Err(InputError::new("INPUT_EMPTY", "no data rows"));
    }
    let width = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != width) {
        return Err(InputError::new("INPUT_MALFORMED", format!("data row {} has {} columns, expected {width}", i + 1, rows[i].len())));
    }
    Ok(rows)
}

/// Parses a comma-separated list of numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>, InputError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| InputError::new("INPUT_NON_NUMERIC", format!("not a number: {t:?}"))))
        .collect()
}

/// A list of non-negative integers given on the command line.
#[derive(Clone, Debug, PartialEq)]
pub struct Values(pub Vec<usize>);

/// Parses `5`, `1..7` (inclusive), `1..=7` or `1,3,4`.
pub fn parse_range(s: &str) -> Result<Values, String> {
    parse_values(s).map(Values)
}

fn parse_values(s: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("invalid range {s:?}; expected N, A..B or a comma list");
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let r: RangeInclusive<usize> = num(a)?..=num(b)?;
        if r.is_empty() {
            return Err(bad());
        }
        return Ok(r.collect());
    }
    s.split(',').map(num).collect()
}
