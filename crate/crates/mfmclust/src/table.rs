//! Count tables and the small CSV files exchanged between subcommands.

use std::fmt::Write as _;

use mfmclust_core::{CountMatrix, Error as CoreError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("row {row} ({sample}), column {column} ({feature}): {message}")]
    Cell {
        row: usize,
        column: usize,
        sample: String,
        feature: String,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

fn line_err(line: usize, message: impl Into<String>) -> TableError {
    TableError::Line {
        line,
        message: message.into(),
    }
}

/// Parses a tab-separated count table: a header of feature names (its first
/// cell is ignored), then one row per sample starting with the sample name.
/// Rows and columns are numbered from 1 in errors.
pub fn parse_count_table(text: &str) -> Result<CountMatrix, TableError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| line_err(1, "empty count table"))?;
    let features: Vec<String> = header.split('\t').skip(1).map(|s| s.trim().to_string()).collect();
    if features.is_empty() {
        return Err(line_err(1, "header has no feature columns"));
    }
    let mut samples = Vec::new();
    let mut counts = Vec::new();
    for (row, (line_no, line)) in lines.enumerate() {
        let mut cells = line.split('\t');
        let sample = cells.next().unwrap_or("").trim().to_string();
        let values: Vec<&str> = cells.collect();
        if values.len() != features.len() {
            return Err(line_err(
                line_no,
                format!("expected {} counts, found {}", features.len(), values.len()),
            ));
        }
        for (col, cell) in values.iter().enumerate() {
            let cell = cell.trim();
            let value: i64 = cell.parse().map_err(|_| TableError::Cell {
                row: row + 1,
                column: col + 1,
                sample: sample.clone(),
                feature: features[col].clone(),
                message: format!("not an integer: {cell:?}"),
            })?;
            if value < 0 {
                return Err(TableError::Cell {
                    row: row + 1,
                    column: col + 1,
                    sample: sample.clone(),
                    feature: features[col].clone(),
                    message: format!("negative count {value}"),
                });
            }
            let value = u32::try_from(value).map_err(|_| TableError::Cell {
                row: row + 1,
                column: col + 1,
                sample: sample.clone(),
                feature: features[col].clone(),
                message: format!("count {value} too large"),
            })?;
            counts.push(value);
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(line_err(1, "count table has no sample rows"));
    }
    CountMatrix::new(samples, features, counts).map_err(|e| match e {
        CoreError::ZeroSumRow { sample } => TableError::Invalid(format!("sample {sample:?} has zero total count")),
        other => TableError::Invalid(other.to_string()),
    })
}

pub fn write_count_table(m: &CountMatrix) -> String {
    let mut out = String::from("sample");
    for f in m.feature_names() {
        out.push('\t');
        out.push_str(f);
    }
    out.push('\n');
    for (i, s) in m.sample_names().iter().enumerate() {
        out.push_str(s);
        for &c in m.row(i) {
            write!(out, "\t{c}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub type Pairs = Vec<(String, String)>;

/// Reads a two-column CSV with a header, returning the header and the rows.
pub fn parse_two_column_csv(text: &str) -> Result<((String, String), Pairs), TableError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let split = |line_no: usize, l: &str| -> Result<(String, String), TableError> {
        let mut parts = l.split(',');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => Ok((a.trim().to_string(), b.trim().to_string())),
            _ => Err(line_err(line_no, "expected exactly two comma-separated fields")),
        }
    };
    let (n, h) = lines.next().ok_or_else(|| line_err(1, "empty file"))?;
    let header = split(n, h)?;
    let rows = lines.map(|(n, l)| split(n, l)).collect::<Result<Vec<_>, _>>()?;
    Ok((header, rows))
}
