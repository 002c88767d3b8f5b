//! CSV formats.
//!
//! * time series: `T` rows by `N` columns, optional single header row;
//! * adjacency: `N` rows by `N` columns;
//! * stacked lags: `N*P` rows by `N` columns, lag blocks in order.
//!
//! Comma separated, decimal-point floats, LF line endings. Floats are written
//! with the shortest representation that parses back to the same value.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{path}: {error}")]
    Io { path: PathBuf, error: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

/// Renders a matrix as CSV rows, optionally preceded by a header line.
pub fn format_matrix(m: &DMatrix<f64>, header: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(cols) = header {
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    for row in m.row_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses CSV text into a matrix. With `allow_header`, a first line containing
/// a non-numeric cell is skipped. `expected_cols` pins the column count.
pub fn parse_matrix(
    text: &str,
    path: &Path,
    allow_header: bool,
    expected_cols: Option<usize>,
) -> Result<DMatrix<f64>, CsvError> {
    let err = |line: usize, message: String| CsvError::Parse { path: path.to_path_buf(), line, message };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = expected_cols;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Vec<Option<f64>> = cells.iter().map(|c| c.parse::<f64>().ok()).collect();
        if idx == 0 && allow_header && parsed.iter().any(Option::is_none) {
            if let Some(w) = width {
                if cells.len() != w {
                    return Err(err(line_no, format!("header has {} columns, expected {w}", cells.len())));
                }
            }
            width = Some(cells.len());
            continue;
        }
        let w = *width.get_or_insert(cells.len());
        if cells.len() != w {
            return Err(err(line_no, format!("expected {w} columns, found {}", cells.len())));
        }
        let mut row = Vec::with_capacity(w);
        for (col, (cell, value)) in cells.iter().zip(parsed).enumerate() {
            match value {
                Some(v) if v.is_finite() => row.push(v),
                _ => return Err(err(line_no, format!("column {}: non-numeric value {cell:?}", col + 1))),
            }
        }
        rows.push(row);
    }
    let ncols = width.unwrap_or(0);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn read(path: &Path) -> Result<String, CsvError> {
    fs::read_to_string(path).map_err(|error| CsvError::Io { path: path.to_path_buf(), error })
}

fn write(path: &Path, text: &str) -> Result<(), CsvError> {
    fs::write(path, text).map_err(|error| CsvError::Io { path: path.to_path_buf(), error })
}

/// Reads a `T x N` time-series file and returns the `N x T` observation matrix.
pub fn read_time_series(path: &Path) -> Result<DMatrix<f64>, CsvError> {
    let m = parse_matrix(&read(path)?, path, true, None)?;
    if m.nrows() == 0 {
        return Err(CsvError::Parse { path: path.to_path_buf(), line: 1, message: "no data rows".into() });
    }
    Ok(m.transpose())
}

/// Writes an `N x T` observation matrix as `T` rows with an `x0..x{N-1}` header.
pub fn write_time_series(path: &Path, x: &DMatrix<f64>) -> Result<(), CsvError> {
    let header: Vec<String> = (0..x.nrows()).map(|i| format!("x{i}")).collect();
    write(path, &format_matrix(&x.transpose(), Some(&header)))
}

/// Reads a plain matrix file with a known column count.
pub fn read_matrix(path: &Path, cols: usize) -> Result<DMatrix<f64>, CsvError> {
    let m = parse_matrix(&read(path)?, path, false, Some(cols))?;
    Ok(if m.nrows() == 0 { DMatrix::zeros(0, cols) } else { m })
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<(), CsvError> {
    write(path, &format_matrix(m, None))
}
