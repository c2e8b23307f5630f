//! Plain-text matrix files.
//!
//! ```text
//! # optional comment lines
//! <rows> <cols>
//! v11 v12 ...
//! ```
//! Values are whitespace separated, row-major, in decimal or scientific
//! notation. Lines whose first non-blank character is `#` are skipped.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::Matrix;

#[derive(Debug, Error)]
pub enum MatrixIoError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> MatrixIoError {
    MatrixIoError::Parse { line, column, message: message.into() }
}

/// Tokens of the non-comment lines, tagged with 1-based (line, column).
fn tokens(text: &str) -> impl Iterator<Item = (usize, usize, &str)> {
    text.lines().enumerate().flat_map(|(li, line)| {
        let skip = line.trim_start().starts_with('#');
        let mut out = Vec::new();
        if !skip {
            let mut rest = line;
            let mut offset = 0;
            while let Some(start) = rest.find(|c: char| !c.is_whitespace()) {
                let tail = &rest[start..];
                let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
                out.push((li + 1, offset + start + 1, &tail[..len]));
                offset += start + len;
                rest = &tail[len..];
            }
        }
        out
    })
}

pub fn parse_matrix(text: &str) -> Result<Matrix, MatrixIoError> {
    let mut toks = tokens(text).peekable();
    let header_line = match toks.peek() {
        Some(&(line, _, _)) => line,
        None => return Err(parse_err(1, 1, "missing \"<rows> <cols>\" header")),
    };
    let mut dims = [0usize; 2];
    for (slot, name) in dims.iter_mut().zip(["rows", "cols"]) {
        match toks.next() {
            Some((line, col, tok)) if line == header_line => {
                *slot = tok
                    .parse()
                    .map_err(|_| parse_err(line, col, format!("invalid {name} count {tok:?}")))?;
            }
            _ => return Err(parse_err(header_line, 1, "header must be \"<rows> <cols>\"")),
        }
    }
    if let Some(&(line, col, tok)) = toks.peek() {
        if line == header_line {
            return Err(parse_err(line, col, format!("unexpected token {tok:?} after header")));
        }
    }
    let [rows, cols] = dims;
    if rows == 0 || cols == 0 {
        return Err(parse_err(header_line, 1, "matrix dimensions must be positive"));
    }
    let expected = rows * cols;
    let mut data = Vec::with_capacity(expected);
    let mut last = (header_line, 1);
    for (line, col, tok) in toks {
        if data.len() == expected {
            return Err(parse_err(line, col, format!("more than {expected} values for {rows}x{cols}")));
        }
        let v: f64 = tok
            .parse()
            .map_err(|_| parse_err(line, col, format!("not a number: {tok:?}")))?;
        if !v.is_finite() {
            return Err(parse_err(line, col, format!("non-finite value {tok:?}")));
        }
        data.push(v);
        last = (line, col + tok.len());
    }
    if data.len() != expected {
        return Err(parse_err(
            last.0,
            last.1,
            format!("expected {expected} values for {rows}x{cols}, found {}", data.len()),
        ));
    }
    Matrix::new(rows, cols, data).map_err(|e| parse_err(header_line, 1, e.to_string()))
}

/// Text form with 17 significant digits per entry (exact round trip).
pub fn format_matrix(m: &Matrix) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix, MatrixIoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| MatrixIoError::Io { path: path.display().to_string(), source })?;
    parse_matrix(&text)
}

pub fn save_matrix(m: &Matrix, path: impl AsRef<Path>) -> Result<(), MatrixIoError> {
    let path = path.as_ref();
    std::fs::write(path, format_matrix(m))
        .map_err(|source| MatrixIoError::Io { path: path.display().to_string(), source })
}
