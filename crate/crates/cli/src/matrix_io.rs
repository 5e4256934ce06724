//! Plain CSV matrices: one row per line, comma-separated, `#` comment lines
//! and blank lines ignored, no header.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use l1admm::DenseMatrix;

#[derive(Debug)]
pub enum MatrixReadError {
    Io(io::Error),
    Csv(csv::Error),
    /// `line` is 1-based; `column` is the 1-based field index when known.
    Parse {
        line: u64,
        column: Option<usize>,
        message: String,
    },
    Empty,
}

impl fmt::Display for MatrixReadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixReadError::Io(e) => write!(f, "{e}"),
            MatrixReadError::Csv(e) => write!(f, "{e}"),
            MatrixReadError::Parse {
                line,
                column: Some(col),
                message,
            } => write!(f, "line {line}, column {col}: {message}"),
            MatrixReadError::Parse {
                line,
                column: None,
                message,
            } => write!(f, "line {line}: {message}"),
            MatrixReadError::Empty => write!(f, "no data rows"),
        }
    }
}

impl std::error::Error for MatrixReadError {}

fn parse_entry(token: &str, allow_inf: bool) -> Result<f64, String> {
    let value: f64 = token
        .parse()
        .map_err(|_| format!("cannot parse {token:?} as a number"))?;
    if value.is_nan() {
        return Err(format!("{token:?} is not a number"));
    }
    if value.is_infinite() && !allow_inf {
        return Err(format!("{token:?} is not allowed in this matrix"));
    }
    Ok(value)
}

/// Parses CSV text. Infinite entries are accepted only with `allow_inf`.
pub fn parse_matrix(text: &str, allow_inf: bool) -> Result<DenseMatrix, MatrixReadError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(MatrixReadError::Csv)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, tok)| {
                parse_entry(tok, allow_inf).map_err(|message| MatrixReadError::Parse {
                    line,
                    column: Some(j + 1),
                    message,
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(MatrixReadError::Parse {
                    line,
                    column: None,
                    message: format!("expected {} values, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(MatrixReadError::Empty);
    }
    Ok(DenseMatrix::from_rows(&rows))
}

pub fn read_matrix(path: &Path, allow_inf: bool) -> Result<DenseMatrix, MatrixReadError> {
    let text = fs::read_to_string(path).map_err(MatrixReadError::Io)?;
    parse_matrix(&text, allow_inf)
}

/// Shortest representation that reads back to the same `f64`.
pub fn format_entry(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn format_matrix(m: &DenseMatrix) -> String {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for i in 0..m.rows() {
        writer
            .write_record(m.row(i).into_iter().map(format_entry))
            .expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("flushing to memory")).expect("ascii output")
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> io::Result<()> {
    fs::write(path, format_matrix(m))
}
