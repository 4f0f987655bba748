//! Matrix and vector text input.
//!
//! Matrices: Matrix Market `array` or `coordinate` (real/integer, general or
//! symmetric), or headerless CSV. Vectors: one value per line.

use std::path::Path;

use crate::kernels::{Matrix, Vector};
use crate::{MtlsError, Result};

fn perr(line: usize, msg: impl Into<String>) -> MtlsError {
    MtlsError::Parse { line, msg: msg.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.trim().parse().map_err(|_| perr(line, format!("cannot parse `{tok}` as a number")))?;
    if !v.is_finite() {
        return Err(perr(line, "non-finite value"));
    }
    Ok(v)
}

/// Reads a matrix from a file, picking Matrix Market when the banner is present, CSV otherwise.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

pub fn parse_matrix(text: &str) -> Result<Matrix> {
    if text.trim_start().starts_with("%%MatrixMarket") {
        parse_matrix_market(text)
    } else {
        parse_csv(text)
    }
}

pub fn parse_matrix_market(text: &str) -> Result<Matrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, banner) = lines.next().ok_or_else(|| perr(1, "empty input"))?;
    let fields: Vec<String> = banner.split_whitespace().map(str::to_lowercase).collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(perr(1, "expected `%%MatrixMarket matrix <format> <field> <symmetry>`"));
    }
    let coordinate = match fields[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(perr(1, format!("unsupported format `{other}`"))),
    };
    if !matches!(fields[3].as_str(), "real" | "integer" | "double") {
        return Err(perr(1, format!("unsupported field `{}`", fields[3])));
    }
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(perr(1, format!("unsupported symmetry `{other}`"))),
    };

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (ln, size) = data.next().ok_or_else(|| perr(1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| perr(ln, "bad size line")))
        .collect::<Result<_>>()?;

    if coordinate {
        let [rows, cols, nnz] = dims[..] else {
            return Err(perr(ln, "coordinate size line must be `rows cols nnz`"));
        };
        let mut m = Matrix::zeros(rows, cols);
        let mut count = 0;
        for (ln, line) in data {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(perr(ln, "expected `i j value`"));
            }
            let i: usize = parts[0].parse().map_err(|_| perr(ln, "bad row index"))?;
            let j: usize = parts[1].parse().map_err(|_| perr(ln, "bad column index"))?;
            if i == 0 || j == 0 || i > rows || j > cols {
                return Err(perr(ln, format!("index ({i}, {j}) out of range")));
            }
            let v = parse_f64(parts[2], ln)?;
            m[(i - 1, j - 1)] += v;
            if symmetric && i != j {
                m[(j - 1, i - 1)] += v;
            }
            count += 1;
        }
        if count != nnz {
            return Err(perr(0, format!("expected {nnz} entries, found {count}")));
        }
        Ok(m)
    } else {
        let [rows, cols] = dims[..] else {
            return Err(perr(ln, "array size line must be `rows cols`"));
        };
        let mut values = Vec::with_capacity(rows * cols);
        for (ln, line) in data {
            for tok in line.split_whitespace() {
                values.push(parse_f64(tok, ln)?);
            }
        }
        if symmetric {
            if rows != cols {
                return Err(perr(0, "symmetric array must be square"));
            }
            let expected = rows * (rows + 1) / 2;
            if values.len() != expected {
                return Err(perr(0, format!("expected {expected} values, found {}", values.len())));
            }
            let mut m = Matrix::zeros(rows, cols);
            let mut it = values.into_iter();
            for j in 0..cols {
                for i in j..rows {
                    let v = it.next().expect("counted");
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            Ok(m)
        } else {
            if values.len() != rows * cols {
                return Err(perr(0, format!("expected {} values, found {}", rows * cols, values.len())));
            }
            // array format is column-major
            Ok(Matrix::from_column_slice(rows, cols, &values))
        }
    }
}

/// Headerless CSV, one matrix row per line.
pub fn parse_csv(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t.split(',').map(|tok| parse_f64(tok, i + 1)).collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(perr(i + 1, format!("row has {} columns, expected {}", row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(perr(0, "no data rows"));
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(Matrix::from_row_iterator(r, c, rows.into_iter().flatten()))
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vector> {
    parse_vector(&std::fs::read_to_string(path)?)
}

/// One value per line; blank lines and `%`/`#` comments are skipped.
pub fn parse_vector(text: &str) -> Result<Vector> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        values.push(parse_f64(t, i + 1)?);
    }
    if values.is_empty() {
        return Err(perr(0, "no values"));
    }
    Ok(Vector::from_vec(values))
}

/// Writes `m` in Matrix Market array format.
pub fn to_matrix_market(m: &Matrix) -> String {
    let mut s = format!("%%MatrixMarket matrix array real general\n{} {}\n", m.nrows(), m.ncols());
    for v in m.iter() {
        s.push_str(&format!("{v:e}\n"));
    }
    s
}
