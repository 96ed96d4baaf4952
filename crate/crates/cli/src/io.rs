//! Plain-text matrices and vectors.
//!
//! Matrix files start with `m n`, followed by `m` lines of `n`
//! whitespace-separated values. Vector files hold one value per line. Blank
//! lines and lines starting with `#` are skipped in both.

use std::fs;
use std::io::Write;
use std::path::Path;

use fracsvt::bench::{load_grayscale, save_grayscale};
use fracsvt::{DenseMatrix, Error, Result};

fn numbers(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                msg: e.to_string(),
            })?;
        lines.push((k + 1, vals));
    }
    Ok(lines)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (line, vals) in numbers(path)? {
        if vals.len() != 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected one value, found {}", vals.len()),
            });
        }
        out.push(vals[0]);
    }
    Ok(out)
}

fn read_text_matrix(path: &Path) -> Result<DenseMatrix> {
    let err = |line, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = numbers(path)?.into_iter();
    let (hline, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let dims: Vec<usize> = header
        .iter()
        .filter(|v| v.fract() == 0.0 && **v >= 0.0)
        .map(|&v| v as usize)
        .collect();
    let &[m, n] = dims.as_slice() else {
        return Err(err(hline, "header must be `m n`".into()));
    };
    let mut data = Vec::with_capacity(m * n);
    for (line, row) in lines {
        if row.len() != n {
            return Err(err(line, format!("expected {n} values, found {}", row.len())));
        }
        data.extend(row);
    }
    if data.len() != m * n {
        return Err(err(hline, format!("expected {m} rows, found {}", data.len() / n.max(1))));
    }
    DenseMatrix::from_vec(m, n, data)
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Reads a text matrix, or a PGM when the extension says so.
pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    if is_pgm(path) {
        load_grayscale(path)
    } else {
        read_text_matrix(path)
    }
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    if is_pgm(path) {
        return save_grayscale(m, path);
    }
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{} {}", m.rows(), m.cols())?;
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// `%.{digits}g`: `digits` significant digits, trailing zeros removed,
/// exponent form outside `[1e-5, 1e{digits})`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{exp}", trim(mantissa.to_string()))
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_digits() {
        assert_eq!(format_sig(0.0, 12), "0");
        assert_eq!(format_sig(0.5, 12), "0.5");
        assert_eq!(format_sig(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(format_sig(-2.0 / 3.0, 4), "-0.6667");
        assert_eq!(format_sig(123456.0, 3), "1.23e5");
        assert_eq!(format_sig(1.5e-7, 12), "1.5e-7");
    }

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let m = DenseMatrix::from_fn(3, 2, |i, j| i as f64 / 7.0 - j as f64 * 1e-9);
        write_matrix(&path, &m).unwrap();
        assert_eq!(read_matrix(&path).unwrap(), m);

        fs::write(&path, "2 2\n1 2\n3\n").unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::Parse { line: 3, .. })));
    }
}
