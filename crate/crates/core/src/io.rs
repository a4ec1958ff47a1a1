//! Text formats: symmetric coordinate matrices, eigenpair files, vectors and
//! point-cloud CSV. Floats are written with 17 significant digits so that
//! every value reads back bit-identical.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::PointCloud;
use crate::linalg::SymmetricMatrix;

const SYM_COO_HEADER: &str = "%%sym-coo";

/// A float in shortest round-trip-safe scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let x: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("invalid number `{tok}`")))?;
    if !x.is_finite() {
        return Err(parse_err(line, format!("non-finite value `{tok}`")));
    }
    Ok(x)
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid index `{tok}`")))
}

/// Non-empty lines that are not `#` comments, numbered from 1.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// `%%sym-coo n nnz` followed by `i j value` lines of the upper triangle,
/// 0-based, sorted by row then column.
pub fn write_sym_coo(a: &SymmetricMatrix) -> String {
    let entries = a.upper_entries();
    let mut out = format!("{SYM_COO_HEADER} {} {}\n", a.n(), entries.len());
    for (i, j, x) in entries {
        let _ = writeln!(out, "{i} {j} {}", fmt_f64(x));
    }
    out
}

pub fn read_sym_coo(text: &str) -> Result<SymmetricMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hl, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty matrix file"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 3 || toks[0] != SYM_COO_HEADER {
        return Err(parse_err(hl, format!("expected `{SYM_COO_HEADER} n nnz`")));
    }
    let n = parse_usize(toks[1], hl)?;
    let nnz = parse_usize(toks[2], hl)?;
    let mut entries = Vec::with_capacity(nnz);
    for (ln, line) in lines {
        if line.starts_with('%') || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(parse_err(ln, "expected `i j value`"));
        }
        let i = parse_usize(toks[0], ln)?;
        let j = parse_usize(toks[1], ln)?;
        if i >= n || j >= n {
            return Err(parse_err(
                ln,
                format!("index ({i}, {j}) outside a {n} x {n} matrix"),
            ));
        }
        if i > j {
            return Err(parse_err(ln, "entry below the diagonal"));
        }
        entries.push((i, j, parse_f64(toks[2], ln)?));
    }
    if entries.len() != nnz {
        return Err(parse_err(
            hl,
            format!("header declares {nnz} entries, found {}", entries.len()),
        ));
    }
    SymmetricMatrix::from_triplets(n, entries)
}

/// Eigenpairs as `n m`, a line of `m` values, then `n` rows holding the
/// `m` vectors as columns.
pub fn write_eig(values: &DVector<f64>, vectors: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", vectors.nrows(), values.len());
    let vals: Vec<String> = values.iter().map(|&x| fmt_f64(x)).collect();
    out.push_str(&vals.join(" "));
    out.push('\n');
    for row in vectors.row_iter() {
        let r: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&r.join(" "));
        out.push('\n');
    }
    out
}

/// Reads the [`write_eig`] format without checking ordering or
/// orthonormality.
pub fn read_eig(text: &str) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let mut lines = content_lines(text);
    let (hl, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty eigenpair file"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 2 {
        return Err(parse_err(hl, "expected `n m`"));
    }
    let n = parse_usize(toks[0], hl)?;
    let m = parse_usize(toks[1], hl)?;
    let (vl, vline) = lines
        .next()
        .ok_or_else(|| parse_err(hl + 1, "missing eigenvalue line"))?;
    let values = vline
        .split_whitespace()
        .map(|t| parse_f64(t, vl))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != m {
        return Err(parse_err(
            vl,
            format!("expected {m} eigenvalues, found {}", values.len()),
        ));
    }
    let mut vectors = DMatrix::zeros(n, m);
    let mut rows = 0;
    for (ln, line) in lines {
        if rows == n {
            return Err(parse_err(ln, format!("more than {n} vector rows")));
        }
        let row = line
            .split_whitespace()
            .map(|t| parse_f64(t, ln))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != m {
            return Err(parse_err(
                ln,
                format!("expected {m} entries, found {}", row.len()),
            ));
        }
        for (j, x) in row.into_iter().enumerate() {
            vectors[(rows, j)] = x;
        }
        rows += 1;
    }
    if rows != n {
        return Err(parse_err(
            text.lines().count(),
            format!("expected {n} vector rows, found {rows}"),
        ));
    }
    Ok((DVector::from_vec(values), vectors))
}

/// One value per line.
pub fn write_vector(v: &DVector<f64>) -> String {
    v.iter().map(|&x| fmt_f64(x) + "\n").collect()
}

/// Whitespace- or comma-separated values across any number of lines.
pub fn read_vector(text: &str) -> Result<DVector<f64>> {
    let mut out = Vec::new();
    for (ln, line) in content_lines(text) {
        for tok in line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            out.push(parse_f64(tok, ln)?);
        }
    }
    if out.is_empty() {
        return Err(parse_err(1, "no values"));
    }
    Ok(DVector::from_vec(out))
}

/// Comma-separated coordinates, one point per line. A first line that does
/// not parse as numbers is taken as a header.
pub fn read_point_cloud(text: &str) -> Result<PointCloud> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, (ln, line)) in content_lines(text).enumerate() {
        let toks: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>> = toks.iter().map(|t| parse_f64(t, ln)).collect();
        let row = match parsed {
            Ok(r) => r,
            Err(_) if idx == 0 && toks.iter().any(|t| t.parse::<f64>().is_err()) => continue,
            Err(e) => return Err(e),
        };
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(
                    ln,
                    format!("expected {w} coordinates, found {}", row.len()),
                ));
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no points"));
    }
    PointCloud::from_rows(&rows)
}

pub fn write_point_cloud(pc: &PointCloud) -> String {
    let mut out = String::new();
    for row in pc.points().row_iter() {
        let r: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_coo_round_trip() {
        let a =
            SymmetricMatrix::from_triplets(3, [(0, 0, 0.1), (0, 2, 1.0 / 3.0), (1, 1, -2e-300)])
                .unwrap();
        let text = write_sym_coo(&a);
        assert!(text.starts_with("%%sym-coo 3 3\n"));
        assert_eq!(read_sym_coo(&text).unwrap(), a);
    }

    #[test]
    fn sym_coo_errors_carry_lines() {
        let err = read_sym_coo("%%sym-coo 2 1\n0 5 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = read_sym_coo("%%sym-coo 2 2\n0 0 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = read_sym_coo("nonsense\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn eig_round_trip() {
        let values = DVector::from_vec(vec![2.0, 0.1]);
        let vectors = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.6, 0.0, 0.8]);
        let (v2, q2) = read_eig(&write_eig(&values, &vectors)).unwrap();
        assert_eq!(v2, values);
        assert_eq!(q2, vectors);
        let err = read_eig("2 1\n1.0\n0.5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn point_cloud_with_header() {
        let pc = read_point_cloud("x,y\n0.5,0.5\n1,2\n").unwrap();
        assert_eq!(pc.n(), 2);
        assert_eq!(pc.points()[(1, 1)], 2.0);
        let err = read_point_cloud("1,2\n3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = read_point_cloud("1,2\n3,zz\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn vector_round_trip() {
        let v = DVector::from_vec(vec![0.1, -1e-17, 3.0]);
        assert_eq!(read_vector(&write_vector(&v)).unwrap(), v);
    }
}
