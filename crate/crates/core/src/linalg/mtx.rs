//! Matrix Market coordinate files for debug dumps.

use std::fmt::Write as _;

use super::csc::{compress_symmetric_lower, compress_to_csc, CooMatrix, CscMatrix};
use super::LinalgError;

/// Serialize a CSC matrix. Lower-stored matrices are written as `symmetric`.
pub fn write_matrix_market(a: &CscMatrix) -> String {
    let kind = if a.lower { "symmetric" } else { "general" };
    let mut out = format!("%%MatrixMarket matrix coordinate real {kind}\n{} {} {}\n", a.nrows, a.ncols, a.nnz());
    for j in 0..a.ncols {
        for k in a.colptr[j]..a.colptr[j + 1] {
            let _ = writeln!(out, "{} {} {:e}", a.rowidx[k] + 1, j + 1, a.values[k]);
        }
    }
    out
}

/// Write COO triplets verbatim (duplicates preserved).
pub fn write_coo_matrix_market(a: &CooMatrix) -> String {
    let mut out = format!("%%MatrixMarket matrix coordinate real general\n{} {} {}\n", a.nrows, a.ncols, a.nnz());
    for k in 0..a.nnz() {
        let _ = writeln!(out, "{} {} {:e}", a.rows[k] + 1, a.cols[k] + 1, a.values[k]);
    }
    out
}

pub fn read_matrix_market(text: &str) -> Result<CscMatrix, LinalgError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| LinalgError::Parse("empty input".into()))?;
    let lower_header = header.to_ascii_lowercase();
    if !lower_header.starts_with("%%matrixmarket matrix coordinate real") {
        return Err(LinalgError::Parse(format!("unsupported header: {header}")));
    }
    let symmetric = lower_header.contains("symmetric");
    let mut body = lines.filter(|l| !l.trim_start().starts_with('%') && !l.trim().is_empty());
    let size = body.next().ok_or_else(|| LinalgError::Parse("missing size line".into()))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| LinalgError::Parse(format!("size line: {e}")))?;
    if dims.len() != 3 {
        return Err(LinalgError::Parse("size line needs three integers".into()));
    }
    let mut coo = CooMatrix::new(dims[0], dims[1]);
    for line in body {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(LinalgError::Parse(format!("bad entry: {line}")));
        }
        let parse_idx = |s: &str| s.parse::<usize>().map_err(|e| LinalgError::Parse(format!("{line}: {e}")));
        let (i, j) = (parse_idx(f[0])?, parse_idx(f[1])?);
        let v: f64 = f[2].parse().map_err(|e| LinalgError::Parse(format!("{line}: {e}")))?;
        if i == 0 || j == 0 || i > dims[0] || j > dims[1] {
            return Err(LinalgError::Parse(format!("index out of range: {line}")));
        }
        coo.push(i - 1, j - 1, v);
    }
    if coo.nnz() != dims[2] {
        return Err(LinalgError::Parse(format!("expected {} entries, found {}", dims[2], coo.nnz())));
    }
    Ok(if symmetric { compress_symmetric_lower(&coo).0 } else { compress_to_csc(&coo).0 })
}
