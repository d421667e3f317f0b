//! Plain-text matrix files.
//!
//! ```text
//! # dims m n
//! a11,a12,...,a1n
//! ...
//! am1,am2,...,amn
//! ```
//!
//! Values are written in scientific notation with 17 significant digits, so a
//! store/load cycle reproduces every `f64` exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Render a matrix in the text format.
pub fn to_string(a: &DMatrix<f64>) -> String {
    let mut out = format!("# dims {} {}\n", a.nrows(), a.ncols());
    for row in a.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(to_string(a).as_bytes())?;
    Ok(())
}

pub fn read(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    parse(&text).map_err(|reason| Error::Format { path: path.to_path_buf(), reason })
}

/// Parse the text format; the error string describes the first problem found.
pub fn parse(text: &str) -> std::result::Result<DMatrix<f64>, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or("empty file")?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let (m, n) = match dims.as_slice() {
        ["#", "dims", m, n] => (
            m.parse::<usize>().map_err(|_| format!("bad row count {m:?}"))?,
            n.parse::<usize>().map_err(|_| format!("bad column count {n:?}"))?,
        ),
        _ => return Err(format!("expected `# dims m n` header, got {header:?}")),
    };
    let mut data = Vec::with_capacity(m * n);
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let before = data.len();
        for cell in line.split(',') {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| format!("row {}: bad number {:?}", i + 1, cell.trim()))?;
            if !v.is_finite() {
                return Err(format!("row {}: non-finite entry", i + 1));
            }
            data.push(v);
        }
        if data.len() - before != n {
            return Err(format!("row {} has {} entries, expected {n}", i + 1, data.len() - before));
        }
        rows += 1;
    }
    if rows != m {
        return Err(format!("found {rows} rows, header says {m}"));
    }
    Ok(DMatrix::from_row_slice(m, n, &data))
}
