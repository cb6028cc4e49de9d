//! `KDYN` binary matrix container and CSV export.
//!
//! Header (little-endian): magic `b"KDYN"`, version `u32`, rows `u32`,
//! cols `u32`; followed by `rows * cols` row-major `f64` values.

use std::io::{self, Read, Write};

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"KDYN";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MatrixFileError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    BadVersion(u32),
    #[error("row {row} has {len} columns, expected {cols}")]
    Ragged { row: usize, len: usize, cols: usize },
    #[error("matrix too large for the header ({0})")]
    TooLarge(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_matrix<W: Write, R: AsRef<[f64]>>(mut w: W, rows: &[R], cols: usize) -> Result<(), MatrixFileError> {
    let nrows = u32::try_from(rows.len()).map_err(|_| MatrixFileError::TooLarge(rows.len()))?;
    let ncols = u32::try_from(cols).map_err(|_| MatrixFileError::TooLarge(cols))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&nrows.to_le_bytes())?;
    w.write_all(&ncols.to_le_bytes())?;
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != cols {
            return Err(MatrixFileError::Ragged { row: i, len: r.len(), cols });
        }
        for v in r {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Returns `(rows, cols)`.
pub fn read_matrix<R: Read>(mut r: R) -> Result<(Vec<Vec<f64>>, usize), MatrixFileError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(MatrixFileError::BadMagic(magic));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(MatrixFileError::BadVersion(version));
    }
    let rows = read_u32(&mut r)? as usize;
    let cols = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(rows);
    let mut b = [0u8; 8];
    for _ in 0..rows {
        let mut row = Vec::with_capacity(cols);
        for _ in 0..cols {
            r.read_exact(&mut b)?;
            row.push(f64::from_le_bytes(b));
        }
        out.push(row);
    }
    Ok((out, cols))
}

/// CSV with a header of slot names.
pub fn write_csv<W: Write, R: AsRef<[f64]>>(mut w: W, header: &[String], rows: &[R]) -> io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let line: Vec<String> = r.as_ref().iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()
}
