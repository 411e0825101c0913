//! The `MMT1` tensor file format.
//!
//! Layout: bytes 0-3 magic `MMT1`, then u32 LE rank (always 2), u32 LE rows,
//! u32 LE cols, then rows*cols f64 LE values row-major. No padding, no
//! checksum.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MAGIC: &[u8; 4] = b"MMT1";
const HEADER_LEN: usize = 16;

pub fn write_tensor(path: &Path, m: &Matrix) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + m.data().len() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&2u32.to_le_bytes());
    buf.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for v in m.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path)?;
    if bytes.len() < HEADER_LEN {
        return Err(if bytes.len() < 4 || &bytes[..4] != MAGIC {
            Error::BadMagic
        } else {
            Error::Truncated
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let rank = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if rank != 2 {
        return Err(Error::BadRank(rank));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expected = HEADER_LEN + rows * cols * 8;
    if bytes.len() != expected {
        return Err(Error::Truncated);
    }
    let data: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Matrix::from_vec(rows, cols, data)
}
