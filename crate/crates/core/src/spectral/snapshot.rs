//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 16    | magic `SGFLUID-SNAP-01` followed by one NUL byte |
//! | 8     | `L` as f64 |
//! | 8     | `n` as u64 |
//! | 8     | component count as u64 (always 2) |
//! | 8     | time stamp as f64 |
//! | n*n*components*16 | coefficients |
//!
//! Coefficients are written in row-major mode order (flat index
//! `ix * n + iy`, FFT ordering per axis); for each mode the components follow
//! one another, each as `re` then `im` (f64).

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;

use super::{SpectralVectorField, TorusGrid};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 16] = b"SGFLUID-SNAP-01\0";
pub const HEADER_LEN: usize = 16 + 32;

pub fn write_snapshot<W: Write>(w: &mut W, u: &SpectralVectorField, t: f64) -> Result<()> {
    let g = u.grid();
    w.write_all(MAGIC)?;
    w.write_all(&g.length().to_le_bytes())?;
    w.write_all(&(g.n() as u64).to_le_bytes())?;
    w.write_all(&2u64.to_le_bytes())?;
    w.write_all(&t.to_le_bytes())?;
    let mut buf = Vec::with_capacity(g.mode_count() * 32);
    for idx in 0..g.mode_count() {
        for z in u.mode(idx) {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<[u8; 8]> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(b)
}

/// Read one snapshot; returns the grid it was written on, the field and its
/// time stamp.
pub fn read_snapshot<R: Read>(r: &mut R) -> Result<(Arc<TorusGrid>, SpectralVectorField, f64)> {
    let mut magic = [0u8; 16];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let length = f64::from_le_bytes(read_u64(r)?);
    let n = u64::from_le_bytes(read_u64(r)?) as usize;
    let comps = u64::from_le_bytes(read_u64(r)?);
    let t = f64::from_le_bytes(read_u64(r)?);
    if comps != 2 {
        return Err(Error::Snapshot(format!("expected 2 components, found {comps}")));
    }
    let grid = Arc::new(TorusGrid::new(length, n).map_err(|e| Error::Snapshot(e.to_string()))?);
    let m = grid.mode_count();
    let mut raw = vec![0u8; m * 32];
    r.read_exact(&mut raw)?;
    let mut coeffs = [Vec::with_capacity(m), Vec::with_capacity(m)];
    for (idx, chunk) in raw.chunks_exact(32).enumerate() {
        let f = |o: usize| f64::from_le_bytes(chunk[o..o + 8].try_into().unwrap());
        coeffs[0].push(Complex64::new(f(0), f(8)));
        coeffs[1].push(Complex64::new(f(16), f(24)));
        debug_assert!(idx < m);
    }
    let field = SpectralVectorField::from_coefficients(&grid, coeffs)?;
    Ok((grid, field, t))
}
