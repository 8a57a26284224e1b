//! Little-endian block framing shared by layer files (`ACTV`) and probe
//! snapshots (`PRB1`).
//!
//! ```text
//! magic[4] | version u8 | count u32 | count × (rows u32 | cols u32 | rows*cols f32)
//! ```

use std::io::{self, Read, Write};

pub const FORMAT_VERSION: u8 = 0x01;

pub fn write_header<W: Write>(w: &mut W, magic: &[u8; 4], count: u32) -> io::Result<()> {
    w.write_all(magic)?;
    w.write_all(&[FORMAT_VERSION])?;
    w.write_all(&count.to_le_bytes())
}

pub fn write_block<W: Write>(w: &mut W, rows: usize, cols: usize, values: &[f64]) -> io::Result<()> {
    debug_assert_eq!(rows * cols, values.len());
    w.write_all(&(rows as u32).to_le_bytes())?;
    w.write_all(&(cols as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(values.len() * 4);
    for &v in values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)
}

/// Parsed header. `found_magic` is returned as-is so callers can build their
/// own mismatch error.
pub struct Header {
    pub magic: [u8; 4],
    pub version: u8,
    pub count: u32,
}

pub fn read_header<R: Read>(r: &mut R) -> io::Result<Header> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    let mut version = [0u8; 1];
    r.read_exact(&mut version)?;
    let count = read_u32(r)?;
    Ok(Header {
        magic,
        version: version[0],
        count,
    })
}

pub fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_block_dims<R: Read>(r: &mut R) -> io::Result<(usize, usize)> {
    let rows = read_u32(r)? as usize;
    let cols = read_u32(r)? as usize;
    Ok((rows, cols))
}

pub fn read_values<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}
