//! `PRB1` probe snapshots in the `ACTV` block framing.
//!
//! Blocks: `W` (P×D), `a` (1×P), `active` mask (1×P, 0/1), then for global
//! probes a pooling block: 0×D for mean pooling, 1×D holding `w` for attention.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{ProbeKind, ProbeModel};
use crate::data::framing::{self, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::pooling::PoolingSpec;

pub const PROBE_MAGIC: [u8; 4] = *b"PRB1";

pub fn write_probe(model: &ProbeModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let (p, d) = model.weights.dim();
    let blocks = if model.kind == ProbeKind::Global { 4 } else { 3 };
    framing::write_header(&mut w, &PROBE_MAGIC, blocks)?;
    framing::write_block(&mut w, p, d, model.weights.as_standard_layout().as_slice().unwrap())?;
    framing::write_block(&mut w, 1, p, &model.bias.to_vec())?;
    let mask: Vec<f64> = model.active.iter().map(|&a| f64::from(u8::from(a))).collect();
    framing::write_block(&mut w, 1, p, &mask)?;
    if model.kind == ProbeKind::Global {
        match model.pooling.as_ref().unwrap_or(&PoolingSpec::Mean) {
            PoolingSpec::Mean => framing::write_block(&mut w, 0, d, &[])?,
            PoolingSpec::Attention { w: att } => framing::write_block(&mut w, 1, d, &att.to_vec())?,
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_probe(path: impl AsRef<Path>) -> Result<ProbeModel> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let mut r = BufReader::new(file);
    let corrupt = |detail: &str| Error::InvalidDataset(format!("{name}: {detail}"));
    let header = framing::read_header(&mut r).map_err(|_| corrupt("truncated header"))?;
    if header.magic != PROBE_MAGIC {
        return Err(Error::MagicMismatch {
            path: name,
            expected: PROBE_MAGIC,
            found: header.magic,
        });
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: name,
            version: header.version,
        });
    }
    let kind = match header.count {
        3 => ProbeKind::Local,
        4 => ProbeKind::Global,
        _ => return Err(corrupt("unexpected block count")),
    };
    let mut block = |rows: Option<usize>, cols: Option<usize>| -> Result<(usize, usize, Vec<f64>)> {
        let (nr, nc) = framing::read_block_dims(&mut r).map_err(|_| corrupt("truncated block"))?;
        if rows.is_some_and(|n| n != nr) || cols.is_some_and(|n| n != nc) {
            return Err(corrupt("block shape mismatch"));
        }
        let v = framing::read_values(&mut r, nr * nc).map_err(|_| corrupt("truncated block"))?;
        Ok((nr, nc, v))
    };
    let (p, d, weights) = block(None, None)?;
    let weights = Array2::from_shape_vec((p, d), weights).expect("block size");
    let (_, _, bias) = block(Some(1), Some(p))?;
    let (_, _, mask) = block(Some(1), Some(p))?;
    let pooling = if kind == ProbeKind::Global {
        let (rows, _, att) = block(None, Some(d))?;
        Some(match rows {
            0 => PoolingSpec::Mean,
            1 => PoolingSpec::Attention { w: Array1::from(att) },
            _ => return Err(corrupt("bad pooling block")),
        })
    } else {
        None
    };
    Ok(ProbeModel {
        kind,
        weights,
        bias: Array1::from(bias),
        pooling,
        active: mask.iter().map(|&m| m != 0.0).collect(),
    })
}
