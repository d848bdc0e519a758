//! Binary model checkpoints.
//!
//! All integers and floats are little-endian:
//!
//! | field | type |
//! |---|---|
//! | magic `BHQN` | 4 bytes |
//! | format version | u32 |
//! | model kind (0 = gcn, 1 = mlp) | u8 |
//! | observation rows (0 for gcn) | u32 |
//! | graph radius `d_min` | f64 |
//! | input encoding: ego scales, other scales | 10 × f64 |
//! | layer count `L` | u32 |
//! | per layer: inputs, outputs | 2 × u32 |
//! | per layer: weights row-major, then bias | f64 ... |

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use thiserror::Error;

use super::{Dense, GcnModel, InputEncoding, MlpModel, ModelKind, QNetwork};
use crate::env::{ACTION_COUNT, FEATURES};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"BHQN";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint: bad magic bytes")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown model kind tag {0}")]
    UnknownKind(u8),
    #[error("inconsistent checkpoint dimensions: {0}")]
    Shape(String),
}

fn kind_tag(kind: ModelKind) -> u8 {
    match kind {
        ModelKind::Gcn => 0,
        ModelKind::Mlp => 1,
    }
}

pub fn write_checkpoint<W: Write>(net: &QNetwork, mut out: W) -> Result<(), CheckpointError> {
    let (rows, d_min) = match net {
        QNetwork::Gcn(m) => (0u32, m.d_min),
        QNetwork::Mlp(m) => (m.rows as u32, 0.0),
    };
    let enc = net.encoding();
    let mut buf = Vec::with_capacity(64 + 8 * net.param_count());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.push(kind_tag(net.kind()));
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&d_min.to_le_bytes());
    for v in enc.ego_scale.iter().chain(&enc.other_scale) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let layers = net.layers();
    buf.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for l in layers {
        buf.extend_from_slice(&(l.inputs() as u32).to_le_bytes());
        buf.extend_from_slice(&(l.outputs() as u32).to_le_bytes());
    }
    for l in layers {
        for v in l.params() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b)?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<QNetwork, CheckpointError> {
    let mut c = Cursor { inner: input };
    if &c.bytes::<4>()? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let kind = match c.bytes::<1>()?[0] {
        0 => ModelKind::Gcn,
        1 => ModelKind::Mlp,
        t => return Err(CheckpointError::UnknownKind(t)),
    };
    let rows = c.u32()? as usize;
    let d_min = c.f64()?;
    let mut encoding = InputEncoding::identity();
    for v in encoding.ego_scale.iter_mut().chain(encoding.other_scale.iter_mut()) {
        *v = c.f64()?;
    }
    let count = c.u32()? as usize;
    if count != 3 {
        return Err(CheckpointError::Shape(format!("expected 3 layers, found {count}")));
    }
    let mut dims = Vec::with_capacity(count);
    for _ in 0..count {
        dims.push((c.u32()? as usize, c.u32()? as usize));
    }
    let input_width = match kind {
        ModelKind::Gcn => FEATURES,
        ModelKind::Mlp => rows * FEATURES,
    };
    if dims[0].0 != input_width || dims[count - 1].1 != ACTION_COUNT || dims.windows(2).any(|w| w[0].1 != w[1].0) {
        return Err(CheckpointError::Shape(format!("layer dims {dims:?} do not chain from {input_width} to {ACTION_COUNT}")));
    }
    let mut layers = Vec::with_capacity(count);
    for &(i, o) in &dims {
        let w: Vec<f64> = (0..i * o).map(|_| c.f64()).collect::<Result<_, _>>()?;
        let b: Vec<f64> = (0..o).map(|_| c.f64()).collect::<Result<_, _>>()?;
        layers.push(Dense { w: Array2::from_shape_vec((i, o), w).expect("length checked"), b: Array1::from(b) });
    }
    let mut rest = Vec::new();
    c.inner.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(CheckpointError::Shape(format!("{} trailing bytes", rest.len())));
    }
    Ok(match kind {
        ModelKind::Gcn => QNetwork::Gcn(GcnModel { layers, encoding, d_min }),
        ModelKind::Mlp => QNetwork::Mlp(MlpModel { layers, encoding, rows }),
    })
}
