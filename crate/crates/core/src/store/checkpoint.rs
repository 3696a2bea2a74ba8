//! Binary value-network checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "LRCK" | version u32 | d u32 | h1 u32 | h2 u32 | seed u64
//! 10 x (len u64, len x f32)          parameters in declared order
//! step u64
//! 10 x (len u64, len x f32)          first moments
//! 10 x (len u64, len x f32)          second moments
//! checksum u64                       CRC-64/XZ of every preceding byte
//! ```
//!
//! Optimizer hyperparameters are not stored; a resumed run takes them from its
//! own configuration.

use std::fs;
use std::path::Path;

use crc::{Crc, CRC_64_XZ};

use crate::error::{Error, Result};
use crate::trajectory::ensure_dim;
use crate::valuenet::{AdamConfig, NetworkDims, OptimizerState, Parameters, ValueNetwork};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LRCK";
pub const CHECKPOINT_VERSION: u32 = 1;

const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

fn put_tensors(out: &mut Vec<u8>, params: &Parameters<f32>) {
    for t in params.tensors() {
        out.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for x in t {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
}

pub fn encode_checkpoint(net: &ValueNetwork<f32>, opt: &OptimizerState<f32>) -> Vec<u8> {
    let dims = net.dims();
    let mut out = Vec::with_capacity(64 + 12 * dims.parameter_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for d in [dims.input, dims.hidden1, dims.hidden2] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&net.seed().to_le_bytes());
    put_tensors(&mut out, net.params());
    out.extend_from_slice(&opt.step.to_le_bytes());
    put_tensors(&mut out, &opt.first_moment);
    put_tensors(&mut out, &opt.second_moment);
    let sum = CRC64.checksum(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::CorruptCheckpoint("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensors(&mut self, dims: &NetworkDims) -> Result<Parameters<f32>> {
        let mut tensors = Vec::with_capacity(Parameters::<f32>::TENSORS);
        for want in dims.tensor_lens() {
            let len = self.u64()? as usize;
            if len != want {
                return Err(Error::CorruptCheckpoint(format!(
                    "tensor length {len}, expected {want}"
                )));
            }
            let raw = self.take(len.checked_mul(4).ok_or_else(|| {
                Error::CorruptCheckpoint("tensor length overflow".into())
            })?)?;
            tensors.push(
                raw.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            );
        }
        Parameters::from_tensors(dims, tensors)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ValueNetwork<f32>, OptimizerState<f32>)> {
    if bytes.len() < 4 + 4 + 12 + 8 + 8 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic or truncated header".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    if CRC64.checksum(body) != stored {
        return Err(Error::CorruptCheckpoint("checksum mismatch".into()));
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let (d, h1, h2) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    let dims = NetworkDims::new(d, h1, h2)
        .map_err(|_| Error::CorruptCheckpoint("zero dimension".into()))?;
    let seed = r.u64()?;
    let params = r.tensors(&dims)?;
    let step = r.u64()?;
    let first_moment = r.tensors(&dims)?;
    let second_moment = r.tensors(&dims)?;
    if r.pos != body.len() {
        return Err(Error::CorruptCheckpoint("trailing bytes".into()));
    }
    let net = ValueNetwork::from_parameters(dims, seed, params)?;
    let opt = OptimizerState {
        step,
        first_moment,
        second_moment,
        config: AdamConfig::default(),
    };
    Ok((net, opt))
}

/// Writes through a sibling temporary file and renames it into place.
pub fn save_checkpoint(path: impl AsRef<Path>, net: &ValueNetwork<f32>, opt: &OptimizerState<f32>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(net, opt);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, &bytes).map_err(|e| Error::file(path, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ValueNetwork<f32>, OptimizerState<f32>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    decode_checkpoint(&bytes)
}

/// Loads a checkpoint and checks its input dimension.
pub fn load_checkpoint_for_dim(
    path: impl AsRef<Path>,
    input_dim: usize,
) -> Result<(ValueNetwork<f32>, OptimizerState<f32>)> {
    let loaded = load_checkpoint(path)?;
    ensure_dim(input_dim, loaded.0.input_dim())?;
    Ok(loaded)
}
