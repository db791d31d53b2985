//! Self-describing binary checkpoints.
//!
//! Layout, all integers little endian:
//!
//! ```text
//! b"OFCK" | version u32 | config_len u64 | config JSON
//! | tensor_count u64 | per tensor: name_len u32, name, rows u64, cols u64,
//!   element width u8 (8), rows * cols f64
//! ```

use std::io::{Read, Write};

use super::params::{Mat, ModelConfig, ModelParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"OFCK";
const VERSION: u32 = 1;

fn bad(message: impl Into<String>) -> Error {
    Error::Format { format: "checkpoint", message: message.into() }
}

fn write_err(e: std::io::Error) -> Error {
    Error::io("<checkpoint>", e)
}

pub fn write_checkpoint(cfg: &ModelConfig, params: &ModelParams, mut w: impl Write) -> Result<()> {
    let config = serde_json::to_vec(cfg)?;
    let mut buf = Vec::with_capacity(64 + params.count() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(config.len() as u64).to_le_bytes());
    buf.extend_from_slice(&config);
    let tensors = params.tensors();
    buf.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
    for t in tensors {
        buf.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(t.name.as_bytes());
        buf.extend_from_slice(&(t.value.nrows() as u64).to_le_bytes());
        buf.extend_from_slice(&(t.value.ncols() as u64).to_le_bytes());
        buf.push(8);
        for v in t.value.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf).map_err(write_err)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| bad("truncated"))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| bad("length overflows usize"))
    }
}

pub fn read_checkpoint(mut r: impl Read) -> Result<(ModelConfig, ModelParams)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(write_err)?;
    let mut c = Cursor { bytes: &bytes, at: 0 };
    if c.take(4)? != MAGIC {
        return Err(bad("missing magic"));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let n = c.u64()?;
    let cfg: ModelConfig = serde_json::from_slice(c.take(n)?)?;
    cfg.validate()?;
    let mut params = ModelParams::zeros(&cfg);
    let names: Vec<String> = params.tensors().into_iter().map(|t| t.name).collect();
    let count = c.u64()?;
    if count != names.len() {
        return Err(bad(format!("{count} tensors, configuration implies {}", names.len())));
    }
    for (slot, want) in params.tensors_mut().into_iter().zip(&names) {
        let len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(len)?).map_err(|_| bad("tensor name is not UTF-8"))?;
        if name != want {
            return Err(bad(format!("expected tensor {want}, found {name}")));
        }
        let (rows, cols) = (c.u64()?, c.u64()?);
        if (rows, cols) != slot.dim() {
            return Err(bad(format!("{name} is {rows}x{cols}, expected {:?}", slot.dim())));
        }
        let width = c.take(1)?[0];
        let values: Vec<f64> = match width {
            8 => c.take(rows * cols * 8)?.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8"))).collect(),
            4 => c
                .take(rows * cols * 4)?
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4")) as f64)
                .collect(),
            w => return Err(bad(format!("unsupported element width {w}"))),
        };
        *slot = Mat::from_shape_vec((rows, cols), values).expect("length checked");
    }
    if c.at != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok((cfg, params))
}
