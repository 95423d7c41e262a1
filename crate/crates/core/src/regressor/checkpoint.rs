//! Binary checkpoint layout (all integers and reals little-endian):
//!
//! | size      | field                                        |
//! |-----------|----------------------------------------------|
//! | 8         | magic `b"INDIMLP\0"`                         |
//! | 4 (u32)   | format version, currently 1                  |
//! | 4 (u32)   | activation name length `L`                   |
//! | L         | activation name, UTF-8 (`tanh` or `relu`)    |
//! | 8 (u64)   | training seed                                |
//! | 4 (u32)   | number of layer widths `K`                   |
//! | 4·K (u32) | layer widths, input first                    |
//! | 8 (u64)   | parameter count `P`                          |
//! | 8·P (f64) | parameters, layer by layer: weights row-major (`out x in`), then biases |
//!
//! Trailing bytes are rejected.

use std::fs;
use std::path::Path;

use crate::error::{IndiError, Result};

use super::mlp::{param_count, Activation, MlpRegressor};

pub const MAGIC: &[u8; 8] = b"INDIMLP\0";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode(model: &MlpRegressor) -> Vec<u8> {
    let name = model.activation().name().as_bytes();
    let mut out =
        Vec::with_capacity(40 + name.len() + 4 * model.sizes().len() + 8 * model.params().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name);
    out.extend_from_slice(&model.seed().to_le_bytes());
    out.extend_from_slice(&(model.sizes().len() as u32).to_le_bytes());
    for &s in model.sizes() {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.extend_from_slice(&(model.params().len() as u64).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(IndiError::Checkpoint(format!(
                "truncated while reading {what}"
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn decode(bytes: &[u8]) -> Result<MlpRegressor> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(IndiError::Checkpoint(
            "bad magic; not a regressor checkpoint".into(),
        ));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(IndiError::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let name_len = r.u32("activation name length")? as usize;
    let name = std::str::from_utf8(r.take(name_len, "activation name")?)
        .map_err(|_| IndiError::Checkpoint("activation name is not UTF-8".into()))?;
    let activation = Activation::from_name(name)
        .ok_or_else(|| IndiError::Checkpoint(format!("unknown activation `{name}`")))?;
    let seed = r.u64("seed")?;
    let k = r.u32("layer count")? as usize;
    let mut sizes = Vec::with_capacity(k.min(1024));
    for _ in 0..k {
        sizes.push(r.u32("layer width")? as usize);
    }
    let p = r.u64("parameter count")? as usize;
    if sizes.len() >= 2 && p != param_count(&sizes) {
        return Err(IndiError::Checkpoint(format!(
            "parameter count {p} does not match layer widths {sizes:?}"
        )));
    }
    let raw = r.take(
        p.checked_mul(8)
            .ok_or_else(|| IndiError::Checkpoint("parameter count overflow".into()))?,
        "parameters",
    )?;
    let params: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if r.pos != bytes.len() {
        return Err(IndiError::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    MlpRegressor::from_parts(sizes, activation, params, seed)
        .map_err(|e| IndiError::Checkpoint(e.to_string()))
}

pub fn save(model: &MlpRegressor, path: &Path) -> Result<()> {
    fs::write(path, encode(model)).map_err(|e| IndiError::io(path, e))
}

pub fn load(path: &Path) -> Result<MlpRegressor> {
    let bytes = fs::read(path).map_err(|e| IndiError::io(path, e))?;
    decode(&bytes)
}
