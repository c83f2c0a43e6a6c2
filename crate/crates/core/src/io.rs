//! Binary feature-map files.
//!
//! Layout, little-endian throughout:
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `CMFM` |
//! | 4 | 4 | version, `u32` = 1 |
//! | 8 | 16 | `K, H, W, C` as `u32` |
//! | 24 | `4·K·H·W·C` | `f32` payload, row-major `K×H×W×C` |

use std::path::Path;

use crate::error::{Error, Result};
use crate::fusion::FeatureStack;
use crate::Tensor;

pub const MAGIC: [u8; 4] = *b"CMFM";
pub const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 24;

pub fn encode_feature_stack(f: &FeatureStack) -> Result<Vec<u8>> {
    let t = f.tensor();
    let mut out = Vec::with_capacity(HEADER_BYTES + 4 * t.numel());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for &d in t.shape() {
        let d = u32::try_from(d).map_err(|_| Error::Validation(format!("dimension {d} does not fit in u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for (i, &v) in t.data().iter().enumerate() {
        let narrow = v as f32;
        if !narrow.is_finite() {
            return Err(Error::Validation(format!("value {v} at element {i} overflows f32")));
        }
        out.extend_from_slice(&narrow.to_le_bytes());
    }
    Ok(out)
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Format { offset: bytes.len() as u64, reason: "header truncated".into() })
}

pub fn decode_feature_stack(bytes: &[u8]) -> Result<FeatureStack> {
    match bytes.get(0..4) {
        Some(m) if m == MAGIC => {}
        Some(m) => return Err(Error::Format { offset: 0, reason: format!("bad magic {m:?}, expected \"CMFM\"") }),
        None => return Err(Error::Format { offset: bytes.len() as u64, reason: "header truncated".into() }),
    }
    let version = read_u32(bytes, 4)?;
    if version != VERSION {
        return Err(Error::Format { offset: 4, reason: format!("unsupported version {version}") });
    }
    let mut shape = [0usize; 4];
    for (i, d) in shape.iter_mut().enumerate() {
        let offset = 8 + 4 * i;
        *d = read_u32(bytes, offset)? as usize;
        if *d == 0 {
            return Err(Error::Format { offset: offset as u64, reason: "zero dimension".into() });
        }
    }
    let expected = shape
        .iter()
        .try_fold(4u64, |acc, &d| acc.checked_mul(d as u64))
        .ok_or_else(|| Error::Format { offset: 8, reason: format!("payload size of {shape:?} overflows") })?;
    let payload = &bytes[HEADER_BYTES..];
    if payload.len() as u64 != expected {
        return Err(Error::Length { expected, actual: payload.len() as u64 });
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    FeatureStack::new(Tensor::new(&shape, data)?)
}

pub fn save_feature_stack(f: &FeatureStack, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_feature_stack(f)?)?;
    Ok(())
}

pub fn load_feature_stack(path: impl AsRef<Path>) -> Result<FeatureStack> {
    decode_feature_stack(&std::fs::read(path)?)
}
