//! Binary tensor dumps.
//!
//! Layout: magic `VTDR`, version byte `0x01`, rank byte, `rank` little-endian `u32`
//! dimensions, then the `f32` values little-endian in row-major order.

use std::fs;
use std::path::Path;

use vidtldr_core::numerics::Matrix;

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 4] = b"VTDR";
pub const VERSION: u8 = 0x01;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> std::result::Result<Self, String> {
        let want: usize = dims.iter().product();
        if want != data.len() {
            return Err(format!(
                "dims {dims:?} need {want} values, got {}",
                data.len()
            ));
        }
        Ok(Self { dims, data })
    }

    pub fn vector(data: Vec<f32>) -> Self {
        Self {
            dims: vec![data.len()],
            data,
        }
    }

    /// Stacks equally shaped matrices into a rank-3 tensor.
    pub fn stack(mats: &[Matrix]) -> std::result::Result<Self, String> {
        let (r, c) = mats.first().map_or((0, 0), Matrix::shape);
        if mats.iter().any(|m| m.shape() != (r, c)) {
            return Err("stacked matrices differ in shape".into());
        }
        let data = mats.iter().flat_map(|m| m.data().iter().copied()).collect();
        Ok(Self {
            dims: vec![mats.len(), r, c],
            data,
        })
    }

    pub fn to_matrix(&self) -> Option<Matrix> {
        match self.dims[..] {
            [r, c] => Matrix::new(r, c, self.data.clone()).ok(),
            _ => None,
        }
    }
}

impl From<&Matrix> for Tensor {
    fn from(m: &Matrix) -> Self {
        Self {
            dims: vec![m.rows(), m.cols()],
            data: m.data().to_vec(),
        }
    }
}

pub fn encode(t: &Tensor) -> std::result::Result<Vec<u8>, String> {
    let rank = u8::try_from(t.dims.len()).map_err(|_| "rank above 255".to_string())?;
    let mut out = Vec::with_capacity(6 + 4 * t.dims.len() + 4 * t.data.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(rank);
    for &d in &t.dims {
        let d = u32::try_from(d).map_err(|_| format!("dimension {d} exceeds u32"))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Tensor, String> {
    if bytes.len() < 6 || &bytes[..4] != MAGIC {
        return Err("missing VTDR magic".into());
    }
    if bytes[4] != VERSION {
        return Err(format!("unsupported version {}", bytes[4]));
    }
    let rank = bytes[5] as usize;
    let header = 6 + 4 * rank;
    if bytes.len() < header {
        return Err("truncated header".into());
    }
    let dims: Vec<usize> = bytes[6..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or("dimension product overflows")?;
    let body = &bytes[header..];
    if Some(body.len()) != count.checked_mul(4) {
        return Err(format!(
            "expected {count} values, found {} bytes of data",
            body.len()
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Tensor { dims, data })
}

pub fn dump_tensor(path: &Path, t: &Tensor) -> Result<()> {
    let bytes = encode(t).map_err(|msg| HarnessError::Format {
        path: path.to_path_buf(),
        msg,
    })?;
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

pub fn load_tensor(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    decode(&bytes).map_err(|msg| HarnessError::Format {
        path: path.to_path_buf(),
        msg,
    })
}
