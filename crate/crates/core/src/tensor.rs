//! Dense row-major tensor of `f32` values and its on-disk format.
//!
//! FRTD layout, all little-endian:
//!
//! ```text
//! magic   4 bytes  "FRTD"
//! version u8       1
//! dtype   u8       0 (f32)
//! ndim    u8
//! dims    ndim x u32
//! payload product(dims) x f32, row-major
//! ```
//!
//! Round-trips are bit-exact, including non-finite payloads.

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FRTD";
const VERSION: u8 = 1;
const DTYPE_F32: u8 = 0;

/// Dense row-major multi-dimensional array of `f32`.
///
/// Extents are positive and `data.len() == product(dims)` always holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Shape(format!(
                "extents must be positive, got {dims:?}"
            )));
        }
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "data length {} does not match dims {:?} (expected {})",
                data.len(),
                dims,
                expected
            )));
        }
        Ok(Tensor { dims, data })
    }

    /// All-zero tensor. Panics on zero extents (programmer error).
    pub fn zeros(dims: &[usize]) -> Self {
        Tensor::filled(dims, 0.0)
    }

    pub fn filled(dims: &[usize], value: f32) -> Self {
        assert!(
            !dims.is_empty() && dims.iter().all(|&d| d > 0),
            "extents must be positive"
        );
        let len = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f32> {
        self.data.iter()
    }

    /// Sum of all elements, accumulated in f64.
    pub fn sum_f64(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Serializes to FRTD bytes.
    pub fn to_frtd_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(DTYPE_F32);
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses FRTD bytes, validating magic, version, dtype and payload length.
    pub fn from_frtd_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 7 {
            return Err(Error::Corrupt(format!(
                "FRTD header truncated: {} bytes",
                bytes.len()
            )));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:02x?}, expected \"FRTD\"",
                &bytes[0..4]
            )));
        }
        if bytes[4] != VERSION {
            return Err(Error::Format(format!(
                "unsupported FRTD version {}",
                bytes[4]
            )));
        }
        if bytes[5] != DTYPE_F32 {
            return Err(Error::Format(format!("unsupported dtype {}", bytes[5])));
        }
        let ndim = bytes[6] as usize;
        let dims_end = 7 + 4 * ndim;
        if bytes.len() < dims_end {
            return Err(Error::Corrupt("FRTD dims truncated".into()));
        }
        let mut dims = Vec::with_capacity(ndim);
        for i in 0..ndim {
            let off = 7 + 4 * i;
            let d = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
            dims.push(d as usize);
        }
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Format(format!("invalid FRTD dims {dims:?}")));
        }
        let count: usize = dims.iter().product();
        let payload = &bytes[dims_end..];
        if payload.len() != count * 4 {
            return Err(Error::Corrupt(format!(
                "FRTD payload is {} bytes, dims {:?} require {}",
                payload.len(),
                dims,
                count * 4
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Tensor { dims, data })
    }
}
