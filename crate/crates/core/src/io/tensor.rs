//! VOXB tensor container.
//!
//! Little-endian layout:
//!
//! ```text
//! "VOXB" | version: u32 = 1 | dtype: u32 (0 = f32, 1 = u8) | rank: u32
//!        | dims: rank × u64 | row-major payload
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VOXB";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U8(Vec<u8>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn code(&self) -> u32 {
        match self {
            TensorData::F32(_) => 0,
            TensorData::U8(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<u64>,
    data: TensorData,
}

impl Tensor {
    pub fn new(shape: Vec<u64>, data: TensorData) -> Result<Self> {
        let expected = element_count(&shape)?;
        if expected != data.len() as u64 {
            return Err(Error::contract(format!(
                "tensor shape {shape:?} holds {expected} elements, data has {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn f32(shape: Vec<u64>, data: Vec<f32>) -> Result<Self> {
        Self::new(shape, TensorData::F32(data))
    }

    pub fn u8(shape: Vec<u64>, data: Vec<u8>) -> Result<Self> {
        Self::new(shape, TensorData::U8(data))
    }

    pub fn shape(&self) -> &[u64] {
        &self.shape
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_f32(self) -> Result<Vec<f32>> {
        match self.data {
            TensorData::F32(v) => Ok(v),
            TensorData::U8(_) => Err(Error::format("expected an f32 tensor, found u8")),
        }
    }

    pub fn into_u8(self) -> Result<Vec<u8>> {
        match self.data {
            TensorData::U8(v) => Ok(v),
            TensorData::F32(_) => Err(Error::format("expected a u8 tensor, found f32")),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.data.code().to_le_bytes())?;
        w.write_all(&(self.shape.len() as u32).to_le_bytes())?;
        for d in &self.shape {
            w.write_all(&d.to_le_bytes())?;
        }
        match &self.data {
            TensorData::F32(v) => {
                let mut buf = Vec::with_capacity(v.len() * 4);
                for x in v {
                    buf.extend_from_slice(&x.to_le_bytes());
                }
                w.write_all(&buf)?;
            }
            TensorData::U8(v) => w.write_all(v)?,
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur
            .take(4)
            .ok_or_else(|| Error::format("file too short for VOXB magic"))?;
        if magic != MAGIC {
            return Err(Error::format(format!("bad magic {magic:?}, expected \"VOXB\"")));
        }
        let header_u32 = |cur: &mut Cursor, what: &str| {
            cur.u32()
                .ok_or_else(|| Error::format(format!("truncated header: missing {what}")))
        };
        let version = header_u32(&mut cur, "version")?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported VOXB version {version}")));
        }
        let code = header_u32(&mut cur, "element type")?;
        if code > 1 {
            return Err(Error::format(format!("unknown element type code {code}")));
        }
        let rank = header_u32(&mut cur, "rank")? as usize;
        let mut shape = Vec::with_capacity(rank.min(16));
        for _ in 0..rank {
            shape.push(
                cur.u64()
                    .ok_or_else(|| Error::format("truncated header: missing dimensions"))?,
            );
        }
        let count = element_count(&shape).map_err(|_| Error::corruption("dimension product overflows"))?;
        let width = if code == 0 { 4 } else { 1 };
        let payload = &bytes[cur.pos..];
        let expected = count
            .checked_mul(width)
            .ok_or_else(|| Error::corruption("payload size overflows"))?;
        if payload.len() as u64 != expected {
            return Err(Error::corruption(format!(
                "shape {shape:?} declares {count} elements ({expected} bytes), payload has {} bytes",
                payload.len()
            )));
        }
        let data = if code == 0 {
            TensorData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            )
        } else {
            TensorData::U8(payload.to_vec())
        };
        Ok(Self { shape, data })
    }
}

fn element_count(shape: &[u64]) -> Result<u64> {
    shape
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::contract("tensor shape overflows"))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    let mut w = std::io::BufWriter::new(file);
    tensor.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let bytes = std::fs::read(path.as_ref())?;
    Tensor::from_bytes(&bytes)
}
