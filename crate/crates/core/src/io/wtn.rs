//! `WTN1` raw tensors: magic, u8 element tag, u8 rank, little-endian u64
//! dims, row-major little-endian payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{ElementType, Scalar};
use crate::tensor::Tensor;

pub const WTN_MAGIC: &[u8; 4] = b"WTN1";

/// A tensor whose precision is only known after reading its header.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyTensor {
    F32(Tensor<f32>),
    F64(Tensor<f64>),
}

impl AnyTensor {
    pub fn shape(&self) -> &[usize] {
        match self {
            AnyTensor::F32(t) => t.shape(),
            AnyTensor::F64(t) => t.shape(),
        }
    }

    pub fn to_precision<T: Scalar>(&self) -> Tensor<T> {
        match self {
            AnyTensor::F32(t) => t.cast(),
            AnyTensor::F64(t) => t.cast(),
        }
    }
}

pub fn encode_wtn<T: Scalar>(t: &Tensor<T>) -> Result<Vec<u8>> {
    let rank = u8::try_from(t.rank()).map_err(|_| Error::format("WTN1", "rank above 255"))?;
    let mut out = Vec::with_capacity(6 + 8 * t.rank() + t.len() * T::ELEMENT.size());
    out.extend_from_slice(WTN_MAGIC);
    out.push(T::ELEMENT.tag());
    out.push(rank);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.data() {
        v.write_le(&mut out);
    }
    Ok(out)
}

fn decode_payload<T: Scalar>(shape: Vec<usize>, payload: &[u8]) -> Result<Tensor<T>> {
    Tensor::new(shape, payload.chunks_exact(T::ELEMENT.size()).map(T::read_le).collect())
}

pub fn decode_wtn(bytes: &[u8]) -> Result<AnyTensor> {
    if bytes.len() < 6 || &bytes[..4] != WTN_MAGIC {
        return Err(Error::format("WTN1", "missing magic"));
    }
    let element = ElementType::from_tag(bytes[4]).ok_or_else(|| Error::format("WTN1", format!("unknown element tag {}", bytes[4])))?;
    let rank = bytes[5] as usize;
    let dims_end = 6 + 8 * rank;
    if bytes.len() < dims_end {
        return Err(Error::format("WTN1", "truncated dimensions"));
    }
    let shape: Vec<usize> = bytes[6..dims_end]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")) as usize)
        .collect();
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format("WTN1", "dimensions overflow"))?;
    let payload = &bytes[dims_end..];
    if Some(payload.len()) != count.checked_mul(element.size()) {
        return Err(Error::format(
            "WTN1",
            format!("payload is {} bytes, shape {shape:?} needs {}", payload.len(), count * element.size()),
        ));
    }
    Ok(match element {
        ElementType::F32 => AnyTensor::F32(decode_payload(shape, payload)?),
        ElementType::F64 => AnyTensor::F64(decode_payload(shape, payload)?),
    })
}

pub fn write_wtn<T: Scalar>(path: impl AsRef<Path>, t: &Tensor<T>) -> Result<()> {
    fs::write(path, encode_wtn(t)?)?;
    Ok(())
}

pub fn read_wtn_any(path: impl AsRef<Path>) -> Result<AnyTensor> {
    decode_wtn(&fs::read(path)?)
}

/// Reads a tensor stored with element type `T`; other precisions are rejected
/// rather than silently converted.
pub fn read_wtn<T: Scalar>(path: impl AsRef<Path>) -> Result<Tensor<T>> {
    let any = read_wtn_any(path)?;
    let stored = match &any {
        AnyTensor::F32(_) => ElementType::F32,
        AnyTensor::F64(_) => ElementType::F64,
    };
    if stored != T::ELEMENT {
        return Err(Error::format("WTN1", format!("file holds {stored}, requested {}", T::ELEMENT)));
    }
    Ok(any.to_precision())
}
