//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "WCN1"            magic
//! u8                element type (0 = f32, 1 = f64)
//! u32 + bytes       model config as JSON
//! u32               layer count
//! per layer:
//!   u8 + bytes      layer kind
//!   u32             tensor count (parameters, then buffers)
//!   per tensor:     u64 length, then the payload
//! ```
//!
//! Loading rebuilds the model from the embedded config and then overwrites
//! every parameter and buffer, so the layer table doubles as a consistency
//! check.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::Model;
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::scalar::{ElementType, Scalar};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"WCN1";

/// A checkpoint whose precision is only known at load time.
#[derive(Debug)]
pub enum AnyModel {
    F32(Model<f32>),
    F64(Model<f64>),
}

impl AnyModel {
    pub fn element_type(&self) -> ElementType {
        match self {
            AnyModel::F32(_) => ElementType::F32,
            AnyModel::F64(_) => ElementType::F64,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            AnyModel::F32(m) => m.config(),
            AnyModel::F64(m) => m.config(),
        }
    }
}

pub fn write_checkpoint<T: Scalar, W: Write>(model: &Model<T>, mut out: W) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&[T::ELEMENT.tag()])?;
    let config = serde_json::to_vec(model.config())?;
    out.write_all(&(config.len() as u32).to_le_bytes())?;
    out.write_all(&config)?;
    out.write_all(&(model.layers().len() as u32).to_le_bytes())?;
    let mut bytes = Vec::new();
    for layer in model.layers() {
        let kind = layer.kind().as_bytes();
        out.write_all(&[kind.len() as u8])?;
        out.write_all(kind)?;
        let tensors: Vec<&[T]> = layer
            .params()
            .into_iter()
            .map(|p| p.value.as_slice())
            .chain(layer.buffers())
            .collect();
        out.write_all(&(tensors.len() as u32).to_le_bytes())?;
        for t in tensors {
            out.write_all(&(t.len() as u64).to_le_bytes())?;
            bytes.clear();
            t.iter().for_each(|v| v.write_le(&mut bytes));
            out.write_all(&bytes)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn save_checkpoint<T: Scalar>(model: &Model<T>, path: impl AsRef<Path>) -> Result<()> {
    write_checkpoint(model, BufWriter::new(File::create(path)?))
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::format("checkpoint", format!("truncated file: {e}")))?;
    Ok(buf)
}

fn read_bytes(r: &mut impl Read, len: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(Error::format("checkpoint", "truncated file"));
    }
    Ok(buf)
}

fn read_body<T: Scalar>(r: &mut impl Read, config: &ModelConfig) -> Result<Model<T>> {
    let mut model = Model::<T>::build(config)?;
    let count = u32::from_le_bytes(read_array(r)?) as usize;
    if count != model.layers().len() {
        return Err(Error::format(
            "checkpoint",
            format!("{count} layers stored, config builds {}", model.layers().len()),
        ));
    }
    let size = T::ELEMENT.size();
    for (i, layer) in model.layers_mut().iter_mut().enumerate() {
        let [kind_len] = read_array::<1>(r)?;
        let kind = read_bytes(r, kind_len as usize)?;
        if kind != layer.kind().as_bytes() {
            return Err(Error::format(
                "checkpoint",
                format!("layer {i}: stored '{}', expected '{}'", String::from_utf8_lossy(&kind), layer.kind()),
            ));
        }
        let n_tensors = u32::from_le_bytes(read_array(r)?) as usize;
        let mut targets: Vec<&mut Vec<T>> = Vec::new();
        let n_params = layer.params().len();
        let n_buffers = layer.buffers().len();
        if n_tensors != n_params + n_buffers {
            return Err(Error::format(
                "checkpoint",
                format!("layer {i}: {n_tensors} tensors stored, expected {}", n_params + n_buffers),
            ));
        }
        let mut values = Vec::with_capacity(n_tensors);
        for _ in 0..n_tensors {
            let len = u64::from_le_bytes(read_array(r)?) as usize;
            let raw = read_bytes(r, len.checked_mul(size).ok_or_else(|| Error::format("checkpoint", "tensor too large"))?)?;
            values.push(raw.chunks_exact(size).map(T::read_le).collect::<Vec<T>>());
        }
        let mut values = values.into_iter();
        for p in layer.params_mut() {
            targets.push(&mut p.value);
        }
        for (t, v) in targets.into_iter().zip(values.by_ref()) {
            if t.len() != v.len() {
                return Err(Error::format("checkpoint", format!("layer {i}: parameter length mismatch")));
            }
            *t = v;
        }
        for (b, v) in layer.buffers_mut().into_iter().zip(values) {
            if b.len() != v.len() {
                return Err(Error::format("checkpoint", format!("layer {i}: buffer length mismatch")));
            }
            *b = v;
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::format("checkpoint", "trailing bytes after last layer"));
    }
    Ok(model)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<AnyModel> {
    let magic = read_array::<4>(&mut r)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::format("checkpoint", format!("bad magic {magic:?}")));
    }
    let [tag] = read_array::<1>(&mut r)?;
    let element = ElementType::from_tag(tag).ok_or_else(|| Error::format("checkpoint", format!("unknown element tag {tag}")))?;
    let config_len = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let config: ModelConfig = serde_json::from_slice(&read_bytes(&mut r, config_len)?)?;
    Ok(match element {
        ElementType::F32 => AnyModel::F32(read_body(&mut r, &config)?),
        ElementType::F64 => AnyModel::F64(read_body(&mut r, &config)?),
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<AnyModel> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
