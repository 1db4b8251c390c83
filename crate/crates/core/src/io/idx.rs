//! IDX files: big-endian magic `0x00000803` for `[count, rows, cols]` u8
//! images and `0x00000801` for `[count]` u8 labels.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Dataset;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::format("IDX", "truncated header"))
}

/// Returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format("IDX", format!("image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")));
    }
    let (n, r, c) = (be_u32(bytes, 4)? as usize, be_u32(bytes, 8)? as usize, be_u32(bytes, 12)? as usize);
    let data = &bytes[16..];
    if data.len() != n * r * c {
        return Err(Error::format("IDX", format!("expected {} image bytes, found {}", n * r * c, data.len())));
    }
    Ok((n, r, c, data.to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format("IDX", format!("label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let data = &bytes[8..];
    if data.len() != n {
        return Err(Error::format("IDX", format!("expected {n} labels, found {}", data.len())));
    }
    Ok(data.to_vec())
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<(usize, usize, usize, Vec<u8>)> {
    parse_idx_images(&fs::read(path)?)
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    parse_idx_labels(&fs::read(path)?)
}

pub fn write_idx_images(path: impl AsRef<Path>, count: usize, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != count * rows * cols {
        return Err(Error::shape(format!("{} pixels for {count} images of {rows}x{cols}", pixels.len())));
    }
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    fs::write(path, out)?;
    Ok(())
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out)?;
    Ok(())
}

/// Images scaled to `[0, 1]` as `[N, 1, rows, cols]`; the class count is one
/// more than the largest label.
pub fn load_idx_dataset<T: Scalar>(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset<T>> {
    let (n, r, c, pixels) = read_idx_images(images)?;
    let labels = read_idx_labels(labels)?;
    if labels.len() != n {
        return Err(Error::shape(format!("{n} images but {} labels", labels.len())));
    }
    let scale = 1.0 / 255.0;
    let images = Tensor::new(vec![n, 1, r, c], pixels.iter().map(|&p| T::of(p as f64 * scale)).collect())?;
    let classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    Dataset::new(images, labels.into_iter().map(usize::from).collect(), classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = (dir.path().join("x.idx"), dir.path().join("y.idx"));
        write_idx_images(&img, 2, 2, 3, &[0, 51, 102, 153, 204, 255, 1, 2, 3, 4, 5, 6]).unwrap();
        write_idx_labels(&lab, &[3, 1]).unwrap();
        let raw = fs::read(&img).unwrap();
        assert_eq!(&raw[..4], &[0, 0, 8, 3]);
        let ds = load_idx_dataset::<f64>(&img, &lab).unwrap();
        assert_eq!(ds.images.shape(), &[2, 1, 2, 3]);
        assert_eq!(ds.labels, vec![3, 1]);
        assert_eq!(ds.classes, 4);
        assert!((ds.images.data()[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_swapped_files() {
        let dir = tempfile::tempdir().unwrap();
        let lab = dir.path().join("y.idx");
        write_idx_labels(&lab, &[0]).unwrap();
        assert!(read_idx_images(&lab).is_err());
    }
}
