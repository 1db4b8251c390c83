use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::shape(format!("{} pixels for a {width}x{height} image", pixels.len())));
        }
        Ok(Self { width, height, pixels })
    }

    /// Intensities scaled to `[0, 1]`.
    pub fn to_matrix<T: Scalar>(&self) -> Matrix<T> {
        let scale = T::of(1.0 / 255.0);
        Matrix::from_fn(self.height, self.width, |i, j| T::of(self.pixels[i * self.width + j] as f64) * scale)
    }

    /// Inverse of [`GrayImage::to_matrix`] with round-to-nearest quantization.
    pub fn from_matrix<T: Scalar>(m: &Matrix<T>) -> Self {
        Self {
            width: m.cols(),
            height: m.rows(),
            pixels: m.data().iter().map(|v| quantize(v.as_f64())).collect(),
        }
    }
}

/// Maps `[0, 1]` to `0..=255`, rounding to nearest and saturating.
pub fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

fn header_token(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::format("PGM", "truncated header")),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format("PGM", "expected a decimal header field"))
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::format("PGM", "missing P5 magic (only binary graymaps are supported)"));
    }
    let mut pos = 2;
    let width = header_token(bytes, &mut pos)?;
    let height = header_token(bytes, &mut pos)?;
    let maxval = header_token(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(Error::format("PGM", format!("maxval {maxval} unsupported, expected 255")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::format("PGM", "missing whitespace after maxval"));
    }
    pos += 1;
    let data = &bytes[pos..];
    if data.len() != width * height {
        return Err(Error::format(
            "PGM",
            format!("expected {} pixel bytes, found {}", width * height, data.len()),
        ));
    }
    GrayImage::new(width, height, data.to_vec())
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    parse_pgm(&fs::read(path)?)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}
