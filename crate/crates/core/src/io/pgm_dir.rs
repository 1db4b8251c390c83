use std::fs;
use std::path::Path;

use super::pgm::read_pgm;
use crate::error::{Error, Result};
use crate::nn::Dataset;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Loads `dir/labels.csv` (`file,label` rows, optional header) and the PGM
/// files it names. All images must share one size.
pub fn load_pgm_dir<T: Scalar>(dir: impl AsRef<Path>) -> Result<Dataset<T>> {
    let dir = dir.as_ref();
    let csv = fs::read_to_string(dir.join("labels.csv"))?;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut shape = None;
    for (line_no, line) in csv.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (line_no == 0 && line.eq_ignore_ascii_case("file,label")) {
            continue;
        }
        let (file, label) = line
            .split_once(',')
            .ok_or_else(|| Error::format("labels.csv", format!("line {}: expected 'file,label'", line_no + 1)))?;
        let label: usize = label
            .trim()
            .parse()
            .map_err(|_| Error::format("labels.csv", format!("line {}: bad label '{label}'", line_no + 1)))?;
        let img = read_pgm(dir.join(file.trim()))?;
        match shape {
            None => shape = Some((img.height, img.width)),
            Some(s) if s != (img.height, img.width) => {
                return Err(Error::shape(format!("{file} is {}x{}, expected {}x{}", img.height, img.width, s.0, s.1)));
            }
            _ => {}
        }
        data.extend(img.to_matrix::<T>().into_data());
        labels.push(label);
    }
    let (h, w) = shape.ok_or_else(|| Error::InvalidConfig("labels.csv lists no images".into()))?;
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    Dataset::new(Tensor::new(vec![labels.len(), 1, h, w], data)?, labels, classes)
}
