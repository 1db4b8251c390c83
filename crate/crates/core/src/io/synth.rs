//! Synthetic ten-class digit images: seven-segment glyphs with random size,
//! position, slant, stroke width, contrast, background level, a faint
//! distractor stroke and background noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::Dataset;
use crate::robustness::image_rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Segments `a..g` lit for each digit (top, top-right, bottom-right, bottom,
/// bottom-left, top-left, middle).
const SEGMENTS: [[bool; 7]; 10] = [
    [true, true, true, true, true, true, false],
    [false, true, true, false, false, false, false],
    [true, true, false, true, true, false, true],
    [true, true, true, true, false, false, true],
    [false, true, true, false, false, true, true],
    [true, false, true, true, false, true, true],
    [true, false, true, true, true, true, true],
    [true, true, true, false, false, false, false],
    [true, true, true, true, true, true, true],
    [true, true, true, true, false, true, true],
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub count: usize,
    pub side: usize,
    pub seed: u64,
    /// Standard deviation of additive background noise, in `[0, 1]` units.
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            count: 1000,
            side: 28,
            seed: 0,
            noise: 0.05,
        }
    }
}

fn segment_distance(px: f64, py: f64, (ax, ay): (f64, f64), (bx, by): (f64, f64)) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let t = (((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((px - ax - t * dx).powi(2) + (py - ay - t * dy).powi(2)).sqrt()
}

fn render(digit: usize, side: usize, noise: f64, rng: &mut impl Rng) -> Vec<u8> {
    let s = side as f64;
    let height = s * rng.random_range(0.55..0.75);
    let width = height * rng.random_range(0.45..0.65);
    let cx = s / 2.0 + rng.random_range(-0.08..0.08) * s;
    let cy = s / 2.0 + rng.random_range(-0.08..0.08) * s;
    let slant = rng.random_range(-0.25..0.25);
    let stroke = rng.random_range(0.07..0.11) * s;
    let ink = rng.random_range(0.45..1.0);
    let background = rng.random_range(0.0..0.15);

    let (l, r) = (-width / 2.0, width / 2.0);
    let (t, m, b) = (-height / 2.0, 0.0, height / 2.0);
    let ends = [((l, t), (r, t)), ((r, t), (r, m)), ((r, m), (r, b)), ((l, b), (r, b)), ((l, m), (l, b)), ((l, t), (l, m)), ((l, m), (r, m))];
    let place = |(x, y): (f64, f64)| (cx + x - slant * y, cy + y);
    let lit: Vec<_> = ends
        .iter()
        .zip(SEGMENTS[digit])
        .filter(|(_, on)| *on)
        .map(|(&(a, b), _)| (place(a), place(b)))
        .collect();
    let mut point = || (rng.random_range(0.0..s), rng.random_range(0.0..s));
    let distractor = (point(), point());
    let distractor_ink = rng.random_range(0.0..0.35);

    let normal = Normal::new(0.0, noise).expect("finite noise level");
    let mut pixels = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let d = lit.iter().map(|&(a, b)| segment_distance(px, py, a, b)).fold(f64::INFINITY, f64::min);
            let coverage = (stroke / 2.0 + 0.5 - d).clamp(0.0, 1.0);
            let clutter = (stroke / 2.0 + 0.5 - segment_distance(px, py, distractor.0, distractor.1)).clamp(0.0, 1.0);
            let v = background + ink * coverage + distractor_ink * clutter + normal.sample(rng).abs();
            pixels.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    pixels
}

/// Returns `(pixels, labels)` with labels cycling through `0..10`. Sample `i`
/// depends only on `(seed, i)`.
pub fn generate(cfg: &SynthConfig) -> Result<(Vec<u8>, Vec<u8>)> {
    if cfg.side < 8 {
        return Err(Error::InvalidConfig(format!("synthetic images need side >= 8, got {}", cfg.side)));
    }
    if !(0.0..=1.0).contains(&cfg.noise) {
        return Err(Error::InvalidConfig(format!("noise level {} outside [0, 1]", cfg.noise)));
    }
    let mut pixels = Vec::with_capacity(cfg.count * cfg.side * cfg.side);
    let mut labels = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let digit = i % 10;
        let mut rng = image_rng(cfg.seed, i as u64);
        pixels.extend(render(digit, cfg.side, cfg.noise, &mut rng));
        labels.push(digit as u8);
    }
    Ok((pixels, labels))
}

/// [`generate`] as a `[count, 1, side, side]` dataset scaled to `[0, 1]`.
pub fn generate_dataset<T: Scalar>(cfg: &SynthConfig) -> Result<Dataset<T>> {
    let (pixels, labels) = generate(cfg)?;
    let images = Tensor::new(
        vec![cfg.count, 1, cfg.side, cfg.side],
        pixels.iter().map(|&p| T::of(p as f64 / 255.0)).collect(),
    )?;
    Dataset::new(images, labels.into_iter().map(usize::from).collect(), 10)
}
