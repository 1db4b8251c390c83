//! One-level wavelet soft-threshold denoising: shrink `lh`, `hl`, `hh`,
//! keep `ll`, reconstruct.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::get_wavelet;
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Tensor};
use crate::transform::{dwt2d, idwt2d};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseConfig {
    pub wavelet: String,
    pub lambda: f64,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            wavelet: "haar".to_string(),
            lambda: 0.1,
        }
    }
}

impl DenoiseConfig {
    pub fn new(wavelet: &str, lambda: f64) -> Result<Self> {
        let cfg = Self {
            wavelet: wavelet.to_string(),
            lambda,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::NegativeLambda(self.lambda));
        }
        get_wavelet(&self.wavelet).map(|_| ())
    }
}

/// `x - λ` above `λ`, `x + λ` below `-λ`, zero in between.
pub fn soft_shrink<T: Scalar>(x: T, lambda: T) -> Result<T> {
    if !(lambda >= T::zero()) {
        return Err(Error::NegativeLambda(lambda.as_f64()));
    }
    Ok(shrink(x, lambda))
}

#[inline]
fn shrink<T: Scalar>(x: T, lambda: T) -> T {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        T::zero()
    }
}

/// Denoises a single `H × W` plane.
pub fn denoise_plane<T: Scalar>(img: &Matrix<T>, cfg: &DenoiseConfig) -> Result<Matrix<T>> {
    cfg.validate()?;
    let spec = get_wavelet(&cfg.wavelet)?;
    let lambda = T::of(cfg.lambda);
    let mut d = dwt2d(img, &spec)?;
    for band in [&mut d.lh, &mut d.hl, &mut d.hh] {
        band.data_mut().iter_mut().for_each(|v| *v = shrink(*v, lambda));
    }
    idwt2d(&d, &spec)
}

/// Denoises a `[H, W]`, `[C, H, W]` or `[N, C, H, W]` image channel by channel.
pub fn denoise_image<T: Scalar>(img: &Tensor<T>, cfg: &DenoiseConfig) -> Result<Tensor<T>> {
    let shape = img.shape().to_vec();
    let (h, w) = match shape.as_slice() {
        [h, w] | [_, h, w] | [_, _, h, w] => (*h, *w),
        _ => {
            return Err(Error::shape(format!(
                "expected a rank 2-4 image tensor, got {shape:?}"
            )))
        }
    };
    let mut out = Tensor::zeros(&shape);
    for (src, dst) in img.data().chunks(h * w).zip(out.data_mut().chunks_mut(h * w)) {
        let plane = Matrix::from_vec(h, w, src.to_vec())?;
        dst.copy_from_slice(denoise_plane(&plane, cfg)?.data());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shrink_branches() {
        assert!((soft_shrink(0.5, 0.1).unwrap() - 0.4f64).abs() < 1e-15);
        assert_eq!(soft_shrink(-0.05, 0.1).unwrap(), 0.0f64);
        assert!((soft_shrink(-0.3, 0.1).unwrap() + 0.2f64).abs() < 1e-15);
        assert!(matches!(soft_shrink(1.0f64, -0.1), Err(Error::NegativeLambda(_))));
        assert!(DenoiseConfig::new("haar", -1.0).is_err());
        assert!(DenoiseConfig::new("nope", 0.1).is_err());
    }

    #[test]
    fn zero_lambda_is_round_trip() {
        let img = Tensor::<f64>::from_fn(&[2, 8, 6], |i| ((i * 13) % 17) as f64 / 17.0);
        let out = denoise_image(&img, &DenoiseConfig::new("haar", 0.0).unwrap()).unwrap();
        assert!(out.max_abs_diff(&img) < 1e-14);
    }

    #[test]
    fn constant_image_unchanged() {
        let img = Tensor::<f64>::filled(&[1, 1, 16, 16], 0.37);
        let out = denoise_image(&img, &DenoiseConfig::new("haar", 0.3).unwrap()).unwrap();
        assert!(out.max_abs_diff(&img) < 1e-14);
    }

    #[test]
    fn rejects_bad_rank() {
        let img = Tensor::<f64>::zeros(&[4]);
        assert!(denoise_image(&img, &DenoiseConfig::default()).is_err());
    }
}
