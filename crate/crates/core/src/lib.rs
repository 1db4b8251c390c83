//! Discrete wavelet transforms as differentiable layers, wavelet-based
//! down-sampling for small CNNs, and corruption-robustness metrics.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below name the common instantiations.

pub mod complexity;
pub mod denoise;
pub mod error;
pub mod filterbank;
pub mod io;
pub mod nn;
pub mod robustness;
pub mod scalar;
pub mod tensor;
pub mod transform;

pub use error::{Error, Result};
pub use filterbank::{get_wavelet, validate_filterbank, WaveletSpec, WAVELET_NAMES};
pub use scalar::{ElementType, Scalar};
pub use tensor::{Matrix, Tensor};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Matrix64 = Matrix<f64>;
pub type Model32 = nn::Model<f32>;
pub type Model64 = nn::Model<f64>;
pub type Dataset32 = nn::Dataset<f32>;
pub type Dataset64 = nn::Dataset<f64>;
pub type Decomposition64 = transform::Decomposition2D<f64>;
