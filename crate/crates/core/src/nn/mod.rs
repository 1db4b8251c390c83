//! A small trainable CNN stack with pluggable down-sampling.

mod checkpoint;
mod gradcheck;
pub mod kernels;
mod layers;
mod model;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::get_wavelet;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, AnyModel, CHECKPOINT_MAGIC};
pub use gradcheck::{gradcheck_layer, gradcheck_model, GradcheckConfig, GradcheckReport};
pub use layers::{BatchNorm2d, Conv2d, Dense, Downsample, Flatten, Relu};
pub use model::{softmax_cross_entropy, Classifier, Model};
pub use train::{evaluate, loss_and_accuracy, train, train_with_progress, Dataset, EpochStats, Hyper, TrainReport};

/// Learnable tensor with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Vec<T>) -> Self {
        let grad = vec![T::zero(); value.len()];
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }
}

/// A network layer. `forward` runs in training mode and caches what
/// `backward` needs; `infer` is the side-effect-free evaluation path.
pub trait Layer<T: Scalar>: Send + Sync {
    fn kind(&self) -> &'static str;

    /// Output shape for an `[N, ...]` input shape.
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>>;

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>>;

    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>>;

    /// Propagates `grad` (w.r.t. the last `forward` output) to the input and
    /// accumulates parameter gradients.
    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>>;

    fn params(&self) -> Vec<&Param<T>> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        Vec::new()
    }

    /// Non-learnable state saved in checkpoints (batch-norm running statistics).
    fn buffers(&self) -> Vec<&[T]> {
        Vec::new()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<T>> {
        Vec::new()
    }
}

/// How a down-sampling stage halves the spatial resolution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DownsampleMode {
    MaxPool2,
    AvgPool2,
    /// 3×3 stride-2 convolution, channel count preserved.
    StridedConv,
    /// Keep only the `ll` subband.
    DwtLL(String),
    /// Elementwise mean of the four subbands.
    DwtAvg(String),
    /// Channel concatenation `[ll, lh, hl, hh]`.
    DwtCat(String),
}

impl DownsampleMode {
    pub fn wavelet(&self) -> Option<&str> {
        match self {
            DownsampleMode::DwtLL(w) | DownsampleMode::DwtAvg(w) | DownsampleMode::DwtCat(w) => Some(w),
            _ => None,
        }
    }

    pub fn channel_factor(&self) -> usize {
        match self {
            DownsampleMode::DwtCat(_) => 4,
            _ => 1,
        }
    }
}

impl fmt::Display for DownsampleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DownsampleMode::MaxPool2 => f.write_str("max_pool2"),
            DownsampleMode::AvgPool2 => f.write_str("avg_pool2"),
            DownsampleMode::StridedConv => f.write_str("strided_conv"),
            DownsampleMode::DwtLL(w) => write!(f, "dwt_ll:{w}"),
            DownsampleMode::DwtAvg(w) => write!(f, "dwt_avg:{w}"),
            DownsampleMode::DwtCat(w) => write!(f, "dwt_cat:{w}"),
        }
    }
}

impl FromStr for DownsampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, wavelet) = match s.split_once(':') {
            Some((k, w)) => (k, Some(w)),
            None => (s, None),
        };
        let needs = |w: Option<&str>| -> Result<String> {
            let w = w.unwrap_or("haar");
            get_wavelet(w)?;
            Ok(w.to_string())
        };
        match (kind, wavelet) {
            ("max_pool2", None) => Ok(DownsampleMode::MaxPool2),
            ("avg_pool2", None) => Ok(DownsampleMode::AvgPool2),
            ("strided_conv", None) => Ok(DownsampleMode::StridedConv),
            ("dwt_ll", w) => Ok(DownsampleMode::DwtLL(needs(w)?)),
            ("dwt_avg", w) => Ok(DownsampleMode::DwtAvg(needs(w)?)),
            ("dwt_cat", w) => Ok(DownsampleMode::DwtCat(needs(w)?)),
            _ => Err(Error::InvalidConfig(format!("unknown down-sampling mode '{s}'"))),
        }
    }
}

impl TryFrom<String> for DownsampleMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DownsampleMode> for String {
    fn from(m: DownsampleMode) -> Self {
        m.to_string()
    }
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv {
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        #[serde(default = "default_stride")]
        stride: usize,
    },
    BatchNorm {
        channels: usize,
    },
    Relu,
    Downsample {
        mode: DownsampleMode,
    },
    Flatten,
    Dense {
        in_features: usize,
        out_features: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Per-sample input shape `[C, H, W]`.
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
    #[serde(default)]
    pub seed: u64,
    /// When set, stride-2 convolutions become a stride-1 convolution
    /// followed by `DwtLL` with this wavelet.
    #[serde(default)]
    pub strided_conv_wavelet: Option<String>,
}

impl ModelConfig {
    /// Three conv/BN/ReLU/down-sample stages (16, 32, 64 channels) and a dense
    /// classifier on a `1 × side × side` input, `side` divisible by 8.
    pub fn wavecnet_mini(side: usize, classes: usize, mode: DownsampleMode, seed: u64) -> Self {
        let mut layers = Vec::new();
        let mut channels = 1;
        for width in [16, 32, 64] {
            layers.push(LayerSpec::Conv {
                kernel: 3,
                in_channels: channels,
                out_channels: width,
                stride: 1,
            });
            layers.push(LayerSpec::BatchNorm { channels: width });
            layers.push(LayerSpec::Relu);
            layers.push(LayerSpec::Downsample { mode: mode.clone() });
            channels = width * mode.channel_factor();
        }
        layers.push(LayerSpec::Flatten);
        let spatial = side / 8;
        layers.push(LayerSpec::Dense {
            in_features: channels * spatial * spatial,
            out_features: classes,
        });
        Self {
            input: [1, side, side],
            layers,
            seed,
            strided_conv_wavelet: None,
        }
    }

    /// Input side used by [`ModelConfig::wavecnet_mini`] for 28×28 data
    /// (centre-padded to keep every down-sampling input even).
    pub const MINI_SIDE: usize = 32;

    /// Layer list after the strided-convolution rewrite.
    pub fn expanded_layers(&self) -> Result<Vec<LayerSpec>> {
        let Some(w) = &self.strided_conv_wavelet else {
            return Ok(self.layers.clone());
        };
        get_wavelet(w)?;
        let mut out = Vec::with_capacity(self.layers.len() + 2);
        for spec in &self.layers {
            match spec {
                LayerSpec::Conv {
                    kernel,
                    in_channels,
                    out_channels,
                    stride: 2,
                } => {
                    out.push(LayerSpec::Conv {
                        kernel: *kernel,
                        in_channels: *in_channels,
                        out_channels: *out_channels,
                        stride: 1,
                    });
                    out.push(LayerSpec::Downsample {
                        mode: DownsampleMode::DwtLL(w.clone()),
                    });
                }
                other => out.push(other.clone()),
            }
        }
        Ok(out)
    }

    /// Per-sample shapes before each layer and after the last one.
    pub fn trace_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shape = self.input.to_vec();
        if shape.contains(&0) {
            return Err(Error::InvalidConfig(format!("input shape {shape:?} has a zero dimension")));
        }
        let mut shapes = vec![shape.clone()];
        for (i, spec) in self.expanded_layers()?.iter().enumerate() {
            shape = spec_output_shape(spec, &shape).map_err(|e| Error::InvalidConfig(format!("layer {i} ({spec:?}): {e}")))?;
            shapes.push(shape.clone());
        }
        Ok(shapes)
    }
}

fn spec_output_shape(spec: &LayerSpec, shape: &[usize]) -> Result<Vec<usize>> {
    let chw = |shape: &[usize]| -> Result<(usize, usize, usize)> {
        match *shape {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::InvalidConfig(format!("expected a [C, H, W] feature map, got {shape:?}"))),
        }
    };
    match spec {
        LayerSpec::Conv {
            kernel,
            in_channels,
            out_channels,
            stride,
        } => {
            let (c, h, w) = chw(shape)?;
            if c != *in_channels {
                return Err(Error::InvalidConfig(format!("conv expects {in_channels} channels, got {c}")));
            }
            if kernel % 2 == 0 || *kernel == 0 || *stride == 0 || *out_channels == 0 {
                return Err(Error::InvalidConfig("conv needs an odd kernel and positive stride/channels".into()));
            }
            Ok(vec![*out_channels, (h - 1) / stride + 1, (w - 1) / stride + 1])
        }
        LayerSpec::BatchNorm { channels } => {
            let (c, _, _) = chw(shape)?;
            if c != *channels {
                return Err(Error::InvalidConfig(format!("batch norm expects {channels} channels, got {c}")));
            }
            Ok(shape.to_vec())
        }
        LayerSpec::Relu => Ok(shape.to_vec()),
        LayerSpec::Downsample { mode } => {
            let (c, h, w) = chw(shape)?;
            if h % 2 != 0 || w % 2 != 0 {
                return Err(Error::OddSpatial { h, w });
            }
            Ok(vec![c * mode.channel_factor(), h / 2, w / 2])
        }
        LayerSpec::Flatten => Ok(vec![shape.iter().product()]),
        LayerSpec::Dense {
            in_features,
            out_features,
        } => match *shape {
            [f] if f == *in_features && *out_features > 0 => Ok(vec![*out_features]),
            _ => Err(Error::InvalidConfig(format!("dense expects [{in_features}], got {shape:?}"))),
        },
    }
}
