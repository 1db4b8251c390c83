use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{BatchNorm2d, Conv2d, Dense, Downsample, Flatten, Relu};
use super::{Layer, LayerSpec, ModelConfig, Param};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Anything that maps a `[N, C, H, W]` batch to one class index per sample.
pub trait Classifier<T: Scalar>: Sync {
    fn predict(&self, batch: &Tensor<T>) -> Result<Vec<usize>>;
}

/// Index of the largest logit; ties go to the lowest index.
pub(crate) fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub struct Model<T: Scalar> {
    config: ModelConfig,
    layers: Vec<Box<dyn Layer<T>>>,
}

impl<T: Scalar> std::fmt::Debug for Model<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("config", &self.config)
            .field("layers", &self.layers.iter().map(|l| l.kind()).collect::<Vec<_>>())
            .finish()
    }
}

impl<T: Scalar> Model<T> {
    /// Validates shapes and initialises every parameter from `config.seed`.
    pub fn build(config: &ModelConfig) -> Result<Self> {
        let shapes = config.trace_shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut layers: Vec<Box<dyn Layer<T>>> = Vec::new();
        for (spec, shape) in config.expanded_layers()?.into_iter().zip(&shapes) {
            let layer: Box<dyn Layer<T>> = match spec {
                LayerSpec::Conv {
                    kernel,
                    in_channels,
                    out_channels,
                    stride,
                } => Box::new(Conv2d::new(in_channels, out_channels, kernel, stride, &mut rng)),
                LayerSpec::BatchNorm { channels } => Box::new(BatchNorm2d::new(channels)),
                LayerSpec::Relu => Box::new(Relu::new()),
                LayerSpec::Downsample { mode } => Box::new(Downsample::new(mode, shape[0], &mut rng)?),
                LayerSpec::Flatten => Box::new(Flatten::new()),
                LayerSpec::Dense {
                    in_features,
                    out_features,
                } => Box::new(Dense::new(in_features, out_features, &mut rng)),
            };
            layers.push(layer);
        }
        if shapes.last().map(Vec::len) != Some(1) {
            return Err(Error::InvalidConfig("model must end in a [classes] vector".into()));
        }
        Ok(Self {
            config: config.clone(),
            layers,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn num_classes(&self) -> usize {
        self.config
            .trace_shapes()
            .ok()
            .and_then(|s| s.last().map(|v| v[0]))
            .unwrap_or(0)
    }

    pub fn layers(&self) -> &[Box<dyn Layer<T>>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Box<dyn Layer<T>>] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// FNV-1a over the little-endian bytes of every parameter and buffer.
    pub fn checksum(&self) -> u64 {
        let mut hash: u64 = 0xcbf29ce484222325;
        let mut bytes = Vec::new();
        for layer in &self.layers {
            for p in layer.params() {
                p.value.iter().for_each(|v| v.write_le(&mut bytes));
            }
            for b in layer.buffers() {
                b.iter().for_each(|v| v.write_le(&mut bytes));
            }
        }
        for byte in bytes {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
        hash
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let (_, c, h, w) = x.dims4()?;
        if [c, h, w] != self.config.input {
            return Err(Error::shape(format!(
                "model expects per-sample input {:?}, got {:?}",
                self.config.input,
                [c, h, w]
            )));
        }
        Ok(())
    }

    /// Evaluation-mode logits; does not touch any cached state.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.infer(&cur)?;
        }
        Ok(cur)
    }

    /// Training-mode logits, caching activations for [`Model::backward`].
    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    pub fn backward(&mut self, grad_logits: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = grad_logits.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }
}

impl<T: Scalar> Classifier<T> for Model<T> {
    fn predict(&self, batch: &Tensor<T>) -> Result<Vec<usize>> {
        let logits = self.infer(batch)?;
        let k = logits.shape()[1];
        Ok(logits.data().chunks(k).map(argmax).collect())
    }
}

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>)> {
    let (n, k) = match *logits.shape() {
        [n, k] => (n, k),
        _ => return Err(Error::shape(format!("logits must be [N, K], got {:?}", logits.shape()))),
    };
    if labels.len() != n {
        return Err(Error::shape(format!("{} labels for {n} samples", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::shape(format!("label {bad} out of range for {k} classes")));
    }
    let mut grad = Tensor::zeros(&[n, k]);
    let mut loss = 0.0;
    let inv_n = 1.0 / n as f64;
    for (i, (row, &label)) in logits.data().chunks(k).zip(labels).enumerate() {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.as_f64()));
        let exps: Vec<f64> = row.iter().map(|v| (v.as_f64() - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        loss += (sum.ln() + max - row[label].as_f64()) * inv_n;
        let g = &mut grad.data_mut()[i * k..(i + 1) * k];
        for (j, (gv, e)) in g.iter_mut().zip(&exps).enumerate() {
            let target = if j == label { 1.0 } else { 0.0 };
            *gv = T::of((e / sum - target) * inv_n);
        }
    }
    Ok((loss, grad))
}
