//! Central finite-difference checks of analytic backward passes.
//!
//! The error of one coordinate is `|analytic - numeric| / max(|analytic|,
//! |numeric|, floor)`; the floor keeps coordinates whose true derivative is
//! (nearly) zero from turning round-off into a large relative error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{softmax_cross_entropy, Model};
use super::Layer;
use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckConfig {
    pub epsilon: f64,
    pub floor: f64,
    /// Upper bound on checked coordinates per tensor (evenly strided); `None`
    /// checks all of them.
    pub max_coords: Option<usize>,
    /// Seed of the random cotangent used to scalarise layer outputs.
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            floor: 1e-3,
            max_coords: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub input_error: f64,
    pub param_error: f64,
    pub checked: usize,
}

impl GradcheckReport {
    pub fn max_error(&self) -> f64 {
        self.input_error.max(self.param_error)
    }
}

fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn coords(len: usize, max: Option<usize>) -> Vec<usize> {
    match max {
        Some(m) if m < len => {
            let stride = len.div_ceil(m);
            (0..len).step_by(stride).collect()
        }
        _ => (0..len).collect(),
    }
}

/// Checks `layer` on `input` using `loss = ⟨w, layer(x)⟩` with a random `w`.
/// The layer runs in training mode throughout.
pub fn gradcheck_layer(layer: &mut dyn Layer<f64>, input: &Tensor<f64>, cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let out_shape = layer.output_shape(input.shape())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let len: usize = out_shape.iter().product();
    let cot = Tensor::new(out_shape, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let loss = |layer: &mut dyn Layer<f64>, x: &Tensor<f64>| -> Result<f64> {
        let y = layer.forward(x)?;
        Ok(y.data().iter().zip(cot.data()).map(|(a, b)| a * b).sum())
    };

    for p in layer.params_mut() {
        p.zero_grad();
    }
    layer.forward(input)?;
    let grad_x = layer.backward(&cot)?;
    let param_grads: Vec<Vec<f64>> = layer.params().iter().map(|p| p.grad.clone()).collect();

    let h = cfg.epsilon;
    let mut report = GradcheckReport {
        input_error: 0.0,
        param_error: 0.0,
        checked: 0,
    };
    let mut x = input.clone();
    for i in coords(x.len(), cfg.max_coords) {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + h;
        let plus = loss(layer, &x)?;
        x.data_mut()[i] = orig - h;
        let minus = loss(layer, &x)?;
        x.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        report.input_error = report.input_error.max(rel_error(grad_x.data()[i], numeric, cfg.floor));
        report.checked += 1;
    }
    for (pi, analytic) in param_grads.iter().enumerate() {
        for i in coords(analytic.len(), cfg.max_coords) {
            let orig = layer.params()[pi].value[i];
            layer.params_mut()[pi].value[i] = orig + h;
            let plus = loss(layer, input)?;
            layer.params_mut()[pi].value[i] = orig - h;
            let minus = loss(layer, input)?;
            layer.params_mut()[pi].value[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            report.param_error = report.param_error.max(rel_error(analytic[i], numeric, cfg.floor));
            report.checked += 1;
        }
    }
    Ok(report)
}

/// Checks a whole model under mean softmax cross-entropy on `labels`.
pub fn gradcheck_model(model: &mut Model<f64>, input: &Tensor<f64>, labels: &[usize], cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let loss = |model: &mut Model<f64>, x: &Tensor<f64>| -> Result<f64> {
        let logits = model.forward(x)?;
        Ok(softmax_cross_entropy(&logits, labels)?.0)
    };
    model.zero_grad();
    let logits = model.forward(input)?;
    let (_, g) = softmax_cross_entropy(&logits, labels)?;
    let grad_x = model.backward(&g)?;
    let param_grads: Vec<Vec<f64>> = model.params().iter().map(|p| p.grad.clone()).collect();

    let h = cfg.epsilon;
    let mut report = GradcheckReport {
        input_error: 0.0,
        param_error: 0.0,
        checked: 0,
    };
    let mut x = input.clone();
    for i in coords(x.len(), cfg.max_coords) {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + h;
        let plus = loss(model, &x)?;
        x.data_mut()[i] = orig - h;
        let minus = loss(model, &x)?;
        x.data_mut()[i] = orig;
        report.input_error = report.input_error.max(rel_error(grad_x.data()[i], (plus - minus) / (2.0 * h), cfg.floor));
        report.checked += 1;
    }
    for (pi, analytic) in param_grads.iter().enumerate() {
        for i in coords(analytic.len(), cfg.max_coords) {
            let orig = model.params()[pi].value[i];
            model.params_mut()[pi].value[i] = orig + h;
            let plus = loss(model, input)?;
            model.params_mut()[pi].value[i] = orig - h;
            let minus = loss(model, input)?;
            model.params_mut()[pi].value[i] = orig;
            report.param_error = report.param_error.max(rel_error(analytic[i], (plus - minus) / (2.0 * h), cfg.floor));
            report.checked += 1;
        }
    }
    Ok(report)
}
