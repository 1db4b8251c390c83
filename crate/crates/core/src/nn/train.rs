use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{softmax_cross_entropy, Classifier, Model};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Labelled image set, images `[N, C, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub images: Tensor<T>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(images: Tensor<T>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let (n, _, _, _) = images.dims4()?;
        if n != labels.len() {
            return Err(Error::shape(format!("{n} images but {} labels", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::shape(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(Self { images, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_shape(&self) -> [usize; 3] {
        let s = self.images.shape();
        [s[1], s[2], s[3]]
    }

    pub fn gather(&self, indices: &[usize]) -> (Tensor<T>, Vec<usize>) {
        (
            self.images.gather_batch(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let (images, labels) = self.gather(indices);
        Self {
            images,
            labels,
            classes: self.classes,
        }
    }

    /// Zero-pads every image symmetrically to `h × w` (extra row/column at the
    /// bottom/right when the difference is odd).
    pub fn pad_to(&self, h: usize, w: usize) -> Result<Self> {
        let (n, c, ih, iw) = self.images.dims4()?;
        if h < ih || w < iw {
            return Err(Error::shape(format!("cannot pad {ih}x{iw} images down to {h}x{w}")));
        }
        let (top, left) = ((h - ih) / 2, (w - iw) / 2);
        let mut out = Tensor::zeros(&[n, c, h, w]);
        for s in 0..n {
            for ch in 0..c {
                let src = self.images.plane(s, ch);
                let dst = out.plane_mut(s, ch);
                for y in 0..ih {
                    dst[(y + top) * w + left..(y + top) * w + left + iw].copy_from_slice(&src[y * iw..(y + 1) * iw]);
                }
            }
        }
        Dataset::new(out, self.labels.clone(), self.classes)
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            images: self.images.cast(),
            labels: self.labels.clone(),
            classes: self.classes,
        }
    }
}

/// SGD-with-momentum settings. The learning rate is multiplied by
/// `lr_decay` at each fraction of the run listed in `lr_milestones`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyper {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_milestones: Vec<f64>,
    pub lr_decay: f64,
    /// Seed of the per-epoch shuffle.
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: 32,
            epochs: 10,
            lr_milestones: vec![0.5, 0.75],
            lr_decay: 0.1,
            seed: 0,
        }
    }
}

impl Hyper {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let progress = epoch as f64 / self.epochs.max(1) as f64;
        let decays = self.lr_milestones.iter().filter(|&&m| progress >= m).count();
        self.lr * self.lr_decay.powi(decays as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub param_checksum: u64,
    pub wall_seconds: f64,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,lr,train_loss,val_loss,val_accuracy\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.10}")).unwrap_or_default();
        for e in &self.epochs {
            s.push_str(&format!(
                "{},{},{:.10},{},{}\n",
                e.epoch,
                e.lr,
                e.train_loss,
                opt(e.val_loss),
                opt(e.val_accuracy)
            ));
        }
        s
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.val_accuracy)
    }
}

fn validate(model: &Model<impl Scalar>, data: &Dataset<impl Scalar>) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidConfig("empty dataset".into()));
    }
    if data.sample_shape() != model.config().input {
        return Err(Error::shape(format!(
            "dataset samples are {:?}, model expects {:?}",
            data.sample_shape(),
            model.config().input
        )));
    }
    if data.classes > model.num_classes() {
        return Err(Error::shape(format!(
            "dataset has {} classes, model outputs {}",
            data.classes,
            model.num_classes()
        )));
    }
    Ok(())
}

/// Mean loss and accuracy in evaluation mode.
pub fn loss_and_accuracy<T: Scalar>(model: &Model<T>, data: &Dataset<T>, batch: usize) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for start in (0..data.len()).step_by(batch.max(1)) {
        let idx: Vec<usize> = (start..(start + batch).min(data.len())).collect();
        let (x, y) = data.gather(&idx);
        let logits = model.infer(&x)?;
        let (l, _) = softmax_cross_entropy(&logits, &y)?;
        loss += l * idx.len() as f64;
        let k = logits.shape()[1];
        correct += logits
            .data()
            .chunks(k)
            .zip(&y)
            .filter(|(row, &label)| super::model::argmax(row) == label)
            .count();
    }
    Ok((loss / data.len() as f64, correct as f64 / data.len() as f64))
}

pub fn train<T: Scalar>(model: &mut Model<T>, data: &Dataset<T>, val: Option<&Dataset<T>>, hyper: &Hyper) -> Result<TrainReport> {
    train_with_progress(model, data, val, hyper, |_| {})
}

/// Single-threaded and deterministic for a fixed model seed and `hyper.seed`.
pub fn train_with_progress<T: Scalar>(
    model: &mut Model<T>,
    data: &Dataset<T>,
    val: Option<&Dataset<T>>,
    hyper: &Hyper,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainReport> {
    validate(model, data)?;
    if let Some(v) = val {
        validate(model, v)?;
    }
    if hyper.batch_size == 0 || !(hyper.lr >= 0.0) {
        return Err(Error::InvalidConfig("batch size must be positive and lr non-negative".into()));
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut velocity: Vec<Vec<T>> = model.params().iter().map(|p| vec![T::zero(); p.value.len()]).collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport {
        epochs: Vec::new(),
        param_checksum: model.checksum(),
        wall_seconds: 0.0,
    };
    let mu = T::of(hyper.momentum);
    let wd = T::of(hyper.weight_decay);

    for epoch in 0..hyper.epochs {
        let lr = hyper.lr_at(epoch);
        let lr_t = T::of(lr);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(hyper.batch_size) {
            let (x, y) = data.gather(chunk);
            model.zero_grad();
            let logits = model.forward(&x)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &y)?;
            loss_sum += loss * chunk.len() as f64;
            model.backward(&grad)?;
            for (p, v) in model.params_mut().into_iter().zip(velocity.iter_mut()) {
                for ((w, &g), vel) in p.value.iter_mut().zip(&p.grad).zip(v.iter_mut()) {
                    *vel = mu * *vel + g + wd * *w;
                    *w -= lr_t * *vel;
                }
            }
        }
        let train_loss = loss_sum / data.len() as f64;
        let (val_loss, val_accuracy) = match val {
            Some(v) => {
                let (l, a) = loss_and_accuracy(model, v, 256)?;
                (Some(l), Some(a))
            }
            None => (None, None),
        };
        let stats = EpochStats {
            epoch: epoch + 1,
            lr,
            train_loss,
            val_loss,
            val_accuracy,
        };
        on_epoch(&stats);
        report.epochs.push(stats);
        report.param_checksum = model.checksum();
        report.wall_seconds = started.elapsed().as_secs_f64();
        if !train_loss.is_finite() {
            return Err(Error::DivergedLoss {
                epoch: epoch + 1,
                partial: Box::new(report),
            });
        }
    }
    Ok(report)
}

/// Top-1 error rate. With `threads > 1` the batches are sharded across scoped
/// threads; predictions are per-sample, so the result does not depend on it.
pub fn evaluate<T: Scalar, C: Classifier<T>>(model: &C, data: &Dataset<T>, threads: usize) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidConfig("empty dataset".into()));
    }
    let batch = 256;
    let starts: Vec<usize> = (0..data.len()).step_by(batch).collect();
    let count_wrong = |starts: &[usize]| -> Result<usize> {
        let mut wrong = 0;
        for &s in starts {
            let idx: Vec<usize> = (s..(s + batch).min(data.len())).collect();
            let (x, y) = data.gather(&idx);
            let pred = model.predict(&x)?;
            if pred.len() != y.len() {
                return Err(Error::shape("classifier returned the wrong number of predictions"));
            }
            wrong += pred.iter().zip(&y).filter(|(p, l)| p != l).count();
        }
        Ok(wrong)
    };
    let wrong = if threads <= 1 {
        count_wrong(&starts)?
    } else {
        let per = starts.len().div_ceil(threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = starts.chunks(per.max(1)).map(|part| scope.spawn(move || count_wrong(part))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("evaluation worker panicked"))
                .sum::<Result<usize>>()
        })?
    };
    Ok(wrong as f64 / data.len() as f64)
}
