use alloc::vec::Vec;

use crate::autodiff::{softmax_rows, Reduction, Tape};
use crate::data::{BatchOrder, LabeledImageSet};
use crate::error::{Error, Result};
use crate::nn::{argmax_rows, Mode, Model};
use crate::tensor::{Scalar, Tensor};

/// Minibatch SGD settings. Defaults: lr 0.01, momentum 0.9, batch 64,
/// 5 epochs, slope 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// SReLU slope used at every activation site during training.
    pub train_slope: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 5, lr: 0.01, momentum: 0.9, batch_size: 64, seed: 0, train_slope: 1.0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.momentum) || self.batch_size == 0 {
            return Err(Error::invalid(
                "training config",
                alloc::format!("lr {} momentum {} batch {}", self.lr, self.momentum, self.batch_size),
            ));
        }
        if !(self.train_slope > 0.0) {
            return Err(Error::invalid("train slope", alloc::format!("{} (must be > 0)", self.train_slope)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean minibatch loss over the epoch.
    pub loss: f64,
    /// Running accuracy on the training batches (train-mode forward).
    pub train_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

/// What a minibatch is fit against.
pub enum Targets<'a, T: Scalar> {
    Labels(&'a [usize]),
    /// Row-stochastic `N×C` soft labels.
    Soft(&'a Tensor<T>),
}

/// SGD with heavy-ball momentum: `v ← μ·v + g`, `p ← p − lr·v`.
#[derive(Clone, Debug)]
pub struct Sgd<T: Scalar = f32> {
    pub lr: T,
    pub momentum: T,
    velocity: Vec<Tensor<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(model: &Model<T>, lr: f64, momentum: f64) -> Self {
        Sgd {
            lr: T::from_f64(lr),
            momentum: T::from_f64(momentum),
            velocity: model.params().iter().map(|p| Tensor::zeros(p.value.shape().to_vec())).collect(),
        }
    }

    /// One update on a labelled batch; returns the batch loss before the update.
    pub fn step(&mut self, model: &mut Model<T>, images: &Tensor<T>, labels: &[usize]) -> Result<f64> {
        Ok(self.step_with(model, images, Targets::Labels(labels))?.0)
    }

    /// One update; returns the loss and the train-mode logits before the update.
    pub fn step_with(&mut self, model: &mut Model<T>, images: &Tensor<T>, targets: Targets<'_, T>) -> Result<(f64, Tensor<T>)> {
        let mut tape = Tape::new();
        let bound = model.bind(&mut tape, true);
        let x = tape.leaf(images.clone(), false);
        let out = model.forward(&mut tape, &bound, x, Mode::Train)?;
        let loss = match targets {
            Targets::Labels(l) => tape.softmax_cross_entropy(out.logits, l, Reduction::Mean)?,
            Targets::Soft(t) => tape.soft_cross_entropy(out.logits, t, Reduction::Mean)?,
        };
        let value = tape.value(loss).data()[0].as_f64();
        let logits = tape.value(out.logits).clone();
        let mut grads = tape.backward(loss)?;
        for ((param, var), v) in model.params_mut().iter_mut().zip(&bound).zip(&mut self.velocity) {
            let Some(g) = grads.take(*var) else { continue };
            for ((p, vel), &gi) in param.value.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
                *vel = self.momentum * *vel + gi;
                *p = *p - self.lr * *vel;
            }
        }
        Ok((value, logits))
    }
}

fn fit<T: Scalar>(
    mut model: Model<T>,
    set: &LabeledImageSet<T>,
    cfg: &TrainConfig,
    teacher: Option<&Model<T>>,
    progress: &mut dyn FnMut(&EpochStats, &Model<T>),
) -> Result<(Model<T>, TrainLog)> {
    cfg.validate()?;
    if set.is_empty() && cfg.epochs > 0 {
        return Err(Error::EmptySet);
    }
    model.slope.train_slope = cfg.train_slope;
    let mut opt = Sgd::new(&model, cfg.lr, cfg.momentum);
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let (mut loss_sum, mut batches, mut hits) = (0.0, 0usize, 0usize);
        for idx in set.batches(cfg.batch_size, BatchOrder::Shuffled { seed: cfg.seed, epoch: epoch as u64 }) {
            let (images, labels) = set.batch(&idx)?;
            let (loss, logits) = match teacher {
                Some(t) => {
                    let soft = softmax_rows(&t.logits(&images, Mode::Eval)?)?;
                    opt.step_with(&mut model, &images, Targets::Soft(&soft))?
                }
                None => opt.step_with(&mut model, &images, Targets::Labels(&labels))?,
            };
            if !loss.is_finite() {
                return Err(Error::invalid("training", alloc::format!("loss diverged in epoch {}", epoch + 1)));
            }
            hits += argmax_rows(&logits).iter().zip(&labels).filter(|(p, l)| p == l).count();
            loss_sum += loss;
            batches += 1;
        }
        let stats = EpochStats {
            epoch: epoch + 1,
            loss: loss_sum / batches.max(1) as f64,
            train_accuracy: hits as f64 / set.len().max(1) as f64,
        };
        progress(&stats, &model);
        log.epochs.push(stats);
    }
    Ok((model, log))
}

/// Trains a copy of `model` with cross-entropy against the labels. The batch
/// order is a function of `cfg.seed` and the epoch only.
pub fn train<T: Scalar>(
    model: &Model<T>,
    set: &LabeledImageSet<T>,
    cfg: &TrainConfig,
    progress: &mut dyn FnMut(&EpochStats),
) -> Result<(Model<T>, TrainLog)> {
    fit(model.clone(), set, cfg, None, &mut |s, _| progress(s))
}

/// Like [`train`], but `observe` also sees the model after every epoch.
pub fn train_observed<T: Scalar>(
    model: &Model<T>,
    set: &LabeledImageSet<T>,
    cfg: &TrainConfig,
    observe: &mut dyn FnMut(&EpochStats, &Model<T>),
) -> Result<(Model<T>, TrainLog)> {
    fit(model.clone(), set, cfg, None, observe)
}

/// Fresh model of `original`'s architecture (initialised from `cfg.seed`)
/// trained on the softmax of `original`'s slope-1 logits with soft-label
/// cross-entropy.
pub fn bpda_train_substitute<T: Scalar>(
    original: &Model<T>,
    set: &LabeledImageSet<T>,
    cfg: &TrainConfig,
    progress: &mut dyn FnMut(&EpochStats),
) -> Result<(Model<T>, TrainLog)> {
    let teacher = original.with_test_slope(1.0);
    let student = Model::build(original.spec().clone(), cfg.seed)?;
    let cfg = TrainConfig { train_slope: 1.0, ..*cfg };
    fit(student, set, &cfg, Some(&teacher), &mut |s, _| progress(s))
}
