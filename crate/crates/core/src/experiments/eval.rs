use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::report::{EvalRecord, SweepUnits};
use crate::attacks::{deepfool_schedule, AttackConfig, AttackKind};
use crate::data::LabeledImageSet;
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::tensor::{Scalar, Tensor};

/// Images per forward/attack call. Chunks are cut by global index, so
/// results never depend on how cells are scheduled.
pub const DEFAULT_EVAL_BATCH: usize = 100;

/// Labels attached to every record of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalContext {
    pub dataset: String,
    pub seed: u64,
    pub batch_size: usize,
}

impl EvalContext {
    pub fn new(dataset: impl Into<String>, seed: u64) -> Self {
        EvalContext { dataset: dataset.into(), seed, batch_size: DEFAULT_EVAL_BATCH }
    }

    pub(crate) fn chunks(&self, n: usize) -> impl Iterator<Item = (usize, usize)> {
        let b = self.batch_size.max(1);
        (0..n).step_by(b).map(move |s| (s, (s + b).min(n)))
    }
}

pub(crate) fn predict_images<T: Scalar>(model: &Model<T>, images: &Tensor<T>, ctx: &EvalContext) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(images.batch_len());
    for (s, e) in ctx.chunks(images.batch_len()) {
        out.extend(model.predict_classes(&images.slice_batch(s, e)?)?);
    }
    Ok(out)
}

pub(crate) fn predictions<T: Scalar>(model: &Model<T>, set: &LabeledImageSet<T>, ctx: &EvalContext) -> Result<Vec<usize>> {
    predict_images(model, set.images(), ctx)
}

fn accuracy(preds: &[usize], labels: &[usize]) -> f64 {
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len().max(1) as f64
}

/// Fraction of correct eval-mode predictions at the model's test activation.
pub fn eval_clean<T: Scalar>(model: &Model<T>, set: &LabeledImageSet<T>, ctx: &EvalContext) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(accuracy(&predictions(model, set, ctx)?, set.labels()))
}

/// `(clean_acc, adv_acc, attack_success)`. Untargeted success is the share of
/// clean-correct images that end up wrong; targeted success is the share of
/// images not already predicted as the target that end up predicted as it.
pub(crate) fn rates(clean: &[usize], adv: &[usize], labels: &[usize], target: Option<usize>) -> (f64, f64, f64) {
    let ratio = |hit: usize, total: usize| if total == 0 { 0.0 } else { hit as f64 / total as f64 };
    let success = match target {
        Some(t) => {
            let eligible: Vec<usize> = (0..labels.len()).filter(|&i| clean[i] != t).collect();
            ratio(eligible.iter().filter(|&&i| adv[i] == t).count(), eligible.len())
        }
        None => {
            let eligible: Vec<usize> = (0..labels.len()).filter(|&i| clean[i] == labels[i]).collect();
            ratio(eligible.iter().filter(|&&i| adv[i] != labels[i]).count(), eligible.len())
        }
    };
    (accuracy(clean, labels), accuracy(adv, labels), success)
}

pub(crate) fn record<T: Scalar>(
    model: &Model<T>,
    ctx: &EvalContext,
    cfg: &AttackConfig,
    attack_name: &str,
    n_images: usize,
    (clean_acc, adv_acc, attack_success): (f64, f64, f64),
) -> EvalRecord {
    let units = if cfg.kind.sweeps_iterations() { SweepUnits::Iterations } else { SweepUnits::Epsilon };
    EvalRecord {
        dataset: ctx.dataset.clone(),
        model: model.spec().id.name().to_string(),
        activation: model.test_activation().name().to_string(),
        train_slope: model.slope.train_slope,
        test_slope: model.test_activation().slope(),
        attack: attack_name.to_string(),
        targeted: cfg.targeted(),
        target_class: cfg.target_class.filter(|_| cfg.targeted()),
        epsilon: cfg.sweep_value(),
        steps: cfg.steps,
        n_images,
        clean_acc,
        adv_acc,
        attack_success,
        seed: ctx.seed,
        units,
    }
}

/// Adversarial predictions for every image of `set`.
fn adversarial_predictions<T: Scalar>(
    model: &Model<T>,
    set: &LabeledImageSet<T>,
    cfg: &AttackConfig,
    ctx: &EvalContext,
    clean: &[usize],
) -> Result<Vec<usize>> {
    cfg.validate()?;
    // A zero budget leaves every image untouched.
    if !cfg.kind.sweeps_iterations() && cfg.epsilon == 0.0 {
        return Ok(clean.to_vec());
    }
    let mut out = Vec::with_capacity(set.len());
    for (s, e) in ctx.chunks(set.len()) {
        let images = set.images().slice_batch(s, e)?;
        out.extend(cfg.run(model, &images, &set.labels()[s..e], s)?.predictions);
    }
    Ok(out)
}

pub(crate) fn eval_with_clean<T: Scalar>(
    model: &Model<T>,
    set: &LabeledImageSet<T>,
    cfg: &AttackConfig,
    ctx: &EvalContext,
    clean: &[usize],
) -> Result<EvalRecord> {
    let adv = adversarial_predictions(model, set, cfg, ctx, clean)?;
    let target = cfg.target_class.filter(|_| cfg.targeted());
    Ok(record(model, ctx, cfg, cfg.kind.name(), set.len(), rates(clean, &adv, set.labels(), target)))
}

/// Attacks every image of `set` and scores the result.
pub fn eval_under_attack<T: Scalar>(
    model: &Model<T>,
    set: &LabeledImageSet<T>,
    cfg: &AttackConfig,
    ctx: &EvalContext,
) -> Result<EvalRecord> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let clean = predictions(model, set, ctx)?;
    eval_with_clean(model, set, cfg, ctx, &clean)
}

/// DeepFool records for several iteration budgets from one trajectory.
pub(crate) fn eval_deepfool<T: Scalar>(
    model: &Model<T>,
    set: &LabeledImageSet<T>,
    template: &AttackConfig,
    budgets: &[usize],
    ctx: &EvalContext,
    clean: &[usize],
) -> Result<Vec<EvalRecord>> {
    let mut adv: Vec<Vec<usize>> = alloc::vec![Vec::with_capacity(set.len()); budgets.len()];
    for (s, e) in ctx.chunks(set.len()) {
        let images = set.images().slice_batch(s, e)?;
        for (slot, out) in adv.iter_mut().zip(deepfool_schedule(model, &images, budgets, template.overshoot)?) {
            slot.extend(out.batch.predictions);
        }
    }
    Ok(budgets
        .iter()
        .zip(adv)
        .map(|(&k, preds)| {
            let cfg = AttackConfig { steps: k, kind: AttackKind::DeepFool, ..*template };
            record(model, ctx, &cfg, cfg.kind.name(), set.len(), rates(clean, &preds, set.labels(), None))
        })
        .collect())
}

/// `(label, eval-mode features entering the last dense layer)` per image.
pub fn feature_rows<T: Scalar>(
    model: &Model<T>,
    set: &LabeledImageSet<T>,
    ctx: &EvalContext,
) -> Result<Vec<(usize, Vec<T>)>> {
    let mut rows = Vec::with_capacity(set.len());
    for (s, e) in ctx.chunks(set.len()) {
        let f = model.penultimate_features(&set.images().slice_batch(s, e)?)?;
        for i in 0..(e - s) {
            rows.push((set.labels()[s + i], f.item_slice(i).to_vec()));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targeted_denominator_excludes_images_already_at_target() {
        let labels = [0, 1, 2, 3, 4];
        let clean = [3, 1, 3, 0, 4];
        let adv = [3, 3, 3, 3, 1];
        // Eligible: images 1, 3, 4; of those 1 and 3 reach class 3.
        let (_, _, s) = rates(&clean, &adv, &labels, Some(3));
        assert!((s - 2.0 / 3.0).abs() < 1e-12);
        let (_, _, none) = rates(&clean, &clean, &labels, Some(3));
        assert_eq!(none, 0.0);
    }

    #[test]
    fn untargeted_success_counts_flipped_correct_images() {
        let labels = [0, 1, 2, 3];
        let clean = [0, 1, 2, 0];
        let adv = [5, 1, 2, 3];
        let (c, a, s) = rates(&clean, &adv, &labels, None);
        assert_eq!((c, a), (0.75, 0.75));
        assert!((s - 1.0 / 3.0).abs() < 1e-12);
    }
}
