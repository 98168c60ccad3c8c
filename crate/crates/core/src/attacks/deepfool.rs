use alloc::vec;
use alloc::vec::Vec;

use super::{clamp, linf_distances, AdversarialBatch, ClipRange};
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::nn::{argmax_rows, Mode, Model};
use crate::tensor::{Scalar, Tensor};

/// DeepFool result at one iteration budget.
#[derive(Clone, Debug, PartialEq)]
pub struct DeepFoolOutput<T: Scalar = f32> {
    pub max_iters: usize,
    pub batch: AdversarialBatch<T>,
    /// Accumulated perturbation `r_tot` before overshoot and clipping.
    pub perturbation: Tensor<T>,
    /// Linearisation steps actually taken per image.
    pub iterations: Vec<usize>,
}

/// Logits plus `∂ logit_k / ∂x` for every class `k`, one tape forward and one
/// seeded backward per class.
fn class_gradients<T: Scalar>(model: &Model<T>, images: &Tensor<T>) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, false);
    let x = tape.leaf(images.clone(), true);
    let out = model.forward(&mut tape, &bound, x, Mode::Eval)?;
    let logits = tape.value(out.logits).clone();
    let (n, c) = (logits.shape()[0], logits.shape()[1]);
    let mut grads = Vec::with_capacity(c);
    for k in 0..c {
        let mut seed = Tensor::zeros([n, c]);
        for i in 0..n {
            seed.data_mut()[i * c + k] = T::one();
        }
        let mut g = tape.backward_seeded(out.logits, seed)?;
        grads.push(g.take(x).unwrap_or_else(|| Tensor::zeros(images.shape().to_vec())));
    }
    Ok((logits, grads))
}

/// Runs DeepFool once up to `max(budgets)` iterations and snapshots the state
/// after each budget. Per image, the snapshot at budget `k` is exactly what a
/// standalone run with `max_iters = k` produces.
pub(super) fn run<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    budgets: &[usize],
    overshoot: f64,
    clip: ClipRange,
) -> Result<Vec<DeepFoolOutput<T>>> {
    if budgets.contains(&0) {
        return Err(Error::invalid("steps", "DeepFool needs at least one iteration"));
    }
    if !(overshoot >= 0.0) {
        return Err(Error::invalid("overshoot", alloc::format!("{overshoot} (must be >= 0)")));
    }
    let n = images.batch_len();
    let d = images.item_len();
    let scale = T::one() + T::from_f64(overshoot);
    let (lo, hi) = (T::from_f64(clip.lo), T::from_f64(clip.hi));
    let original = model.predict_classes(images)?;

    let mut r_tot = Tensor::zeros(images.shape().to_vec());
    let mut iterations = vec![0usize; n];
    let mut active = vec![true; n];
    let mut outputs = Vec::with_capacity(budgets.len());
    let max_budget = budgets.iter().copied().max().unwrap_or(0);

    let snapshot = |r_tot: &Tensor<T>, iterations: &[usize], k: usize| -> Result<DeepFoolOutput<T>> {
        let adv = images.zip_map(r_tot, |x, r| clamp(x + scale * r, lo, hi))?;
        let preds = model.predict_classes(&adv)?;
        let success = preds.iter().zip(&original).map(|(p, o)| p != o).collect();
        Ok(DeepFoolOutput {
            max_iters: k,
            batch: AdversarialBatch { linf: linf_distances(&adv, images), images: adv, predictions: preds, success },
            perturbation: r_tot.clone(),
            iterations: iterations.to_vec(),
        })
    };

    for it in 1..=max_budget {
        let idx: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
        if !idx.is_empty() {
            // The iterate is unclipped while searching, as in the original method.
            let x0 = images.gather_batch(&idx)?;
            let r = r_tot.gather_batch(&idx)?;
            let current = x0.zip_map(&r, |x, r| x + scale * r)?;
            let (logits, grads) = class_gradients(model, &current)?;
            let c = logits.shape()[1];
            let preds = argmax_rows(&logits);
            for (row, &i) in idx.iter().enumerate() {
                let k0 = original[i];
                if preds[row] != k0 {
                    active[i] = false;
                    continue;
                }
                let l = &logits.data()[row * c..(row + 1) * c];
                let g0 = grads[k0].item_slice(row);
                let mut best: Option<(T, usize, T)> = None;
                for k in (0..c).filter(|&k| k != k0) {
                    let gk = grads[k].item_slice(row);
                    let w_norm = gk
                        .iter()
                        .zip(g0)
                        .fold(T::zero(), |s, (&a, &b)| s + (a - b) * (a - b))
                        .sqrt();
                    if w_norm == T::zero() {
                        continue;
                    }
                    let dist = (l[k] - l[k0]).abs() / w_norm;
                    if best.is_none_or(|(bd, _, _)| dist < bd) {
                        best = Some((dist, k, w_norm));
                    }
                }
                let Some((dist, k, w_norm)) = best else {
                    active[i] = false;
                    continue;
                };
                let gk = grads[k].item_slice(row);
                let coef = dist / w_norm;
                let r_row = r_tot.item_slice_mut(i);
                for j in 0..d {
                    r_row[j] = r_row[j] + coef * (gk[j] - g0[j]);
                }
                iterations[i] += 1;
            }
        }
        if budgets.contains(&it) {
            outputs.push((it, snapshot(&r_tot, &iterations, it)?));
        }
    }
    Ok(budgets
        .iter()
        .map(|b| outputs.iter().find(|(k, _)| k == b).expect("every budget is snapshotted").1.clone())
        .collect())
}

/// DeepFool (L2) with at most `max_iters` steps. Success means the
/// prediction left the clean prediction, so misclassified inputs count too.
pub fn deepfool<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    max_iters: usize,
    overshoot: f64,
) -> Result<AdversarialBatch<T>> {
    Ok(deepfool_detailed(model, images, max_iters, overshoot)?.batch)
}

/// [`deepfool`] plus the raw perturbation and per-image step counts.
pub fn deepfool_detailed<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    max_iters: usize,
    overshoot: f64,
) -> Result<DeepFoolOutput<T>> {
    let mut out = run(model, images, &[max_iters], overshoot, ClipRange::default())?;
    Ok(out.remove(0))
}

/// One DeepFool trajectory evaluated at several iteration budgets.
pub fn deepfool_schedule<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    budgets: &[usize],
    overshoot: f64,
) -> Result<Vec<DeepFoolOutput<T>>> {
    run(model, images, budgets, overshoot, ClipRange::default())
}
