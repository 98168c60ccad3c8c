use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{clamp, image_rng, linf_distances, AdversarialBatch, ClipRange};
use crate::autodiff::{Reduction, Tape};
use crate::error::{Error, Result};
use crate::nn::{Mode, Model};
use crate::tensor::{argmin, sign, Scalar, Tensor};

/// `∇ₓ Σᵢ CE(f(xᵢ), yᵢ)` in eval mode. Summing keeps each image's gradient
/// equal to the gradient of its own loss.
pub fn input_gradient<T: Scalar>(model: &Model<T>, images: &Tensor<T>, labels: &[usize]) -> Result<Tensor<T>> {
    if labels.len() != images.batch_len() {
        return Err(Error::shape("attack labels", alloc::format!("{} labels, {} images", labels.len(), images.batch_len())));
    }
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, false);
    let x = tape.leaf(images.clone(), true);
    let out = model.forward(&mut tape, &bound, x, Mode::Eval)?;
    let loss = tape.softmax_cross_entropy(out.logits, labels, Reduction::Sum)?;
    let mut grads = tape.backward(loss)?;
    Ok(grads.take(x).unwrap_or_else(|| Tensor::zeros(images.shape().to_vec())))
}

/// Eval-mode argmin of the logits per image.
pub fn least_likely_classes<T: Scalar>(model: &Model<T>, images: &Tensor<T>) -> Result<Vec<usize>> {
    let logits = model.logits(images, Mode::Eval)?;
    let c = logits.shape().get(1).copied().unwrap_or(1).max(1);
    Ok(logits.data().chunks(c).map(argmin).collect())
}

fn bounds<T: Scalar>(clip: ClipRange) -> (T, T) {
    (T::from_f64(clip.lo), T::from_f64(clip.hi))
}

/// `clip(x + dir·ε·sign(g))` elementwise.
fn sign_step<T: Scalar>(x: &Tensor<T>, g: &Tensor<T>, eps: T, clip: ClipRange) -> Result<Tensor<T>> {
    let (lo, hi) = bounds::<T>(clip);
    x.zip_map(g, |v, d| clamp(v + eps * sign(d), lo, hi))
}

fn finish<T: Scalar>(
    model: &Model<T>,
    original: &Tensor<T>,
    adversarial: Tensor<T>,
    success: impl Fn(usize, usize) -> bool,
) -> Result<AdversarialBatch<T>> {
    let preds = model.predict_classes(&adversarial)?;
    let success = preds.iter().enumerate().map(|(i, &p)| success(i, p)).collect();
    Ok(AdversarialBatch { linf: linf_distances(&adversarial, original), images: adversarial, predictions: preds, success })
}

pub(super) fn fgsm_clipped<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    labels: &[usize],
    eps: T,
    clip: ClipRange,
) -> Result<AdversarialBatch<T>> {
    let g = input_gradient(model, images, labels)?;
    let adv = sign_step(images, &g, eps, clip)?;
    finish(model, images, adv, |i, p| p != labels[i])
}

/// `clip₀₁(x + ε·sign(∇ₓ J(x, y)))`.
pub fn fgsm<T: Scalar>(model: &Model<T>, images: &Tensor<T>, labels: &[usize], eps: T) -> Result<AdversarialBatch<T>> {
    fgsm_clipped(model, images, labels, eps, ClipRange::default())
}

pub(super) fn targeted_clipped<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    targets: &[usize],
    eps: T,
    clip: ClipRange,
) -> Result<AdversarialBatch<T>> {
    let g = input_gradient(model, images, targets)?;
    let adv = sign_step(images, &g, -eps, clip)?;
    finish(model, images, adv, |i, p| p == targets[i])
}

/// `clip₀₁(x − ε·sign(∇ₓ J(x, t)))`; success means the prediction became `t`.
pub fn fgsm_targeted<T: Scalar>(model: &Model<T>, images: &Tensor<T>, target: usize, eps: T) -> Result<AdversarialBatch<T>> {
    let targets = alloc::vec![target; images.batch_len()];
    targeted_clipped(model, images, &targets, eps, ClipRange::default())
}

/// Targeted FGSM with one target per image.
pub fn fgsm_targeted_per_image<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    targets: &[usize],
    eps: T,
) -> Result<AdversarialBatch<T>> {
    targeted_clipped(model, images, targets, eps, ClipRange::default())
}

pub(super) fn stepll_clipped<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    labels: &[usize],
    eps: T,
    clip: ClipRange,
) -> Result<AdversarialBatch<T>> {
    let ll = least_likely_classes(model, images)?;
    let g = input_gradient(model, images, &ll)?;
    let adv = sign_step(images, &g, -eps, clip)?;
    finish(model, images, adv, |i, p| p != labels[i])
}

/// Targeted FGSM toward each image's least likely class; success is judged
/// against the true label.
pub fn stepll<T: Scalar>(model: &Model<T>, images: &Tensor<T>, labels: &[usize], eps: T) -> Result<AdversarialBatch<T>> {
    stepll_clipped(model, images, labels, eps, ClipRange::default())
}

/// Projected sign-gradient iterations. `random_start` carries the seed and
/// the batch's first global index.
pub(super) fn iterate<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    labels: &[usize],
    eps: T,
    steps: usize,
    step_size: T,
    random_start: Option<(u64, usize)>,
    clip: ClipRange,
) -> Result<AdversarialBatch<T>> {
    let (lo, hi) = bounds::<T>(clip);
    let mut x = images.clone();
    if let Some((seed, first)) = random_start {
        let two = T::from_f64(2.0);
        for i in 0..x.batch_len() {
            let mut rng = image_rng(seed, first + i);
            let orig = images.item_slice(i);
            for (v, &o) in x.item_slice_mut(i).iter_mut().zip(orig) {
                let u = T::from_f64(rng.random::<f64>());
                *v = clamp(o + eps * (two * u - T::one()), lo, hi);
            }
        }
    }
    for _ in 0..steps {
        let g = input_gradient(model, &x, labels)?;
        let data: Vec<T> = x
            .data()
            .iter()
            .zip(g.data())
            .zip(images.data())
            .map(|((&v, &d), &o)| {
                let stepped = clamp(v + step_size * sign(d), o - eps, o + eps);
                clamp(stepped, lo, hi)
            })
            .collect();
        x = Tensor::new(x.shape().to_vec(), data)?;
    }
    finish(model, images, x, |i, p| p != labels[i])
}

/// `steps` iterations of `x ← clip₀₁(proj_ε(x + step·sign(∇ₓ J)))` from `x`.
pub fn bim<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    labels: &[usize],
    eps: T,
    steps: usize,
    step_size: T,
) -> Result<AdversarialBatch<T>> {
    iterate(model, images, labels, eps, steps, step_size, None, ClipRange::default())
}

/// BIM from a uniform random point of the ε-ball, seeded per image by
/// `seed ^ (first_index + i)`.
pub fn pgd<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    labels: &[usize],
    eps: T,
    steps: usize,
    step_size: T,
    seed: u64,
    first_index: usize,
) -> Result<AdversarialBatch<T>> {
    iterate(model, images, labels, eps, steps, step_size, Some((seed, first_index)), ClipRange::default())
}

pub(super) fn rfgsm_clipped<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    labels: &[usize],
    eps: T,
    alpha: T,
    seed: u64,
    first_index: usize,
    clip: ClipRange,
) -> Result<AdversarialBatch<T>> {
    if !(alpha >= T::zero() && alpha <= eps) {
        return Err(Error::invalid("noise alpha", alloc::format!("{alpha} must lie in [0, ε = {eps}]")));
    }
    let (lo, hi) = bounds::<T>(clip);
    let mut start = images.clone();
    if alpha > T::zero() {
        for i in 0..start.batch_len() {
            let mut rng = image_rng(seed, first_index + i);
            for v in start.item_slice_mut(i) {
                let n: f64 = rng.sample(StandardNormal);
                *v = clamp(*v + alpha * sign(T::from_f64(n)), lo, hi);
            }
        }
    }
    let g = input_gradient(model, &start, labels)?;
    let rest = eps - alpha;
    let data: Vec<T> = start
        .data()
        .iter()
        .zip(g.data())
        .zip(images.data())
        .map(|((&v, &d), &o)| {
            clamp(clamp(v + rest * sign(d), lo, hi), o - eps, o + eps)
        })
        .collect();
    let adv = Tensor::new(images.shape().to_vec(), data)?;
    finish(model, images, adv, |i, p| p != labels[i])
}

/// A random sign step of `alpha`, then a gradient sign step of `ε − alpha`.
/// With `alpha = 0` this is exactly FGSM.
pub fn rfgsm<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    labels: &[usize],
    eps: T,
    alpha: T,
    seed: u64,
    first_index: usize,
) -> Result<AdversarialBatch<T>> {
    rfgsm_clipped(model, images, labels, eps, alpha, seed, first_index, ClipRange::default())
}
