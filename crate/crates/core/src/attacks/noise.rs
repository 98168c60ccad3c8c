use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{clamp, image_rng, linf_distances, AdversarialBatch, ClipRange};
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::tensor::{Scalar, Tensor};

fn finish<T: Scalar>(
    model: &Model<T>,
    original: &Tensor<T>,
    noisy: Tensor<T>,
    labels: &[usize],
) -> Result<AdversarialBatch<T>> {
    if labels.len() != original.batch_len() {
        return Err(Error::shape("noise labels", alloc::format!("{} labels, {} images", labels.len(), original.batch_len())));
    }
    let preds = model.predict_classes(&noisy)?;
    let success = preds.iter().zip(labels).map(|(p, l)| p != l).collect();
    Ok(AdversarialBatch { linf: linf_distances(&noisy, original), images: noisy, predictions: preds, success })
}

pub(super) fn gaussian<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    labels: &[usize],
    eps: T,
    seed: u64,
    first_index: usize,
    clip: ClipRange,
) -> Result<AdversarialBatch<T>> {
    let (lo, hi) = (T::from_f64(clip.lo), T::from_f64(clip.hi));
    let mut noisy = images.clone();
    for i in 0..noisy.batch_len() {
        let mut rng = image_rng(seed, first_index + i);
        for v in noisy.item_slice_mut(i) {
            let n: f64 = rng.sample(StandardNormal);
            *v = clamp(*v + eps * T::from_f64(n), lo, hi);
        }
    }
    finish(model, images, noisy, labels)
}

/// `clip₀₁(x + ε·n)` with `n ~ N(0, I)`, seeded per image.
pub fn gaussian_noise_attack<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    labels: &[usize],
    eps: T,
    seed: u64,
    first_index: usize,
) -> Result<AdversarialBatch<T>> {
    gaussian(model, images, labels, eps, seed, first_index, ClipRange::default())
}

pub(super) fn salt_pepper<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    labels: &[usize],
    fraction: f64,
    seed: u64,
    first_index: usize,
    clip: ClipRange,
) -> Result<AdversarialBatch<T>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid("salt and pepper fraction", alloc::format!("{fraction} outside [0, 1]")));
    }
    let (lo, hi) = (T::from_f64(clip.lo), T::from_f64(clip.hi));
    let shape = images.shape();
    // Spatial positions; every channel of a chosen pixel is set together.
    let (channels, positions) = match shape.len() {
        4 => (shape[1], shape[2] * shape[3]),
        _ => (1, images.item_len()),
    };
    let count = num_traits::Float::floor(fraction * positions as f64) as usize;
    let mut noisy = images.clone();
    for i in 0..noisy.batch_len() {
        let mut rng = image_rng(seed, first_index + i);
        let chosen = index::sample(&mut rng, positions, count.min(positions));
        let item = noisy.item_slice_mut(i);
        for p in chosen.iter() {
            let value = if rng.random::<bool>() { hi } else { lo };
            for c in 0..channels {
                item[c * positions + p] = value;
            }
        }
    }
    finish(model, images, noisy, labels)
}

/// Sets `⌊fraction·H·W⌋` random pixels per image to 0 or 1 with equal odds.
pub fn salt_pepper_attack<T: Scalar>(
    model: &Model<T>,
    images: &Tensor<T>,
    labels: &[usize],
    fraction: f64,
    seed: u64,
    first_index: usize,
) -> Result<AdversarialBatch<T>> {
    salt_pepper(model, images, labels, fraction, seed, first_index, ClipRange::default())
}
