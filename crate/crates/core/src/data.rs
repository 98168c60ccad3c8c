//! Labeled image sets and deterministic batching.
//!
//! Pixels live in `[0, 1]` in every set produced by a parser. The only way to
//! leave that range is [`LabeledImageSet::scale_pixels`] without clipping,
//! which marks the result with [`LabeledImageSet::range_suspended`].

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub const NUM_CLASSES: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImageSet<T: Scalar = f32> {
    name: String,
    images: Tensor<T>,
    labels: Vec<usize>,
    range_suspended: bool,
}

impl<T: Scalar> LabeledImageSet<T> {
    /// `images` is `N×C×H×W` with values in `[0, 1]`; `labels` are in `[0, 10)`.
    pub fn new(name: impl Into<String>, images: Tensor<T>, labels: Vec<usize>) -> Result<Self> {
        if images.rank() < 2 || images.batch_len() != labels.len() {
            return Err(Error::shape(
                "image set",
                alloc::format!("{} labels for images {:?}", labels.len(), images.shape()),
            ));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
            return Err(Error::LabelOutOfRange { label, classes: NUM_CLASSES });
        }
        if let Some(v) = images.data().iter().find(|&&v| !(v >= T::zero() && v <= T::one())) {
            return Err(Error::invalid("pixel", alloc::format!("{v} outside [0, 1]")));
        }
        Ok(LabeledImageSet { name: name.into(), images, labels, range_suspended: false })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn images(&self) -> &Tensor<T> {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Per-image shape (`C×H×W`).
    pub fn image_shape(&self) -> &[usize] {
        &self.images.shape()[1..]
    }

    /// True when pixels may exceed `[0, 1]` (unclipped scaling).
    pub fn range_suspended(&self) -> bool {
        self.range_suspended
    }

    /// First `k` images in file order.
    pub fn take_first(&self, k: usize) -> Result<Self> {
        if k > self.len() {
            return Err(Error::invalid("subset size", alloc::format!("{k} > {} images", self.len())));
        }
        Ok(LabeledImageSet {
            name: self.name.clone(),
            images: self.images.slice_batch(0, k)?,
            labels: self.labels[..k].to_vec(),
            range_suspended: self.range_suspended,
        })
    }

    /// Images at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Ok(LabeledImageSet {
            name: self.name.clone(),
            images: self.images.gather_batch(indices)?,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            range_suspended: self.range_suspended,
        })
    }

    /// Multiplies every pixel by `factor`, then clips to `[0, 1]` iff `clip`.
    pub fn scale_pixels(&self, factor: f64, clip: bool) -> Result<Self> {
        if !(factor >= 0.0) || !factor.is_finite() {
            return Err(Error::invalid("scale factor", alloc::format!("{factor} (must be >= 0)")));
        }
        let f = T::from_f64(factor);
        let images = if clip {
            self.images.map(|v| (v * f).max(T::zero()).min(T::one()))
        } else {
            self.images.map(|v| v * f)
        };
        Ok(LabeledImageSet {
            name: self.name.clone(),
            images,
            labels: self.labels.clone(),
            range_suspended: self.range_suspended || !clip,
        })
    }

    pub fn batches(&self, batch_size: usize, order: BatchOrder) -> BatchIterator {
        BatchIterator::new(self.len(), batch_size, order)
    }

    /// Images and labels for a batch of indices from [`BatchIterator`].
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor<T>, Vec<usize>)> {
        Ok((self.images.gather_batch(indices)?, indices.iter().map(|&i| self.labels[i]).collect()))
    }

    pub fn cast<U: Scalar>(&self) -> LabeledImageSet<U> {
        LabeledImageSet {
            name: self.name.clone(),
            images: self.images.cast(),
            labels: self.labels.clone(),
            range_suspended: self.range_suspended,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchOrder {
    Sequential,
    /// A permutation determined by `(seed, epoch)`.
    Shuffled { seed: u64, epoch: u64 },
}

/// Yields index batches; the final batch may be short.
#[derive(Clone, Debug)]
pub struct BatchIterator {
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl BatchIterator {
    pub fn new(len: usize, batch_size: usize, order: BatchOrder) -> Self {
        let mut indices: Vec<usize> = (0..len).collect();
        if let BatchOrder::Shuffled { seed, epoch } = order {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(epoch);
            indices.shuffle(&mut rng);
        }
        BatchIterator { order: indices, batch_size: batch_size.max(1), pos: 0 }
    }

    /// Full visiting order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

impl Iterator for BatchIterator {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.order[self.pos..end].to_vec();
        self.pos = end;
        Some(batch)
    }
}
