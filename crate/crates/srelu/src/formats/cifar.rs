//! CIFAR-10 binary batches: 3073-byte records of one label byte followed by
//! the red, green and blue 32×32 planes.

use std::path::Path;

use srelu_core::data::LabeledImageSet;
use srelu_core::Tensor;

use super::{read_file, to_byte, write_file, FormatError, Result, Split};

pub const SIDE: usize = 32;
pub const CHANNELS: usize = 3;
pub const IMAGE_BYTES: usize = CHANNELS * SIDE * SIDE;
pub const RECORD_BYTES: usize = IMAGE_BYTES + 1;

pub const TRAIN_FILES: [&str; 5] =
    ["data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin", "data_batch_5.bin"];
pub const TEST_FILE: &str = "test_batch.bin";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CifarBatch {
    pub labels: Vec<u8>,
    /// `count × 3072` bytes, channel-major per image.
    pub pixels: Vec<u8>,
}

impl CifarBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn parse_batch(bytes: &[u8]) -> Result<CifarBatch> {
    let what = "cifar10 batch";
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(FormatError::RecordLength { what: what.into(), len: bytes.len(), record: RECORD_BYTES });
    }
    let n = bytes.len() / RECORD_BYTES;
    let mut batch = CifarBatch { labels: Vec::with_capacity(n), pixels: Vec::with_capacity(n * IMAGE_BYTES) };
    for (index, rec) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        if rec[0] > 9 {
            return Err(FormatError::BadLabel { what: what.into(), label: rec[0], index });
        }
        batch.labels.push(rec[0]);
        batch.pixels.extend_from_slice(&rec[1..]);
    }
    Ok(batch)
}

pub fn encode_batch(batch: &CifarBatch) -> Vec<u8> {
    let mut out = Vec::with_capacity(batch.len() * RECORD_BYTES);
    for (label, img) in batch.labels.iter().zip(batch.pixels.chunks_exact(IMAGE_BYTES)) {
        out.push(*label);
        out.extend_from_slice(img);
    }
    out
}

pub fn to_set(name: &str, batch: &CifarBatch) -> Result<LabeledImageSet<f32>> {
    let data = batch.pixels.iter().map(|&p| p as f32 / 255.0).collect();
    let tensor = Tensor::new([batch.len(), CHANNELS, SIDE, SIDE], data)?;
    Ok(LabeledImageSet::new(name, tensor, batch.labels.iter().map(|&l| l as usize).collect())?)
}

pub fn from_set(set: &LabeledImageSet<f32>) -> Result<CifarBatch> {
    if set.image_shape() != [CHANNELS, SIDE, SIDE] {
        return Err(FormatError::Malformed {
            what: "cifar10 encode".into(),
            detail: format!("image shape {:?}", set.image_shape()),
        });
    }
    Ok(CifarBatch {
        labels: set.labels().iter().map(|&l| l as u8).collect(),
        pixels: set.images().data().iter().map(|&v| to_byte(v)).collect(),
    })
}

/// Loads the five training batches (in order) or the test batch.
pub fn load_cifar10(dir: &Path, split: Split) -> Result<LabeledImageSet<f32>> {
    let files: &[&str] = match split {
        Split::Train => &TRAIN_FILES,
        Split::Test => &[TEST_FILE],
    };
    let mut all = CifarBatch::default();
    for f in files {
        let b = parse_batch(&read_file(&dir.join(f))?)?;
        all.labels.extend(b.labels);
        all.pixels.extend(b.pixels);
    }
    to_set("cifar10", &all)
}

pub fn save_batch(path: &Path, set: &LabeledImageSet<f32>) -> Result<()> {
    write_file(path, &encode_batch(&from_set(set)?))
}
