//! MNIST IDX files (big-endian header, one byte per pixel or label).

use std::path::Path;

use srelu_core::data::LabeledImageSet;
use srelu_core::Tensor;

use super::{read_file, to_byte, write_file, FormatError, Result, Split};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| FormatError::Truncated { what: what.into(), expected: at + 4, found: bytes.len() })
}

fn check_len(bytes: &[u8], expected: usize, what: &str) -> Result<()> {
    if bytes.len() < expected {
        return Err(FormatError::Truncated { what: what.into(), expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(FormatError::TrailingBytes { what: what.into(), extra: bytes.len() - expected });
    }
    Ok(())
}

pub fn parse_images(bytes: &[u8]) -> Result<IdxImages> {
    let what = "idx images";
    let magic = be_u32(bytes, 0, what)?;
    if magic != IMAGES_MAGIC {
        return Err(FormatError::BadMagic { what: what.into(), found: magic, expected: IMAGES_MAGIC });
    }
    let count = be_u32(bytes, 4, what)? as usize;
    let rows = be_u32(bytes, 8, what)? as usize;
    let cols = be_u32(bytes, 12, what)? as usize;
    check_len(bytes, 16 + count * rows * cols, what)?;
    Ok(IdxImages { count, rows, cols, pixels: bytes[16..].to_vec() })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let what = "idx labels";
    let magic = be_u32(bytes, 0, what)?;
    if magic != LABELS_MAGIC {
        return Err(FormatError::BadMagic { what: what.into(), found: magic, expected: LABELS_MAGIC });
    }
    let count = be_u32(bytes, 4, what)? as usize;
    check_len(bytes, 8 + count, what)?;
    let labels = bytes[8..].to_vec();
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(FormatError::BadLabel { what: what.into(), label, index });
    }
    Ok(labels)
}

pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGES_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Pairs parsed images and labels into an `N×1×H×W` set with pixels `/255`.
pub fn to_set(name: &str, images: &IdxImages, labels: &[u8]) -> Result<LabeledImageSet<f32>> {
    if images.count != labels.len() {
        return Err(FormatError::CountMismatch { images: images.count, labels: labels.len() });
    }
    let data = images.pixels.iter().map(|&p| p as f32 / 255.0).collect();
    let tensor = Tensor::new([images.count, 1, images.rows, images.cols], data)?;
    Ok(LabeledImageSet::new(name, tensor, labels.iter().map(|&l| l as usize).collect())?)
}

/// Inverse of [`to_set`] for sets whose pixels are multiples of `1/255`.
pub fn from_set(set: &LabeledImageSet<f32>) -> Result<(IdxImages, Vec<u8>)> {
    let shape = set.images().shape();
    if shape.len() != 4 || shape[1] != 1 {
        return Err(FormatError::Malformed { what: "idx encode".into(), detail: format!("shape {shape:?}") });
    }
    let images = IdxImages {
        count: shape[0],
        rows: shape[2],
        cols: shape[3],
        pixels: set.images().data().iter().map(|&v| to_byte(v)).collect(),
    };
    Ok((images, set.labels().iter().map(|&l| l as u8).collect()))
}

fn file_names(split: Split) -> (&'static str, &'static str) {
    match split {
        Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    }
}

/// Loads a split from a directory holding the four uncompressed IDX files.
pub fn load_mnist(dir: &Path, split: Split) -> Result<LabeledImageSet<f32>> {
    let (img, lbl) = file_names(split);
    let images = parse_images(&read_file(&dir.join(img))?)?;
    let labels = parse_labels(&read_file(&dir.join(lbl))?)?;
    to_set("mnist", &images, &labels)
}

/// Writes a split in the layout [`load_mnist`] reads.
pub fn save_mnist(dir: &Path, split: Split, set: &LabeledImageSet<f32>) -> Result<()> {
    let (img, lbl) = file_names(split);
    let (images, labels) = from_set(set)?;
    write_file(&dir.join(img), &encode_images(&images))?;
    write_file(&dir.join(lbl), &encode_labels(&labels))
}
