use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArchId {
    MnistCnn,
    Cifar10Cnn1,
    Cifar10Cnn2,
    /// Hand-built specs (tests, toy models).
    Custom,
}

impl ArchId {
    pub fn name(self) -> &'static str {
        match self {
            ArchId::MnistCnn => "MNIST_CNN",
            ArchId::Cifar10Cnn1 => "CIFAR10_CNN1",
            ArchId::Cifar10Cnn2 => "CIFAR10_CNN2",
            ArchId::Custom => "CUSTOM",
        }
    }
}

impl fmt::Display for ArchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "mnist" | "mnist_cnn" => Ok(ArchId::MnistCnn),
            "cifar10_cnn1" | "cifar10" | "cnn1" => Ok(ArchId::Cifar10Cnn1),
            "cifar10_cnn2" | "cnn2" => Ok(ArchId::Cifar10Cnn2),
            _ => Err(Error::UnknownArchitecture(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Layer {
    Conv { name: String, in_channels: usize, out_channels: usize, kernel: usize, stride: usize },
    MaxPool { window: usize, stride: usize },
    /// An activation site: ReLU at train time, the configured test activation at eval.
    Act,
    /// Fully connected layer; flattens its input first.
    Dense { name: String, inputs: usize, outputs: usize },
}

impl Layer {
    pub fn conv(name: &str, in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Layer::Conv { name: name.to_string(), in_channels, out_channels, kernel, stride: 1 }
    }

    pub fn pool(window: usize) -> Self {
        Layer::MaxPool { window, stride: window }
    }

    pub fn dense(name: &str, inputs: usize, outputs: usize) -> Self {
        Layer::Dense { name: name.to_string(), inputs, outputs }
    }
}

/// Layer list plus the per-example input shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchitectureSpec {
    pub id: ArchId,
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl ArchitectureSpec {
    /// conv(1→10, 5×5) · pool 2 · act · conv(10→20, 5×5) · pool 2 · act ·
    /// fc 320→50 · act · fc 50→10.
    pub fn mnist_cnn() -> Self {
        ArchitectureSpec {
            id: ArchId::MnistCnn,
            input_shape: vec![1, 28, 28],
            layers: vec![
                Layer::conv("conv1", 1, 10, 5),
                Layer::pool(2),
                Layer::Act,
                Layer::conv("conv2", 10, 20, 5),
                Layer::pool(2),
                Layer::Act,
                Layer::dense("fc1", 320, 50),
                Layer::Act,
                Layer::dense("fc2", 50, 10),
            ],
        }
    }

    /// conv(3→6, 5×5) · act · pool · conv(6→16, 5×5) · act · pool ·
    /// fc 400→120 · act · fc 120→84 · act · fc 84→10.
    pub fn cifar10_cnn1() -> Self {
        ArchitectureSpec {
            id: ArchId::Cifar10Cnn1,
            input_shape: vec![3, 32, 32],
            layers: vec![
                Layer::conv("conv1", 3, 6, 5),
                Layer::Act,
                Layer::pool(2),
                Layer::conv("conv2", 6, 16, 5),
                Layer::Act,
                Layer::pool(2),
                Layer::dense("fc1", 400, 120),
                Layer::Act,
                Layer::dense("fc2", 120, 84),
                Layer::Act,
                Layer::dense("fc3", 84, 10),
            ],
        }
    }

    /// Same parameters as [`Self::cifar10_cnn1`], activation sites only after
    /// the first two dense layers.
    pub fn cifar10_cnn2() -> Self {
        let mut spec = Self::cifar10_cnn1();
        spec.id = ArchId::Cifar10Cnn2;
        let mut seen_dense = false;
        spec.layers.retain(|l| {
            if matches!(l, Layer::Dense { .. }) {
                seen_dense = true;
            }
            !(matches!(l, Layer::Act) && !seen_dense)
        });
        spec
    }

    pub fn custom(input_shape: Vec<usize>, layers: Vec<Layer>) -> Self {
        ArchitectureSpec { id: ArchId::Custom, input_shape, layers }
    }

    pub fn from_id(id: ArchId) -> Result<Self> {
        match id {
            ArchId::MnistCnn => Ok(Self::mnist_cnn()),
            ArchId::Cifar10Cnn1 => Ok(Self::cifar10_cnn1()),
            ArchId::Cifar10Cnn2 => Ok(Self::cifar10_cnn2()),
            ArchId::Custom => Err(Error::UnknownArchitecture("CUSTOM has no built-in layers".into())),
        }
    }

    /// Number of output classes (width of the last dense layer).
    pub fn classes(&self) -> usize {
        self.layers
            .iter()
            .rev()
            .find_map(|l| match l {
                Layer::Dense { outputs, .. } => Some(*outputs),
                Layer::Conv { out_channels, .. } => Some(*out_channels),
                _ => None,
            })
            .unwrap_or(0)
    }

    /// Width of the tensor entering the final dense layer.
    pub fn feature_width(&self) -> Option<usize> {
        self.layers.iter().rev().find_map(|l| match l {
            Layer::Dense { inputs, .. } => Some(*inputs),
            _ => None,
        })
    }

    /// Ordered `(name, shape)` of every parameter tensor. Also checks that
    /// consecutive layers agree on their extents.
    pub fn param_shapes(&self) -> Result<Vec<(String, Vec<usize>)>> {
        let mut shape = self.input_shape.clone();
        let mut out = Vec::new();
        let bad = |detail: String| Err(Error::shape("architecture", detail));
        for layer in &self.layers {
            match layer {
                Layer::Conv { name, in_channels, out_channels, kernel, stride } => {
                    if shape.len() != 3 || shape[0] != *in_channels {
                        return bad(alloc::format!("{name} expects {in_channels} channels, input is {shape:?}"));
                    }
                    if *kernel > shape[1] || *kernel > shape[2] || *stride == 0 {
                        return bad(alloc::format!("{name} kernel {kernel} does not fit {shape:?}"));
                    }
                    out.push((alloc::format!("{name}.weight"), vec![*out_channels, *in_channels, *kernel, *kernel]));
                    out.push((alloc::format!("{name}.bias"), vec![*out_channels]));
                    shape = vec![
                        *out_channels,
                        (shape[1] - kernel) / stride + 1,
                        (shape[2] - kernel) / stride + 1,
                    ];
                }
                Layer::MaxPool { window, stride } => {
                    if shape.len() != 3 || *window > shape[1] || *window > shape[2] || *stride == 0 {
                        return bad(alloc::format!("pool window {window} does not fit {shape:?}"));
                    }
                    shape = vec![shape[0], (shape[1] - window) / stride + 1, (shape[2] - window) / stride + 1];
                }
                Layer::Act => {}
                Layer::Dense { name, inputs, outputs } => {
                    let flat: usize = shape.iter().product();
                    if flat != *inputs {
                        return bad(alloc::format!("{name} expects {inputs} inputs, previous layer gives {flat}"));
                    }
                    out.push((alloc::format!("{name}.weight"), vec![*inputs, *outputs]));
                    out.push((alloc::format!("{name}.bias"), vec![*outputs]));
                    shape = vec![*outputs];
                }
            }
        }
        Ok(out)
    }

    /// Number of activation sites.
    pub fn activation_sites(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, Layer::Act)).count()
    }
}
