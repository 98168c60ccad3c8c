use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use srelu_core::data::LabeledImageSet;
use srelu_core::nn::ArchId;

use crate::formats::{cifar, idx, Result, Split};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dataset {
    Mnist,
    Cifar10,
}

impl Dataset {
    pub fn name(self) -> &'static str {
        match self {
            Dataset::Mnist => "mnist",
            Dataset::Cifar10 => "cifar10",
        }
    }

    pub fn default_arch(self) -> ArchId {
        match self {
            Dataset::Mnist => ArchId::MnistCnn,
            Dataset::Cifar10 => ArchId::Cifar10Cnn1,
        }
    }

    pub fn default_epochs(self) -> usize {
        match self {
            Dataset::Mnist => 5,
            Dataset::Cifar10 => 30,
        }
    }

    /// `<root>/mnist` or `<root>/cifar10`.
    pub fn dir(self, root: &Path) -> PathBuf {
        root.join(self.name())
    }

    pub fn load(self, root: &Path, split: Split) -> Result<LabeledImageSet<f32>> {
        match self {
            Dataset::Mnist => idx::load_mnist(&self.dir(root), split),
            Dataset::Cifar10 => cifar::load_cifar10(&self.dir(root), split),
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace('-', "").as_str() {
            "mnist" => Ok(Dataset::Mnist),
            "cifar10" | "cifar" => Ok(Dataset::Cifar10),
            _ => Err(format!("unknown dataset {s:?} (expected mnist or cifar10)")),
        }
    }
}
