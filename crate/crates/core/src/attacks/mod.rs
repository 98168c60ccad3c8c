//! Adversarial example generators.
//!
//! Gradient attacks differentiate the model exactly as configured: eval mode
//! at its test slope/activation. Every output is clipped into the
//! [`ClipRange`] (by default `[0, 1]`). Randomised attacks seed one ChaCha
//! stream per image from `rng_seed ^ global_image_index`, so splitting a set
//! into batches never changes the result.

mod deepfool;
mod gradient;
mod noise;

pub use deepfool::{deepfool, deepfool_detailed, deepfool_schedule, DeepFoolOutput};
pub use gradient::{
    bim, fgsm, fgsm_targeted, fgsm_targeted_per_image, input_gradient, least_likely_classes, pgd, rfgsm, stepll,
};
pub use noise::{gaussian_noise_attack, salt_pepper_attack};

use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackKind {
    Fgsm,
    FgsmTargeted,
    Bim,
    Rfgsm,
    StepLl,
    Pgd,
    DeepFool,
    GaussianNoise,
    SaltPepper,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Fgsm => "fgsm",
            AttackKind::FgsmTargeted => "fgsm_targeted",
            AttackKind::Bim => "bim",
            AttackKind::Rfgsm => "rfgsm",
            AttackKind::StepLl => "stepll",
            AttackKind::Pgd => "pgd",
            AttackKind::DeepFool => "deepfool",
            AttackKind::GaussianNoise => "gaussian_noise",
            AttackKind::SaltPepper => "salt_pepper",
        }
    }

    /// Kinds whose output is guaranteed within `ε` of the input in L∞.
    pub fn is_linf_bounded(self) -> bool {
        matches!(
            self,
            AttackKind::Fgsm
                | AttackKind::FgsmTargeted
                | AttackKind::Bim
                | AttackKind::Rfgsm
                | AttackKind::StepLl
                | AttackKind::Pgd
        )
    }

    /// Whether the sweep parameter is an iteration count instead of `ε`.
    pub fn sweeps_iterations(self) -> bool {
        self == AttackKind::DeepFool
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "fgsm" => AttackKind::Fgsm,
            "fgsm_targeted" | "targeted_fgsm" => AttackKind::FgsmTargeted,
            "bim" | "ifgsm" => AttackKind::Bim,
            "rfgsm" => AttackKind::Rfgsm,
            "stepll" | "step_ll" => AttackKind::StepLl,
            "pgd" | "pgd40" | "pgd_40" => AttackKind::Pgd,
            "deepfool" => AttackKind::DeepFool,
            "gaussian_noise" | "gaussian" | "noise" => AttackKind::GaussianNoise,
            "salt_pepper" | "saltpepper" | "salt_and_pepper" => AttackKind::SaltPepper,
            _ => return Err(Error::UnknownAttack(s.to_string())),
        })
    }
}

/// Valid pixel interval; attack outputs are clamped into it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClipRange {
    pub lo: f64,
    pub hi: f64,
}

impl Default for ClipRange {
    fn default() -> Self {
        ClipRange { lo: 0.0, hi: 1.0 }
    }
}

/// Attack kind plus all of its knobs. Constructors fill in the defaults used
/// by the sweeps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackConfig {
    pub kind: AttackKind,
    /// L∞ budget (gradient attacks), noise scale (Gaussian) or corrupted
    /// fraction (salt and pepper).
    pub epsilon: f64,
    /// Iterations (BIM/PGD) or maximum iterations (DeepFool).
    pub steps: usize,
    pub step_size: f64,
    pub target_class: Option<usize>,
    pub rng_seed: u64,
    /// DeepFool only.
    pub overshoot: f64,
    /// PGD only.
    pub random_start: bool,
    /// RFGSM only: size of the random sign step.
    pub noise_alpha: f64,
    pub clip: ClipRange,
}

impl AttackConfig {
    fn base(kind: AttackKind, epsilon: f64) -> Self {
        AttackConfig {
            kind,
            epsilon,
            steps: 1,
            step_size: epsilon,
            target_class: None,
            rng_seed: 0,
            overshoot: 0.02,
            random_start: false,
            noise_alpha: 0.0,
            clip: ClipRange::default(),
        }
    }

    pub fn fgsm(epsilon: f64) -> Self {
        Self::base(AttackKind::Fgsm, epsilon)
    }

    pub fn fgsm_targeted(epsilon: f64, target_class: usize) -> Self {
        AttackConfig { target_class: Some(target_class), ..Self::base(AttackKind::FgsmTargeted, epsilon) }
    }

    /// 10 steps of `ε/10`.
    pub fn bim(epsilon: f64) -> Self {
        AttackConfig { steps: 10, step_size: epsilon / 10.0, ..Self::base(AttackKind::Bim, epsilon) }
    }

    /// Random sign step of `ε/2`, then a gradient sign step of the rest.
    pub fn rfgsm(epsilon: f64) -> Self {
        AttackConfig { noise_alpha: epsilon / 2.0, ..Self::base(AttackKind::Rfgsm, epsilon) }
    }

    pub fn stepll(epsilon: f64) -> Self {
        Self::base(AttackKind::StepLl, epsilon)
    }

    /// 40 steps of `2.5·ε/40` from a uniform random start in the ε-ball.
    pub fn pgd(epsilon: f64) -> Self {
        AttackConfig {
            steps: 40,
            step_size: 2.5 * epsilon / 40.0,
            random_start: true,
            ..Self::base(AttackKind::Pgd, epsilon)
        }
    }

    pub fn deepfool(max_iters: usize) -> Self {
        AttackConfig { steps: max_iters, step_size: 0.0, ..Self::base(AttackKind::DeepFool, 0.0) }
    }

    pub fn gaussian_noise(epsilon: f64) -> Self {
        Self::base(AttackKind::GaussianNoise, epsilon)
    }

    pub fn salt_pepper(fraction: f64) -> Self {
        Self::base(AttackKind::SaltPepper, fraction)
    }

    /// Default configuration of `kind` at sweep value `value` (`ε`, or the
    /// iteration count for DeepFool).
    pub fn for_kind(kind: AttackKind, value: f64) -> Self {
        match kind {
            AttackKind::Fgsm => Self::fgsm(value),
            AttackKind::FgsmTargeted => Self::fgsm_targeted(value, 0),
            AttackKind::Bim => Self::bim(value),
            AttackKind::Rfgsm => Self::rfgsm(value),
            AttackKind::StepLl => Self::stepll(value),
            AttackKind::Pgd => Self::pgd(value),
            AttackKind::DeepFool => Self::deepfool(value as usize),
            AttackKind::GaussianNoise => Self::gaussian_noise(value),
            AttackKind::SaltPepper => Self::salt_pepper(value),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn targeted(&self) -> bool {
        self.kind == AttackKind::FgsmTargeted
    }

    /// Sweep coordinate: `ε`, or the iteration budget for DeepFool.
    pub fn sweep_value(&self) -> f64 {
        if self.kind.sweeps_iterations() {
            self.steps as f64
        } else {
            self.epsilon
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.kind.sweeps_iterations() && !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon", alloc::format!("{} outside [0, 1]", self.epsilon)));
        }
        if self.targeted() {
            match self.target_class {
                Some(c) if c < NUM_CLASSES => {}
                Some(c) => return Err(Error::LabelOutOfRange { label: c, classes: NUM_CLASSES }),
                None => return Err(Error::invalid("target class", "targeted attack without a target")),
            }
        }
        if matches!(self.kind, AttackKind::Bim | AttackKind::Pgd | AttackKind::DeepFool) && self.steps == 0 {
            return Err(Error::invalid("steps", "iterative attacks need at least one step"));
        }
        if self.kind == AttackKind::Rfgsm && !(self.noise_alpha >= 0.0 && self.noise_alpha <= self.epsilon) {
            return Err(Error::invalid(
                "noise alpha",
                alloc::format!("{} must lie in [0, ε = {}]", self.noise_alpha, self.epsilon),
            ));
        }
        if !(self.clip.lo < self.clip.hi) {
            return Err(Error::invalid("clip range", alloc::format!("[{}, {}]", self.clip.lo, self.clip.hi)));
        }
        Ok(())
    }

    /// Runs the attack on one batch. `labels` are true labels (ignored by
    /// targeted and DeepFool); `first_index` is the global index of the
    /// batch's first image, used for per-image seeding.
    pub fn run<T: Scalar>(
        &self,
        model: &Model<T>,
        images: &Tensor<T>,
        labels: &[usize],
        first_index: usize,
    ) -> Result<AdversarialBatch<T>> {
        self.validate()?;
        let eps = T::from_f64(self.epsilon);
        let clip = self.clip;
        match self.kind {
            AttackKind::Fgsm => gradient::fgsm_clipped(model, images, labels, eps, clip),
            AttackKind::FgsmTargeted => {
                let target = self.target_class.unwrap_or(0);
                let targets = alloc::vec![target; images.batch_len()];
                gradient::targeted_clipped(model, images, &targets, eps, clip)
            }
            AttackKind::Bim => {
                gradient::iterate(model, images, labels, eps, self.steps, T::from_f64(self.step_size), None, clip)
            }
            AttackKind::Rfgsm => gradient::rfgsm_clipped(
                model,
                images,
                labels,
                eps,
                T::from_f64(self.noise_alpha),
                self.rng_seed,
                first_index,
                clip,
            ),
            AttackKind::StepLl => gradient::stepll_clipped(model, images, labels, eps, clip),
            AttackKind::Pgd => gradient::iterate(
                model,
                images,
                labels,
                eps,
                self.steps,
                T::from_f64(self.step_size),
                self.random_start.then_some((self.rng_seed, first_index)),
                clip,
            ),
            AttackKind::DeepFool => {
                let out = deepfool::run(model, images, &[self.steps], self.overshoot, clip)?;
                Ok(out.into_iter().next().expect("one schedule entry").batch)
            }
            AttackKind::GaussianNoise => noise::gaussian(model, images, labels, eps, self.rng_seed, first_index, clip),
            AttackKind::SaltPepper => {
                noise::salt_pepper(model, images, labels, self.epsilon, self.rng_seed, first_index, clip)
            }
        }
    }
}

/// Attack output for one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct AdversarialBatch<T: Scalar = f32> {
    pub images: Tensor<T>,
    /// Per-image `max |x_adv − x|`.
    pub linf: Vec<T>,
    /// Eval-mode prediction on each adversarial image.
    pub predictions: Vec<usize>,
    /// Per image: untargeted kinds, prediction differs from the true label;
    /// targeted, prediction equals the target; DeepFool, prediction differs
    /// from the original prediction.
    pub success: Vec<bool>,
}

pub(crate) fn linf_distances<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Vec<T> {
    (0..a.batch_len())
        .map(|i| {
            a.item_slice(i)
                .iter()
                .zip(b.item_slice(i))
                .fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
        })
        .collect()
}

pub(crate) fn image_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index as u64)
}

#[inline]
pub(crate) fn clamp<T: Scalar>(v: T, lo: T, hi: T) -> T {
    v.max(lo).min(hi)
}
