//! Core numerics for studying test-time ReLU slope as an adversarial defense.
//!
//! The crate is `no_std` (with `alloc`) and contains everything that is pure
//! computation:
//!
//! - [`tensor`]: dense row-major tensors generic over `f32` / `f64`.
//! - [`autodiff`]: a reverse-mode tape with the operators small CNNs need.
//! - [`nn`]: the three reference architectures, sloped-ReLU evaluation and
//!   parameter packing.
//! - [`data`]: labeled image sets, subsetting, pixel scaling and batching.
//! - [`attacks`]: FGSM and its iterative/targeted/randomized variants, PGD,
//!   DeepFool and two noise degradations.
//! - [`experiments`]: training, evaluation and the sweep drivers that turn
//!   all of the above into [`experiments::EvalRecord`] rows.
//!
//! File formats, the command line and threading live in the `srelu` crate.
#![no_std]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::too_many_arguments)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod attacks;
pub mod autodiff;
pub mod data;
mod error;
pub mod experiments;
pub mod linalg;
pub mod nn;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};
