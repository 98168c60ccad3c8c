//! Reference CNNs whose activation sites switch from ReLU (training) to a
//! sloped ReLU or substitute nonlinearity (evaluation).

mod arch;
mod model;

pub use arch::{ArchId, ArchitectureSpec, Layer};
pub use model::{argmax_rows, ForwardVars, Mode, Model, Param, SlopeConfig, TestActivation};
