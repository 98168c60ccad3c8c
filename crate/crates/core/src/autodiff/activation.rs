use core::fmt;
use core::str::FromStr;

use super::{accumulate, Op, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Slope of the negative branch of [`ActivationKind::LeakyRelu`].
pub const LEAKY_SLOPE: f64 = 0.01;
/// Scale of the negative branch of [`ActivationKind::Elu`].
pub const ELU_ALPHA: f64 = 1.0;

/// Fixed-shape elementwise nonlinearities used as substitutes for the
/// sloped ReLU.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActivationKind {
    Sigmoid,
    Tanh,
    LeakyRelu,
    Elu,
    Softplus,
    Identity,
}

impl ActivationKind {
    pub const SUBSTITUTES: [ActivationKind; 5] = [
        ActivationKind::Sigmoid,
        ActivationKind::Tanh,
        ActivationKind::LeakyRelu,
        ActivationKind::Elu,
        ActivationKind::Softplus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
            ActivationKind::LeakyRelu => "leaky_relu",
            ActivationKind::Elu => "elu",
            ActivationKind::Softplus => "softplus",
            ActivationKind::Identity => "identity",
        }
    }

    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::LeakyRelu => {
                if x > T::zero() {
                    x
                } else {
                    T::from_f64(LEAKY_SLOPE) * x
                }
            }
            ActivationKind::Elu => {
                if x > T::zero() {
                    x
                } else {
                    T::from_f64(ELU_ALPHA) * x.exp_m1()
                }
            }
            // max(x, 0) + ln(1 + e^{-|x|}) never overflows.
            ActivationKind::Softplus => x.max(T::zero()) + (-x.abs()).exp().ln_1p(),
            ActivationKind::Identity => x,
        }
    }

    /// d/dx given the input `x` and the forward output `y`.
    fn derivative<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            ActivationKind::Sigmoid => y * (T::one() - y),
            ActivationKind::Tanh => T::one() - y * y,
            ActivationKind::LeakyRelu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::from_f64(LEAKY_SLOPE)
                }
            }
            ActivationKind::Elu => {
                if x > T::zero() {
                    T::one()
                } else {
                    y + T::from_f64(ELU_ALPHA)
                }
            }
            ActivationKind::Softplus => sigmoid(x),
            ActivationKind::Identity => T::one(),
        }
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "sigmoid" => ActivationKind::Sigmoid,
            "tanh" => ActivationKind::Tanh,
            "leaky_relu" | "leakyrelu" => ActivationKind::LeakyRelu,
            "elu" => ActivationKind::Elu,
            "softplus" => ActivationKind::Softplus,
            "identity" | "linear" => ActivationKind::Identity,
            _ => return Err(Error::UnknownActivation(s.into())),
        })
    }
}

/// `slope · max(0, x)`, written so that it is bitwise equal to both
/// `slope · relu(x)` and `max(0, slope · x)` for `slope ≥ 0`.
#[inline]
pub fn srelu_scalar<T: Scalar>(x: T, slope: T) -> T {
    if x > T::zero() {
        slope * x
    } else {
        T::zero()
    }
}

impl<T: Scalar> Tape<T> {
    /// Sloped ReLU `α·max(0, x)`. The derivative at `x = 0` is taken as 0.
    pub fn srelu(&mut self, input: Var, slope: T) -> Result<Var> {
        if !(slope >= T::zero()) || !slope.is_finite() {
            return Err(Error::invalid("slope", alloc::format!("{slope} (must be finite and >= 0)")));
        }
        let node = self.check(input)?;
        let value = node.value.map(|x| srelu_scalar(x, slope));
        let needs = node.needs_grad;
        Ok(self.push(value, Op::SRelu { input, slope }, needs))
    }

    pub fn activation(&mut self, input: Var, kind: ActivationKind) -> Result<Var> {
        let node = self.check(input)?;
        let value = node.value.map(|x| kind.apply(x));
        let needs = node.needs_grad;
        Ok(self.push(value, Op::Activation { input, kind }, needs))
    }
}

pub(super) fn srelu_backward<T: Scalar>(
    tape: &Tape<T>,
    input: Var,
    slope: T,
    grad: &Tensor<T>,
    grads: &mut [Option<Tensor<T>>],
) {
    let x = &tape.nodes[input.index].value;
    let dx = x
        .zip_map(grad, |x, g| if x > T::zero() { slope * g } else { T::zero() })
        .expect("srelu grad shape");
    accumulate(&mut grads[input.index], dx);
}

pub(super) fn backward<T: Scalar>(
    tape: &Tape<T>,
    input: Var,
    kind: ActivationKind,
    output: &Tensor<T>,
    grad: &Tensor<T>,
    grads: &mut [Option<Tensor<T>>],
) {
    let x = &tape.nodes[input.index].value;
    let mut dx = Tensor::zeros(x.shape().to_vec());
    for (((d, &xv), &yv), &g) in dx.data_mut().iter_mut().zip(x.data()).zip(output.data()).zip(grad.data()) {
        *d = kind.derivative(xv, yv) * g;
    }
    accumulate(&mut grads[input.index], dx);
}
