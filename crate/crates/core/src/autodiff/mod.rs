//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operator call on a [`Tape`] evaluates eagerly, appends one node and
//! returns a [`Var`] handle. Nodes are stored in execution order, so the tape
//! is topologically sorted by construction and a single reverse sweep visits
//! every node once.
//!
//! ```
//! use srelu_core::autodiff::Tape;
//! use srelu_core::Tensor;
//!
//! let mut tape = Tape::<f64>::new();
//! let x = tape.leaf(Tensor::from_f64_slice([2], &[2.0, -2.0]).unwrap(), true);
//! let y = tape.srelu(x, 3.0).unwrap();
//! let loss = tape.sum(y).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[3.0, 0.0]);
//! ```

mod activation;
mod conv;
mod dense;
mod gradcheck;
mod loss;
mod pool;

pub use activation::ActivationKind;
pub use gradcheck::{finite_difference_oracle, max_relative_error};
pub use loss::{softmax_rows, Reduction};

use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

static NEXT_TAPE_ID: AtomicUsize = AtomicUsize::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: usize,
    index: usize,
}

impl Var {
    /// Position on the tape; later operations have larger indices.
    pub fn index(&self) -> usize {
        self.index
    }
}

pub(crate) enum Op<T: Scalar> {
    Leaf,
    Conv2d { input: Var, weight: Var, bias: Var, stride: usize },
    MaxPool2d { input: Var, argmax: Vec<usize> },
    Dense { input: Var, weight: Var, bias: Var },
    Flatten { input: Var },
    SRelu { input: Var, slope: T },
    Activation { input: Var, kind: ActivationKind },
    SoftmaxCrossEntropy { logits: Var, probs: Tensor<T>, labels: Vec<usize>, scale: T },
    SoftCrossEntropy { logits: Var, probs: Tensor<T>, targets: Tensor<T>, scale: T },
    Sum { input: Var },
}

pub(crate) struct Node<T: Scalar> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Execution record for one forward pass.
pub struct Tape<T: Scalar = f32> {
    id: usize,
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed), nodes: Vec::new() }
    }

    /// Records an input. Gradients are reported only for leaves created with
    /// `requires_grad`.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value behind `var`.
    ///
    /// Panics if `var` was created by another tape.
    pub fn value(&self, var: Var) -> &Tensor<T> {
        assert_eq!(var.tape, self.id, "variable does not belong to this tape");
        &self.nodes[var.index].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        var.tape == self.id && self.nodes[var.index].needs_grad
    }

    pub(crate) fn check(&self, var: Var) -> Result<&Node<T>> {
        if var.tape != self.id || var.index >= self.nodes.len() {
            return Err(Error::ForeignVar);
        }
        Ok(&self.nodes[var.index])
    }

    pub(crate) fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        let index = self.nodes.len();
        self.nodes.push(Node { value, op, needs_grad });
        Var { tape: self.id, index }
    }

    /// Reshapes `[N, ...]` to `[N, prod(...)]`.
    pub fn flatten(&mut self, input: Var) -> Result<Var> {
        let node = self.check(input)?;
        let x = &node.value;
        if x.rank() == 0 {
            return Err(Error::shape("flatten", "rank-0 input"));
        }
        let n = x.batch_len();
        let value = x.clone().reshape([n, x.item_len()])?;
        let needs = node.needs_grad;
        Ok(self.push(value, Op::Flatten { input }, needs))
    }

    /// Sum of all elements as a rank-0 tensor.
    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let node = self.check(input)?;
        let value = Tensor::scalar(node.value.sum());
        let needs = node.needs_grad;
        Ok(self.push(value, Op::Sum { input }, needs))
    }

    /// Gradients of a scalar `loss` with respect to every `requires_grad` leaf.
    pub fn backward(&self, loss: Var) -> Result<GradientMap<T>> {
        let node = self.check(loss)?;
        if node.value.len() != 1 {
            return Err(Error::NotScalar { shape: node.value.shape().to_vec() });
        }
        let seed = Tensor::full(node.value.shape().to_vec(), T::one());
        self.backward_seeded(loss, seed)
    }

    /// Vector-Jacobian product: propagates `seed` (same shape as `output`)
    /// back to the leaves.
    pub fn backward_seeded(&self, output: Var, seed: Tensor<T>) -> Result<GradientMap<T>> {
        let node = self.check(output)?;
        if node.value.shape() != seed.shape() {
            return Err(Error::shape(
                "backward",
                alloc::format!("seed {:?} vs output {:?}", seed.shape(), node.value.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; output.index + 1];
        if node.needs_grad {
            grads[output.index] = Some(seed);
        }
        for i in (0..=output.index).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                }
                Op::Conv2d { input, weight, bias, stride } => {
                    conv::backward(self, *input, *weight, *bias, *stride, &g, &mut grads)?
                }
                Op::MaxPool2d { input, argmax } => pool::backward(self, *input, argmax, &g, &mut grads),
                Op::Dense { input, weight, bias } => {
                    dense::backward(self, *input, *weight, *bias, &g, &mut grads)
                }
                Op::Flatten { input } => {
                    let shape = self.nodes[input.index].value.shape().to_vec();
                    accumulate(&mut grads[input.index], g.reshape(shape)?);
                }
                Op::SRelu { input, slope } => {
                    activation::srelu_backward(self, *input, *slope, &g, &mut grads)
                }
                Op::Activation { input, kind } => {
                    activation::backward(self, *input, *kind, &node.value, &g, &mut grads)
                }
                Op::SoftmaxCrossEntropy { logits, probs, labels, scale } => {
                    loss::ce_backward(*logits, probs, labels, *scale, &g, &mut grads)
                }
                Op::SoftCrossEntropy { logits, probs, targets, scale } => {
                    loss::soft_ce_backward(*logits, probs, targets, *scale, &g, &mut grads)
                }
                Op::Sum { input } => {
                    let x = &self.nodes[input.index].value;
                    let gv = g.data()[0];
                    accumulate(&mut grads[input.index], Tensor::full(x.shape().to_vec(), gv));
                }
            }
        }
        Ok(GradientMap { tape: self.id, grads })
    }

    /// Piecewise-linear region identifier of the recorded computation: for
    /// every ReLU-like site the sign class of each input, for every max-pool
    /// the chosen argmax. Two evaluations with equal patterns lie on the same
    /// linear piece, which is what finite-difference checks need to know.
    pub fn kink_pattern(&self) -> Vec<u32> {
        let mut out = Vec::new();
        let sign_class = |v: T| -> u32 {
            if v > T::zero() {
                2
            } else if v < T::zero() {
                0
            } else {
                1
            }
        };
        for node in &self.nodes {
            match &node.op {
                Op::SRelu { input, .. }
                | Op::Activation { input, kind: ActivationKind::LeakyRelu, .. } => {
                    out.extend(self.nodes[input.index].value.data().iter().map(|&v| sign_class(v)));
                }
                Op::MaxPool2d { argmax, .. } => out.extend(argmax.iter().map(|&a| a as u32)),
                _ => {}
            }
        }
        out
    }

    fn needs(&self, var: Var) -> bool {
        self.nodes[var.index].needs_grad
    }
}

pub(crate) fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) {
    match slot {
        Some(existing) => {
            for (a, b) in existing.data_mut().iter_mut().zip(g.data()) {
                *a = *a + *b;
            }
        }
        None => *slot = Some(g),
    }
}

/// Gradients produced by one reverse sweep, keyed by the leaf [`Var`].
/// Leaves that are not reachable from the output, or that were created
/// without `requires_grad`, have no entry.
pub struct GradientMap<T: Scalar = f32> {
    tape: usize,
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> GradientMap<T> {
    pub fn get(&self, var: Var) -> Option<&Tensor<T>> {
        if var.tape != self.tape {
            return None;
        }
        self.grads.get(var.index).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor<T>> {
        if var.tape != self.tape {
            return None;
        }
        self.grads.get_mut(var.index).and_then(|g| g.take())
    }

    /// Number of leaves with a gradient.
    pub fn len(&self) -> usize {
        self.grads.iter().filter(|g| g.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
