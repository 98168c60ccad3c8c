use alloc::vec;

use super::{accumulate, Op, Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::{matmul, Layout};
use crate::tensor::{Scalar, Tensor};

impl<T: Scalar> Tape<T> {
    /// Affine map `input (N×F) · weight (F×G) + bias (G)`.
    pub fn dense(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (x, w, b) = (self.check(input)?, self.check(weight)?, self.check(bias)?);
        let needs = x.needs_grad || w.needs_grad || b.needs_grad;
        let (x, w, b) = (&x.value, &w.value, &b.value);
        if x.rank() != 2 || w.rank() != 2 || x.shape()[1] != w.shape()[0] {
            return Err(Error::shape(
                "dense",
                alloc::format!("cannot multiply {:?} by {:?}", x.shape(), w.shape()),
            ));
        }
        let (n, f, g) = (x.shape()[0], w.shape()[0], w.shape()[1]);
        if b.shape() != [g] {
            return Err(Error::shape("dense", alloc::format!("bias {:?} for {g} outputs", b.shape())));
        }
        let mut out = vec![T::zero(); n * g];
        for row in out.chunks_mut(g.max(1)) {
            row.copy_from_slice(b.data());
        }
        matmul(n, f, g, x.data(), Layout::Normal, w.data(), Layout::Normal, &mut out, true);
        let value = Tensor::new([n, g], out)?;
        Ok(self.push(value, Op::Dense { input, weight, bias }, needs))
    }
}

pub(super) fn backward<T: Scalar>(
    tape: &Tape<T>,
    input: Var,
    weight: Var,
    bias: Var,
    grad: &Tensor<T>,
    grads: &mut [Option<Tensor<T>>],
) {
    let x = &tape.nodes[input.index].value;
    let w = &tape.nodes[weight.index].value;
    let (n, f, g) = (x.shape()[0], w.shape()[0], w.shape()[1]);
    if tape.needs(input) {
        let mut dx = vec![T::zero(); n * f];
        matmul(n, g, f, grad.data(), Layout::Normal, w.data(), Layout::Transposed, &mut dx, false);
        accumulate(&mut grads[input.index], Tensor::new([n, f], dx).expect("dense dx shape"));
    }
    if tape.needs(weight) {
        let mut dw = vec![T::zero(); f * g];
        matmul(f, n, g, x.data(), Layout::Transposed, grad.data(), Layout::Normal, &mut dw, false);
        accumulate(&mut grads[weight.index], Tensor::new([f, g], dw).expect("dense dw shape"));
    }
    if tape.needs(bias) {
        let mut db = vec![T::zero(); g];
        for row in grad.data().chunks(g) {
            for (a, &v) in db.iter_mut().zip(row) {
                *a = *a + v;
            }
        }
        accumulate(&mut grads[bias.index], Tensor::new([g], db).expect("dense db shape"));
    }
}
