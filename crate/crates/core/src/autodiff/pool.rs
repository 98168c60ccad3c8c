use alloc::vec::Vec;

use super::{accumulate, Op, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

impl<T: Scalar> Tape<T> {
    /// Max pooling over `window×window` cells of an `N×C×H×W` input.
    ///
    /// The reverse pass routes each output gradient to the first maximal
    /// element in row-major scan order of its window.
    pub fn maxpool2d(&mut self, input: Var, window: usize, stride: usize) -> Result<Var> {
        let node = self.check(input)?;
        let x = &node.value;
        let needs = node.needs_grad;
        if x.rank() != 4 {
            return Err(Error::shape("maxpool2d", alloc::format!("input must be NCHW, got {:?}", x.shape())));
        }
        let [n, c, h, w] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
        if window == 0 || stride == 0 {
            return Err(Error::shape("maxpool2d", "window and stride must be positive"));
        }
        if window > h || window > w {
            return Err(Error::shape(
                "maxpool2d",
                alloc::format!("window {window} larger than input {h}x{w}"),
            ));
        }
        let (oh, ow) = ((h - window) / stride + 1, (w - window) / stride + 1);
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        let data = x.data();
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + oy * stride * w + ox * stride;
                    for ky in 0..window {
                        for kx in 0..window {
                            let idx = base + (oy * stride + ky) * w + ox * stride + kx;
                            if data[idx] > data[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(data[best]);
                    argmax.push(best);
                }
            }
        }
        let value = Tensor::new([n, c, oh, ow], out)?;
        Ok(self.push(value, Op::MaxPool2d { input, argmax }, needs))
    }
}

pub(super) fn backward<T: Scalar>(
    tape: &Tape<T>,
    input: Var,
    argmax: &[usize],
    grad: &Tensor<T>,
    grads: &mut [Option<Tensor<T>>],
) {
    let x = &tape.nodes[input.index].value;
    let mut dx = Tensor::zeros(x.shape().to_vec());
    let d = dx.data_mut();
    for (&src, &g) in argmax.iter().zip(grad.data()) {
        d[src] = d[src] + g;
    }
    accumulate(&mut grads[input.index], dx);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_of_window_and_argmax_gradient() {
        let mut tape = Tape::<f32>::new();
        let x = tape.leaf(Tensor::new([1, 1, 2, 2], alloc::vec![1.0, 2.0, 3.0, 4.0]).unwrap(), true);
        let y = tape.maxpool2d(x, 2, 2).unwrap();
        assert_eq!(tape.value(y).data(), &[4.0]);
        let loss = tape.sum(y).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_input_and_first_index_ties() {
        let mut tape = Tape::<f32>::new();
        let x = tape.leaf(Tensor::full([1, 2, 4, 4], 0.25), true);
        let y = tape.maxpool2d(x, 2, 2).unwrap();
        assert!(tape.value(y).data().iter().all(|&v| v == 0.25));
        let loss = tape.sum(y).unwrap();
        let g = tape.backward(loss).unwrap();
        let gx = g.get(x).unwrap();
        // Every window's top-left cell receives the gradient.
        for plane in 0..2 {
            for r in 0..4 {
                for c in 0..4 {
                    let want = if r % 2 == 0 && c % 2 == 0 { 1.0 } else { 0.0 };
                    assert_eq!(gx.get(&[0, plane, r, c]).unwrap(), want);
                }
            }
        }
    }

    #[test]
    fn oversized_window_is_rejected() {
        let mut tape = Tape::<f32>::new();
        let x = tape.leaf(Tensor::zeros([1, 1, 2, 2]), false);
        assert!(matches!(tape.maxpool2d(x, 3, 1), Err(Error::Shape { .. })));
    }
}
