use alloc::vec;
use alloc::vec::Vec;

use super::{accumulate, Op, Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::{col2im, im2col, matmul, ConvGeometry, Layout};
use crate::tensor::{Scalar, Tensor};

fn geometry(input: &[usize], weight: &[usize], bias: &[usize], stride: usize) -> Result<ConvGeometry> {
    if input.len() != 4 {
        return Err(Error::shape("conv2d", alloc::format!("input must be NCHW, got {input:?}")));
    }
    if weight.len() != 4 {
        return Err(Error::shape("conv2d", alloc::format!("weights must be OIKhKw, got {weight:?}")));
    }
    if bias != [weight[0]] {
        return Err(Error::shape(
            "conv2d",
            alloc::format!("bias {bias:?} does not match {} output channels", weight[0]),
        ));
    }
    if input[1] != weight[1] {
        return Err(Error::shape(
            "conv2d",
            alloc::format!("input has {} channels, weights expect {}", input[1], weight[1]),
        ));
    }
    if stride == 0 {
        return Err(Error::shape("conv2d", "stride must be positive"));
    }
    if weight[2] > input[2] || weight[3] > input[3] || weight[2] == 0 || weight[3] == 0 {
        return Err(Error::shape(
            "conv2d",
            alloc::format!("kernel {}x{} does not fit input {}x{}", weight[2], weight[3], input[2], input[3]),
        ));
    }
    Ok(ConvGeometry {
        channels: input[1],
        height: input[2],
        width: input[3],
        kernel_h: weight[2],
        kernel_w: weight[3],
        stride,
    })
}

fn unroll<T: Scalar>(g: &ConvGeometry, x: &Tensor<T>) -> Vec<T> {
    let n = x.batch_len();
    let p = g.positions();
    let mut cols = vec![T::zero(); g.patch_len() * n * p];
    for i in 0..n {
        im2col(g, x.item_slice(i), &mut cols, n * p, i * p);
    }
    cols
}

impl<T: Scalar> Tape<T> {
    /// Valid (unpadded) 2-D cross-correlation of an `N×C×H×W` input with
    /// `O×C×Kh×Kw` weights plus per-channel bias. Output is
    /// `N×O×⌊(H−Kh)/s⌋+1×⌊(W−Kw)/s⌋+1`.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var, stride: usize) -> Result<Var> {
        let (x, w, b) = (self.check(input)?, self.check(weight)?, self.check(bias)?);
        let needs = x.needs_grad || w.needs_grad || b.needs_grad;
        let (x, w, b) = (&x.value, &w.value, &b.value);
        let g = geometry(x.shape(), w.shape(), b.shape(), stride)?;
        let (n, o, p) = (x.batch_len(), w.shape()[0], g.positions());
        let cols = unroll(&g, x);
        let mut tmp = vec![T::zero(); o * n * p];
        matmul(o, g.patch_len(), n * p, w.data(), Layout::Normal, &cols, Layout::Normal, &mut tmp, false);
        let mut out = Vec::with_capacity(n * o * p);
        for i in 0..n {
            for c in 0..o {
                let bias = b.data()[c];
                let src = &tmp[c * n * p + i * p..c * n * p + (i + 1) * p];
                out.extend(src.iter().map(|&v| v + bias));
            }
        }
        let value = Tensor::new([n, o, g.out_h(), g.out_w()], out)?;
        Ok(self.push(value, Op::Conv2d { input, weight, bias, stride }, needs))
    }
}

pub(super) fn backward<T: Scalar>(
    tape: &Tape<T>,
    input: Var,
    weight: Var,
    bias: Var,
    stride: usize,
    grad: &Tensor<T>,
    grads: &mut [Option<Tensor<T>>],
) -> Result<()> {
    let x = &tape.nodes[input.index].value;
    let w = &tape.nodes[weight.index].value;
    let b = &tape.nodes[bias.index].value;
    let g = geometry(x.shape(), w.shape(), b.shape(), stride)?;
    let (n, o, p, rows) = (x.batch_len(), w.shape()[0], g.positions(), g.patch_len());

    // O × (N·P) gather of the output gradient.
    let mut dy = vec![T::zero(); o * n * p];
    for i in 0..n {
        for c in 0..o {
            let src = &grad.data()[(i * o + c) * p..(i * o + c + 1) * p];
            dy[c * n * p + i * p..c * n * p + (i + 1) * p].copy_from_slice(src);
        }
    }

    if tape.needs(weight) {
        let cols = unroll(&g, x);
        let mut dw = vec![T::zero(); o * rows];
        matmul(o, n * p, rows, &dy, Layout::Normal, &cols, Layout::Transposed, &mut dw, false);
        accumulate(&mut grads[weight.index], Tensor::new(w.shape().to_vec(), dw)?);
    }
    if tape.needs(bias) {
        let db: Vec<T> = (0..o)
            .map(|c| dy[c * n * p..(c + 1) * n * p].iter().fold(T::zero(), |a, &v| a + v))
            .collect();
        accumulate(&mut grads[bias.index], Tensor::new([o], db)?);
    }
    if tape.needs(input) {
        let mut dcols = vec![T::zero(); rows * n * p];
        matmul(rows, o, n * p, w.data(), Layout::Transposed, &dy, Layout::Normal, &mut dcols, false);
        let mut dx = Tensor::zeros(x.shape().to_vec());
        for i in 0..n {
            col2im(&g, &dcols, n * p, i * p, dx.item_slice_mut(i));
        }
        accumulate(&mut grads[input.index], dx);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64_slice(shape.to_vec(), v).unwrap()
    }

    #[test]
    fn one_by_one_kernel_scales() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]), false);
        let w = tape.leaf(t(&[1, 1, 1, 1], &[2.0]), false);
        let b = tape.leaf(t(&[1], &[0.0]), false);
        let y = tape.conv2d(x, w, b, 1).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 1, 2, 2]);
        assert_eq!(tape.value(y).data(), &[2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn full_kernel_sums_window() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]), false);
        let w = tape.leaf(t(&[1, 1, 2, 2], &[1.0; 4]), false);
        let b = tape.leaf(t(&[1], &[0.0]), false);
        let y = tape.conv2d(x, w, b, 1).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 1, 1, 1]);
        assert_eq!(tape.value(y).data(), &[10.0]);
    }

    #[test]
    fn zero_kernel_gives_bias() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_fn([2, 3, 6, 5], |i| (i as f64).sin()), false);
        let w = tape.leaf(Tensor::zeros([4, 3, 3, 2]), false);
        let b = tape.leaf(t(&[4], &[0.5, -1.0, 2.0, 0.0]), false);
        let y = tape.conv2d(x, w, b, 2).unwrap();
        let v = tape.value(y);
        assert_eq!(v.shape(), &[2, 4, 2, 2]);
        for n in 0..2 {
            for c in 0..4 {
                for k in 0..4 {
                    assert_eq!(v.data()[(n * 4 + c) * 4 + k], [0.5, -1.0, 2.0, 0.0][c]);
                }
            }
        }
    }

    #[test]
    fn matches_direct_sum_with_stride() {
        let xs = Tensor::<f64>::from_fn([2, 2, 7, 6], |i| ((i * 7919) % 13) as f64 - 6.0);
        let ws = Tensor::<f64>::from_fn([3, 2, 3, 2], |i| ((i * 31) % 5) as f64 - 2.0);
        let bs = t(&[3], &[1.0, 0.0, -1.0]);
        let mut tape = Tape::new();
        let (x, w, b) = (tape.leaf(xs.clone(), false), tape.leaf(ws.clone(), false), tape.leaf(bs.clone(), false));
        let y = tape.conv2d(x, w, b, 2).unwrap();
        let v = tape.value(y);
        let (oh, ow) = ((7 - 3) / 2 + 1, (6 - 2) / 2 + 1);
        assert_eq!(v.shape(), &[2, 3, oh, ow]);
        for n in 0..2 {
            for o in 0..3 {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut s = bs.data()[o];
                        for c in 0..2 {
                            for ki in 0..3 {
                                for kj in 0..2 {
                                    s += xs.get(&[n, c, oy * 2 + ki, ox * 2 + kj]).unwrap()
                                        * ws.get(&[o, c, ki, kj]).unwrap();
                                }
                            }
                        }
                        assert_eq!(v.get(&[n, o, oy, ox]).unwrap(), s);
                    }
                }
            }
        }
    }

    #[test]
    fn shape_errors_are_descriptive() {
        let mut tape = Tape::<f32>::new();
        let x = tape.leaf(Tensor::zeros([1, 2, 4, 4]), false);
        let w = tape.leaf(Tensor::zeros([1, 3, 2, 2]), false);
        let b = tape.leaf(Tensor::zeros([1]), false);
        let err = tape.conv2d(x, w, b, 1).unwrap_err();
        assert!(alloc::format!("{err}").contains("channels"));
        let big = tape.leaf(Tensor::zeros([1, 2, 5, 5]), false);
        let b2 = tape.leaf(Tensor::zeros([1]), false);
        assert!(matches!(tape.conv2d(x, big, b2, 1), Err(Error::Shape { .. })));
    }
}
