use alloc::vec::Vec;

use super::{accumulate, Op, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// How per-row losses are combined into the scalar output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Reduction {
    #[default]
    Mean,
    /// Sum over rows: each row's gradient equals its own per-example gradient.
    Sum,
}

/// Row-wise softmax of an `N×C` tensor, stabilised by max subtraction.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    if logits.rank() != 2 || logits.shape()[1] == 0 {
        return Err(Error::shape("softmax", alloc::format!("expected N×C, got {:?}", logits.shape())));
    }
    let c = logits.shape()[1];
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks(c) {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let start = out.len();
        let mut total = T::zero();
        for &v in row {
            let e = (v - max).exp();
            total = total + e;
            out.push(e);
        }
        for p in &mut out[start..] {
            *p = *p / total;
        }
    }
    Tensor::new(logits.shape().to_vec(), out)
}

fn log_sum_exp<T: Scalar>(row: &[T]) -> T {
    let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    max + row.iter().fold(T::zero(), |s, &v| s + (v - max).exp()).ln()
}

fn reduction_scale<T: Scalar>(reduction: Reduction, rows: usize) -> T {
    match reduction {
        Reduction::Mean => T::one() / T::from_f64(rows as f64),
        Reduction::Sum => T::one(),
    }
}

impl<T: Scalar> Tape<T> {
    /// `−log softmax(logits)[label]` per row, reduced to a scalar.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize], reduction: Reduction) -> Result<Var> {
        let node = self.check(logits)?;
        let z = &node.value;
        if z.rank() != 2 || z.shape()[0] != labels.len() {
            return Err(Error::shape(
                "softmax_cross_entropy",
                alloc::format!("logits {:?} with {} labels", z.shape(), labels.len()),
            ));
        }
        if labels.is_empty() {
            return Err(Error::EmptySet);
        }
        let c = z.shape()[1];
        if let Some(&label) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::LabelOutOfRange { label, classes: c });
        }
        let scale = reduction_scale::<T>(reduction, labels.len());
        let total = z
            .data()
            .chunks(c)
            .zip(labels)
            .fold(T::zero(), |acc, (row, &y)| acc + (log_sum_exp(row) - row[y]));
        let probs = softmax_rows(z)?;
        let needs = node.needs_grad;
        let value = Tensor::scalar(total * scale);
        Ok(self.push(value, Op::SoftmaxCrossEntropy { logits, probs, labels: labels.to_vec(), scale }, needs))
    }

    /// `−Σ_j q_j log softmax(logits)_j` per row against target distributions `q`.
    pub fn soft_cross_entropy(&mut self, logits: Var, targets: &Tensor<T>, reduction: Reduction) -> Result<Var> {
        let node = self.check(logits)?;
        let z = &node.value;
        if z.rank() != 2 || z.shape() != targets.shape() {
            return Err(Error::shape(
                "soft_cross_entropy",
                alloc::format!("logits {:?} vs targets {:?}", z.shape(), targets.shape()),
            ));
        }
        let n = z.shape()[0];
        if n == 0 {
            return Err(Error::EmptySet);
        }
        let c = z.shape()[1];
        let scale = reduction_scale::<T>(reduction, n);
        let mut total = T::zero();
        for (row, q) in z.data().chunks(c).zip(targets.data().chunks(c)) {
            let lse = log_sum_exp(row);
            for (&v, &qj) in row.iter().zip(q) {
                if qj != T::zero() {
                    total = total + qj * (lse - v);
                }
            }
        }
        let probs = softmax_rows(z)?;
        let needs = node.needs_grad;
        let value = Tensor::scalar(total * scale);
        Ok(self.push(value, Op::SoftCrossEntropy { logits, probs, targets: targets.clone(), scale }, needs))
    }
}

pub(super) fn ce_backward<T: Scalar>(
    logits: Var,
    probs: &Tensor<T>,
    labels: &[usize],
    scale: T,
    grad: &Tensor<T>,
    grads: &mut [Option<Tensor<T>>],
) {
    let g = grad.data()[0] * scale;
    let c = probs.shape()[1];
    let mut d = probs.clone();
    for (row, &y) in d.data_mut().chunks_mut(c).zip(labels) {
        row[y] = row[y] - T::one();
        for v in row.iter_mut() {
            *v = *v * g;
        }
    }
    accumulate(&mut grads[logits.index], d);
}

pub(super) fn soft_ce_backward<T: Scalar>(
    logits: Var,
    probs: &Tensor<T>,
    targets: &Tensor<T>,
    scale: T,
    grad: &Tensor<T>,
    grads: &mut [Option<Tensor<T>>],
) {
    let g = grad.data()[0] * scale;
    let c = probs.shape()[1];
    let mut d = probs.clone();
    for (row, q) in d.data_mut().chunks_mut(c).zip(targets.data().chunks(c)) {
        // Σq need not be exactly 1 after rounding; use the exact adjoint.
        let mass = q.iter().fold(T::zero(), |s, &v| s + v);
        for (v, &qj) in row.iter_mut().zip(q) {
            *v = (*v * mass - qj) * g;
        }
    }
    accumulate(&mut grads[logits.index], d);
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn uniform_logits_give_ln_classes() {
        let mut tape = Tape::<f64>::new();
        let z = tape.leaf(Tensor::zeros([1, 2]), false);
        let l = tape.softmax_cross_entropy(z, &[0], Reduction::Mean).unwrap();
        assert!((tape.value(l).data()[0] - core::f64::consts::LN_2).abs() < 1e-15);
        let z10 = tape.leaf(Tensor::full([3, 10], 4.2), false);
        let l10 = tape.softmax_cross_entropy(z10, &[0, 5, 9], Reduction::Mean).unwrap();
        assert!((tape.value(l10).data()[0] - 10f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let mut tape = Tape::<f32>::new();
        let z = tape.leaf(Tensor::new([1, 2], vec![1000.0, 0.0]).unwrap(), true);
        let l = tape.softmax_cross_entropy(z, &[0], Reduction::Mean).unwrap();
        let v = tape.value(l).data()[0];
        assert!(v.is_finite() && v.abs() < 1e-6);
        let g = tape.backward(l).unwrap();
        assert!(g.get(z).unwrap().is_finite());
    }

    #[test]
    fn gradient_is_softmax_minus_onehot() {
        let mut tape = Tape::<f64>::new();
        let raw = [0.3, -1.2, 2.0, 0.0];
        let z = tape.leaf(Tensor::from_f64_slice([1, 4], &raw).unwrap(), true);
        let l = tape.softmax_cross_entropy(z, &[2], Reduction::Mean).unwrap();
        let g = tape.backward(l).unwrap();
        let total: f64 = raw.iter().map(|v| v.exp()).sum();
        for (j, &v) in g.get(z).unwrap().data().iter().enumerate() {
            let want = raw[j].exp() / total - if j == 2 { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-15);
        }
    }

    #[test]
    fn label_out_of_range() {
        let mut tape = Tape::<f32>::new();
        let z = tape.leaf(Tensor::zeros([2, 3]), false);
        assert_eq!(
            tape.softmax_cross_entropy(z, &[0, 3], Reduction::Mean).unwrap_err(),
            Error::LabelOutOfRange { label: 3, classes: 3 }
        );
    }

    #[test]
    fn soft_targets_reduce_to_hard_labels() {
        let mut tape = Tape::<f64>::new();
        let raw = Tensor::from_f64_slice([2, 3], &[0.5, 1.0, -0.5, 2.0, 0.0, 0.1]).unwrap();
        let z = tape.leaf(raw, true);
        let hard = tape.softmax_cross_entropy(z, &[1, 0], Reduction::Mean).unwrap();
        let onehot = Tensor::from_f64_slice([2, 3], &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let soft = tape.soft_cross_entropy(z, &onehot, Reduction::Mean).unwrap();
        assert!((tape.value(hard).data()[0] - tape.value(soft).data()[0]).abs() < 1e-15);
        let gh = tape.backward(hard).unwrap();
        let gs = tape.backward(soft).unwrap();
        for (a, b) in gh.get(z).unwrap().data().iter().zip(gs.get(z).unwrap().data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
