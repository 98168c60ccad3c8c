use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Central-difference gradient estimate of a scalar function:
/// `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h` for every element `i`.
///
/// `f` must be deterministic. This never touches a tape, so it serves as an
/// independent oracle for [`super::Tape::backward`].
pub fn finite_difference_oracle<T, F>(mut f: F, x: &Tensor<T>, step: T) -> Result<Tensor<T>>
where
    T: Scalar,
    F: FnMut(&Tensor<T>) -> T,
{
    if !(step > T::zero()) {
        return Err(Error::invalid("step", alloc::format!("{step} (must be > 0)")));
    }
    let mut probe = x.clone();
    let two_h = step + step;
    let mut out = Tensor::zeros(x.shape().to_vec());
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + step;
        let up = f(&probe);
        probe.data_mut()[i] = orig - step;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (up - down) / two_h;
    }
    Ok(out)
}

/// `maxᵢ |aᵢ − bᵢ| / max(|aᵢ|, |bᵢ|, floor)`.
///
/// `floor` keeps entries that are zero in both inputs from dividing by zero;
/// gradient checks pass a small fraction of the gradient's overall scale.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "max_relative_error: length mismatch");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_at_three() {
        let x = Tensor::<f64>::from_f64_slice([1], &[3.0]).unwrap();
        let g = finite_difference_oracle(|t| t.data().iter().map(|v| v * v).sum(), &x, 1e-3).unwrap();
        assert!((g.data()[0] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn constant_and_linear_functions() {
        let x = Tensor::<f64>::from_fn([4], |i| i as f64 - 1.5);
        let g = finite_difference_oracle(|_| 7.0, &x, 0.1).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));

        let c = [0.5, -2.0, 3.0, 0.0];
        for step in [1e-4, 1e-2, 1.0] {
            let g = finite_difference_oracle(
                |t| t.data().iter().zip(&c).map(|(a, b)| a * b).sum(),
                &x,
                step,
            )
            .unwrap();
            for (v, w) in g.data().iter().zip(&c) {
                assert!((v - w).abs() < 1e-9, "step {step}: {v} vs {w}");
            }
        }
    }

    #[test]
    fn non_positive_step_rejected() {
        let x = Tensor::<f64>::zeros([1]);
        assert!(finite_difference_oracle(|_| 0.0, &x, 0.0).is_err());
    }

    #[test]
    fn relative_error_uses_floor() {
        assert_eq!(max_relative_error(&[0.0], &[0.0], 1e-6), 0.0);
        assert!((max_relative_error(&[1.0, 2.0], &[1.0, 2.2], 1e-6) - 0.2 / 2.2).abs() < 1e-12);
        assert!((max_relative_error(&[1e-9], &[0.0], 1e-3) - 1e-6).abs() < 1e-15);
    }
}
