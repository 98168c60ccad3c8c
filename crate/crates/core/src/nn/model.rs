use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::{ArchitectureSpec, Layer};
use crate::autodiff::{ActivationKind, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{argmax, Scalar, Tensor};

/// What every activation site computes at evaluation time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TestActivation {
    /// `α·max(0, x)`.
    SRelu(f64),
    Substitute(ActivationKind),
}

impl TestActivation {
    /// Label used in reports: `srelu` or the substitute's name.
    pub fn name(&self) -> &'static str {
        match self {
            TestActivation::SRelu(_) => "srelu",
            TestActivation::Substitute(k) => k.name(),
        }
    }

    /// Slope for SReLU, 1 for substitutes.
    pub fn slope(&self) -> f64 {
        match self {
            TestActivation::SRelu(a) => *a,
            TestActivation::Substitute(_) => 1.0,
        }
    }
}

impl fmt::Display for TestActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestActivation::SRelu(a) => write!(f, "srelu({a})"),
            TestActivation::Substitute(k) => f.write_str(k.name()),
        }
    }
}

/// Train-time slope (1 in the standard protocol) and the evaluation-time
/// activation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeConfig {
    pub train_slope: f64,
    pub test_activation: TestActivation,
}

impl Default for SlopeConfig {
    fn default() -> Self {
        SlopeConfig { train_slope: 1.0, test_activation: TestActivation::SRelu(1.0) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Activation sites apply `train_slope · max(0, x)`.
    Train,
    /// Activation sites apply the configured [`TestActivation`].
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T: Scalar> {
    pub name: String,
    pub value: Tensor<T>,
}

/// Handles produced by one recorded forward pass.
#[derive(Clone, Copy, Debug)]
pub struct ForwardVars {
    pub logits: Var,
    /// Tensor entering the final dense layer, if the architecture has one.
    pub features: Option<Var>,
}

/// Architecture, parameters and slope configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T: Scalar = f32> {
    spec: ArchitectureSpec,
    params: Vec<Param<T>>,
    pub slope: SlopeConfig,
}

impl<T: Scalar> Model<T> {
    /// Initialises every tensor uniformly in `±1/√fan_in` from a seeded
    /// stream, in declaration order. Biases share their weight's fan-in.
    pub fn build(spec: ArchitectureSpec, seed: u64) -> Result<Self> {
        let shapes = spec.param_shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(shapes.len());
        let mut fan_in = 1usize;
        for (name, shape) in shapes {
            if name.ends_with(".weight") {
                fan_in = if shape.len() == 4 { shape[1..].iter().product() } else { shape[0] };
            }
            let bound = 1.0 / num_traits::Float::sqrt(fan_in as f64);
            let value = Tensor::from_fn(shape, |_| T::from_f64(bound * (2.0 * rng.random::<f64>() - 1.0)));
            params.push(Param { name, value });
        }
        Ok(Model { spec, params, slope: SlopeConfig::default() })
    }

    /// Assembles a model from named tensors, which must match the spec's
    /// parameter list in order, names and shapes.
    pub fn from_params(spec: ArchitectureSpec, params: Vec<Param<T>>) -> Result<Self> {
        let shapes = spec.param_shapes()?;
        for ((name, shape), p) in shapes.iter().zip(&params) {
            if &p.name != name {
                return Err(Error::ParamMismatch {
                    tensor: p.name.clone(),
                    detail: alloc::format!("expected tensor `{name}` at this position"),
                });
            }
            if p.value.shape() != shape.as_slice() {
                return Err(Error::ParamMismatch {
                    tensor: p.name.clone(),
                    detail: alloc::format!("shape {:?}, architecture needs {:?}", p.value.shape(), shape),
                });
            }
        }
        if shapes.len() != params.len() {
            let missing = shapes
                .iter()
                .find(|(n, _)| !params.iter().any(|p| &p.name == n))
                .map(|(n, _)| n.clone())
                .or_else(|| params.get(shapes.len()).map(|p| p.name.clone()))
                .unwrap_or_default();
            return Err(Error::ParamMismatch {
                tensor: missing,
                detail: alloc::format!("expected {} tensors, got {}", shapes.len(), params.len()),
            });
        }
        Ok(Model { spec, params, slope: SlopeConfig::default() })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.params.iter_mut().find(|p| p.name == name).map(|p| &mut p.value)
    }

    /// Same model with another evaluation activation.
    pub fn with_test_activation(&self, activation: TestActivation) -> Self {
        let mut m = self.clone();
        m.slope.test_activation = activation;
        m
    }

    pub fn with_test_slope(&self, slope: f64) -> Self {
        self.with_test_activation(TestActivation::SRelu(slope))
    }

    pub fn test_activation(&self) -> TestActivation {
        self.slope.test_activation
    }

    /// Precision conversion (gradient checks run the same model in `f64`).
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            params: self.params.iter().map(|p| Param { name: p.name.clone(), value: p.value.cast() }).collect(),
            slope: self.slope,
        }
    }

    pub fn check_input(&self, batch: &Tensor<T>) -> Result<()> {
        if batch.rank() != self.spec.input_shape.len() + 1 || batch.shape()[1..] != self.spec.input_shape[..] {
            return Err(Error::shape(
                "model input",
                alloc::format!("expected [N, {:?}], got {:?}", self.spec.input_shape, batch.shape()),
            ));
        }
        Ok(())
    }

    /// Records every parameter as a leaf.
    pub fn bind(&self, tape: &mut Tape<T>, requires_grad: bool) -> Vec<Var> {
        self.params.iter().map(|p| tape.leaf(p.value.clone(), requires_grad)).collect()
    }

    /// Records a forward pass of `input` using parameters bound by [`Self::bind`].
    pub fn forward(&self, tape: &mut Tape<T>, bound: &[Var], input: Var, mode: Mode) -> Result<ForwardVars> {
        self.check_input(tape.value(input))?;
        if bound.len() != self.params.len() {
            return Err(Error::invalid("bound parameters", alloc::format!("{} of {}", bound.len(), self.params.len())));
        }
        let last_dense = self.spec.layers.iter().rposition(|l| matches!(l, Layer::Dense { .. }));
        let mut x = input;
        let mut features = None;
        let mut next_param = 0;
        for (i, layer) in self.spec.layers.iter().enumerate() {
            x = match layer {
                Layer::Conv { stride, .. } => {
                    let (w, b) = (bound[next_param], bound[next_param + 1]);
                    next_param += 2;
                    tape.conv2d(x, w, b, *stride)?
                }
                Layer::MaxPool { window, stride } => tape.maxpool2d(x, *window, *stride)?,
                Layer::Act => self.activate(tape, x, mode)?,
                Layer::Dense { .. } => {
                    let (w, b) = (bound[next_param], bound[next_param + 1]);
                    next_param += 2;
                    let flat = if tape.value(x).rank() == 2 { x } else { tape.flatten(x)? };
                    if Some(i) == last_dense {
                        features = Some(flat);
                    }
                    tape.dense(flat, w, b)?
                }
            };
        }
        let logits = if tape.value(x).rank() == 2 { x } else { tape.flatten(x)? };
        Ok(ForwardVars { logits, features })
    }

    fn activate(&self, tape: &mut Tape<T>, x: Var, mode: Mode) -> Result<Var> {
        match (mode, self.slope.test_activation) {
            (Mode::Train, _) => tape.srelu(x, T::from_f64(self.slope.train_slope)),
            (Mode::Eval, TestActivation::SRelu(a)) => tape.srelu(x, T::from_f64(a)),
            (Mode::Eval, TestActivation::Substitute(kind)) => tape.activation(x, kind),
        }
    }

    /// Logits without gradient tracking.
    pub fn logits(&self, batch: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let x = tape.leaf(batch.clone(), false);
        let out = self.forward(&mut tape, &bound, x, mode)?;
        Ok(tape.value(out.logits).clone())
    }

    /// Eval-mode argmax per image; ties go to the lowest class index.
    pub fn predict_classes(&self, batch: &Tensor<T>) -> Result<Vec<usize>> {
        let logits = self.logits(batch, Mode::Eval)?;
        Ok(argmax_rows(&logits))
    }

    /// Eval-mode activations entering the final dense layer.
    pub fn penultimate_features(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let x = tape.leaf(batch.clone(), false);
        let out = self.forward(&mut tape, &bound, x, Mode::Eval)?;
        let f = out
            .features
            .ok_or_else(|| Error::invalid("architecture", "no dense layer to take features from"))?;
        Ok(tape.value(f).clone())
    }
}

/// Row-wise argmax of an `N×C` tensor, lowest index on ties.
pub fn argmax_rows<T: Scalar>(logits: &Tensor<T>) -> Vec<usize> {
    let c = logits.shape().get(1).copied().unwrap_or(1).max(1);
    logits.data().chunks(c).map(argmax).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::arch::ArchId;
    use alloc::vec;

    fn image_batch(n: usize, seed: u64) -> Tensor<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn([n, 1, 28, 28], |_| rng.random::<f32>())
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = Model::<f32>::build(ArchitectureSpec::mnist_cnn(), 7).unwrap();
        let b = Model::<f32>::build(ArchitectureSpec::mnist_cnn(), 7).unwrap();
        let c = Model::<f32>::build(ArchitectureSpec::mnist_cnn(), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for p in a.params() {
            let fan_in: usize = if p.value.rank() == 4 { p.value.shape()[1..].iter().product() } else { 0 };
            if fan_in > 0 {
                let bound = 1.0 / (fan_in as f32).sqrt();
                assert!(p.value.data().iter().all(|v| v.abs() <= bound));
            }
        }
    }

    #[test]
    fn mnist_emits_ten_logits() {
        let m = Model::<f32>::build(ArchitectureSpec::mnist_cnn(), 1).unwrap();
        let z = m.logits(&image_batch(3, 0), Mode::Eval).unwrap();
        assert_eq!(z.shape(), &[3, 10]);
        assert_eq!(m.predict_classes(&image_batch(4, 1)).unwrap().len(), 4);
    }

    #[test]
    fn eval_at_unit_slope_equals_train_mode() {
        for spec in [ArchitectureSpec::mnist_cnn(), ArchitectureSpec::cifar10_cnn2()] {
            let m = Model::<f32>::build(spec.clone(), 3).unwrap();
            let mut shape = vec![5];
            shape.extend(&spec.input_shape);
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let x = Tensor::from_fn(shape, |_| rng.random::<f32>());
            assert_eq!(m.logits(&x, Mode::Eval).unwrap(), m.logits(&x, Mode::Train).unwrap());
            let raised = m.with_test_slope(10.0);
            assert_eq!(raised.logits(&x, Mode::Train).unwrap(), m.logits(&x, Mode::Train).unwrap());
            assert_ne!(raised.logits(&x, Mode::Eval).unwrap(), m.logits(&x, Mode::Eval).unwrap());
        }
    }

    #[test]
    fn one_site_toy_scales_linearly() {
        // dense(3→2) with non-negative weights, then one activation site.
        let spec = ArchitectureSpec::custom(vec![3], vec![Layer::dense("fc", 3, 2), Layer::Act]);
        let params = vec![
            Param { name: "fc.weight".into(), value: Tensor::from_f64_slice([3, 2], &[0.5, 1.0, 0.25, 0.0, 2.0, 0.75]).unwrap() },
            Param { name: "fc.bias".into(), value: Tensor::from_f64_slice([2], &[0.1, 0.2]).unwrap() },
        ];
        let m = Model::<f64>::from_params(spec, params).unwrap();
        let x = Tensor::from_f64_slice([2, 3], &[1.0, 0.5, 0.25, 0.0, 1.0, 2.0]).unwrap();
        let one = m.logits(&x, Mode::Eval).unwrap();
        let two = m.with_test_slope(2.0).logits(&x, Mode::Eval).unwrap();
        for (a, b) in one.data().iter().zip(two.data()) {
            assert_eq!(*b, 2.0 * a);
        }
    }

    #[test]
    fn features_have_documented_width_and_scale_with_slope() {
        let m = Model::<f32>::build(ArchitectureSpec::mnist_cnn(), 5).unwrap();
        let x = image_batch(2, 9);
        let f1 = m.penultimate_features(&x).unwrap();
        assert_eq!(f1.shape(), &[2, 50]);
        let f2 = m.with_test_slope(2.0).penultimate_features(&x).unwrap();
        let norm = |t: &Tensor<f32>| t.data().iter().map(|v| v * v).sum::<f32>();
        assert!(norm(&f2) > norm(&f1));
    }

    #[test]
    fn zero_image_features_come_from_biases() {
        let spec = ArchitectureSpec::custom(vec![4], vec![Layer::dense("fc1", 4, 3), Layer::Act, Layer::dense("fc2", 3, 2)]);
        let mut m = Model::<f64>::build(spec, 2).unwrap();
        *m.param_mut("fc1.bias").unwrap() = Tensor::from_f64_slice([3], &[0.5, -0.5, 1.5]).unwrap();
        let f = m.penultimate_features(&Tensor::zeros([1, 4])).unwrap();
        assert_eq!(f.data(), &[0.5, 0.0, 1.5]);
    }

    #[test]
    fn wrong_input_shape_and_params_rejected() {
        let m = Model::<f32>::build(ArchitectureSpec::mnist_cnn(), 1).unwrap();
        assert!(matches!(m.logits(&Tensor::zeros([1, 3, 32, 32]), Mode::Eval), Err(Error::Shape { .. })));

        let cifar = Model::<f32>::build(ArchitectureSpec::cifar10_cnn1(), 1).unwrap();
        let err = Model::from_params(ArchitectureSpec::mnist_cnn(), cifar.params().to_vec()).unwrap_err();
        match err {
            Error::ParamMismatch { tensor, .. } => assert_eq!(tensor, "conv1.weight"),
            e => panic!("unexpected {e:?}"),
        }
        assert_eq!(m.spec().id, ArchId::MnistCnn);
    }
}
