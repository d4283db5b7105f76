//! Fully connected networks with hand-written backpropagation.
//!
//! Layers compute `Z = X W + b` on row-major batches (`W` is `in x out`).
//! Hidden layers use ReLU; the output layer is logistic for actors and
//! linear for critics.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Sigmoid => z.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp())),
            Activation::Identity => {}
        }
    }

    /// Multiplies `grad` by the derivative, given the activation's output.
    fn backprop(self, out: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Relu => grad.zip_mut_with(out, |g, &a| {
                if a <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Sigmoid => grad.zip_mut_with(out, |g, &a| *g *= a * (1.0 - a)),
            Activation::Identity => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Array2::zeros((inputs, outputs)),
            b: Array1::zeros(outputs),
        }
    }
}

/// Flattened parameters with their shape table: for each layer the weight
/// shape `[in, out]` then the bias shape `[out]`, values in the same order
/// with weights row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub shapes: Vec<Vec<usize>>,
    pub values: Vec<f64>,
}

impl ParamSet {
    pub fn count(&self) -> usize {
        self.values.len()
    }

    /// Parameter count implied by the shape table.
    pub fn shape_count(&self) -> usize {
        self.shapes.iter().map(|s| s.iter().product::<usize>()).sum()
    }

    pub fn same_shape(&self, other: &ParamSet) -> bool {
        self.shapes == other.shapes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub output: Activation,
}

/// Intermediate activations kept for the backward pass.
pub struct Trace {
    /// Input to each layer, then the network output.
    acts: Vec<Array2<f64>>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("trace holds the output")
    }
}

impl Mlp {
    /// Network with layer widths `sizes` (input first, output last).
    ///
    /// Weights start uniform in `±1/sqrt(fan_in)`; the output layer starts
    /// in `±final_scale` so fresh actors sit near the middle of their range
    /// and fresh critics near zero.
    pub fn new<R: Rng>(sizes: &[usize], output: Activation, final_scale: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "a network needs input and output widths");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
                let bound = if i + 1 == n { final_scale } else { 1.0 / (fan_in as f64).sqrt() };
                let mut d = Dense::zeros(fan_in, fan_out);
                d.w.mapv_inplace(|_| rng.random_range(-bound..=bound));
                d.b.mapv_inplace(|_| rng.random_range(-bound..=bound));
                d
            })
            .collect();
        Self { layers, output }
    }

    pub fn zeros(sizes: &[usize], output: Activation) -> Self {
        let layers = sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Self { layers, output }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().expect("non-empty").w.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<(), LearnError> {
        if x.ncols() != self.inputs() {
            return Err(LearnError::Shape {
                expected: self.inputs(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Forward pass that keeps what [`Mlp::backward`] needs.
    pub fn forward_trace(&self, x: ArrayView2<f64>) -> Result<Trace, LearnError> {
        self.check_input(&x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&layer.w);
            z += &layer.b;
            let act = if i == last { self.output } else { Activation::Relu };
            act.apply(&mut z);
            acts.push(z);
        }
        Ok(Trace { acts })
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, LearnError> {
        Ok(self.forward_trace(x)?.acts.pop().expect("output"))
    }

    /// Output for a single input vector.
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.forward(view)?.into_raw_vec_and_offset().0)
    }

    /// Gradients of a loss with respect to every parameter and to the
    /// input, given `d loss / d output` for the traced batch.
    pub fn backward(&self, trace: &Trace, grad_out: &Array2<f64>) -> (Vec<Dense>, Array2<f64>) {
        let last = self.layers.len() - 1;
        let mut grad = grad_out.clone();
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let act = if i == last { self.output } else { Activation::Relu };
            act.backprop(&trace.acts[i + 1], &mut grad);
            let input = &trace.acts[i];
            let w = input.t().dot(&grad);
            let b = grad.sum_axis(Axis(0));
            grad = grad.dot(&self.layers[i].w.t());
            grads.push(Dense { w, b });
        }
        grads.reverse();
        (grads, grad)
    }

    pub fn params(&self) -> ParamSet {
        let mut shapes = Vec::with_capacity(2 * self.layers.len());
        let mut values = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            shapes.push(vec![l.w.nrows(), l.w.ncols()]);
            shapes.push(vec![l.b.len()]);
            values.extend(l.w.iter());
            values.extend(l.b.iter());
        }
        ParamSet { shapes, values }
    }

    pub fn set_params(&mut self, p: &ParamSet) -> Result<(), LearnError> {
        let mine = self.params();
        if !mine.same_shape(p) || p.values.len() != mine.values.len() {
            return Err(LearnError::ParamShape);
        }
        let mut it = p.values.iter().copied();
        for l in &mut self.layers {
            l.w.iter_mut().for_each(|v| *v = it.next().expect("counted"));
            l.b.iter_mut().for_each(|v| *v = it.next().expect("counted"));
        }
        Ok(())
    }

    /// Builds a network from parameters, inferring the widths.
    pub fn from_params(p: &ParamSet, output: Activation) -> Result<Self, LearnError> {
        if p.shapes.is_empty() || !p.shapes.len().is_multiple_of(2) || p.shape_count() != p.values.len() {
            return Err(LearnError::ParamShape);
        }
        let mut sizes = Vec::new();
        for pair in p.shapes.chunks(2) {
            match (pair[0].as_slice(), pair[1].as_slice()) {
                (&[i, o], &[ob]) if o == ob && sizes.last().is_none_or(|&s| s == i) => {
                    if sizes.is_empty() {
                        sizes.push(i);
                    }
                    sizes.push(o);
                }
                _ => return Err(LearnError::ParamShape),
            }
        }
        let mut net = Self::zeros(&sizes, output);
        net.set_params(p)?;
        Ok(net)
    }

    /// `self <- tau * src + (1 - tau) * self`.
    pub fn soft_update(&mut self, src: &Mlp, tau: f64) {
        for (t, s) in self.layers.iter_mut().zip(&src.layers) {
            t.w.zip_mut_with(&s.w, |a, &b| *a = tau * b + (1.0 - tau) * *a);
            t.b.zip_mut_with(&s.b, |a, &b| *a = tau * b + (1.0 - tau) * *a);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }
}

/// Number of parameters of a network with layer widths `sizes`.
pub fn count_params(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}
