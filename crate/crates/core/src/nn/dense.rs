use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Softmax,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Softmax => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Softmax),
            _ => None,
        }
    }

    fn apply(self, pre: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Identity => pre.clone(),
            Activation::Relu => pre.mapv(|v| v.max(0.0)),
            Activation::Softmax => {
                let mut out = pre.clone();
                for mut row in out.rows_mut() {
                    let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    row.mapv_inplace(|v| (v - max).exp());
                    let sum = row.sum();
                    row /= sum;
                }
                out
            }
        }
    }

    /// Pulls `grad_out` back through the activation.
    fn backward(self, pre: &Array2<f64>, out: &Array2<f64>, grad_out: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Identity => grad_out.clone(),
            Activation::Relu => {
                let mut g = grad_out.clone();
                g.zip_mut_with(pre, |g, &p| {
                    if p <= 0.0 {
                        *g = 0.0
                    }
                });
                g
            }
            Activation::Softmax => {
                let mut g = grad_out.clone();
                for (mut g_row, y_row) in g.rows_mut().into_iter().zip(out.rows()) {
                    let dot = g_row.dot(&y_row);
                    g_row.zip_mut_with(&y_row, |g, &y| *g = y * (*g - dot));
                }
                g
            }
        }
    }
}

/// Affine layer `activation(W x + b)` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        let a = (6.0 / (input + output) as f64).sqrt();
        let weight = Array2::from_shape_fn((output, input), |_| rng.random_range(-a..a));
        Dense {
            weight,
            bias: Array1::zeros(output),
            activation,
        }
    }

    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Dense {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    fn pre_activation(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_len("dense layer input", self.input_dim(), input.ncols())?;
        Ok(input.dot(&self.weight.t()) + &self.bias)
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.activation.apply(&self.pre_activation(input)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Values recorded during a forward pass. `activations[0]` is the input.
#[derive(Debug, Clone, Default)]
pub struct MlpTrace {
    pub activations: Vec<Array2<f64>>,
    pub pre: Vec<Array2<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> Option<&Array2<f64>> {
        if self.pre.is_empty() {
            None
        } else {
            self.activations.last()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<DenseGrads>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            layers: net
                .layers
                .iter()
                .map(|l| DenseGrads {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|g| {
                [
                    g.weight.as_slice().expect("standard layout"),
                    g.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

/// Stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// ReLU hidden layers of the given widths, then an output layer.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: &[usize], output: usize, output_activation: Activation, rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = input;
        for &h in hidden {
            layers.push(Dense::new(width, h, Activation::Relu, rng));
            width = h;
        }
        layers.push(Dense::new(width, output, output_activation, rng));
        Mlp { layers }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            check_len("layer chaining", w[0].output_dim(), w[1].input_dim())?;
        }
        Ok(Mlp { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty network").output_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn predict(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut x = self.layers[0].forward(input)?;
        for layer in &self.layers[1..] {
            x = layer.forward(x.view())?;
        }
        Ok(x)
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Result<MlpTrace> {
        let mut trace = MlpTrace {
            activations: Vec::with_capacity(self.layers.len() + 1),
            pre: Vec::with_capacity(self.layers.len()),
        };
        trace.activations.push(input.to_owned());
        for layer in &self.layers {
            let pre = layer.pre_activation(trace.activations.last().expect("input recorded").view())?;
            trace.activations.push(layer.activation.apply(&pre));
            trace.pre.push(pre);
        }
        Ok(trace)
    }

    /// Reverse pass. Returns parameter gradients and, if `input_grad`, the
    /// gradient with respect to the network input.
    pub fn backward(&self, trace: &MlpTrace, grad_out: &Array2<f64>, input_grad: bool) -> Result<(MlpGrads, Option<Array2<f64>>)> {
        if trace.pre.is_empty() {
            return Err(Error::BackwardWithoutForward);
        }
        check_len("trace depth", self.layers.len(), trace.pre.len())?;
        let out = &trace.activations[self.layers.len()];
        if out.shape() != grad_out.shape() {
            return Err(Error::Shape {
                context: "output gradient",
                expected: out.len(),
                actual: grad_out.len(),
            });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        let mut d_input = None;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let d_pre = layer.activation.backward(&trace.pre[l], &trace.activations[l + 1], &g);
            let input = &trace.activations[l];
            grads.push(DenseGrads {
                weight: standard(d_pre.t().dot(input)),
                bias: d_pre.sum_axis(Axis(0)),
            });
            if l > 0 {
                g = d_pre.dot(&layer.weight);
            } else if input_grad {
                d_input = Some(d_pre.dot(&layer.weight));
            }
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, d_input))
    }

    /// Weight and bias buffers, in the same order as [`MlpGrads::slices`].
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        check_len("flat parameters", self.parameter_count(), flat.len())?;
        let mut offset = 0;
        for s in self.param_slices_mut() {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        }
        Ok(())
    }
}
