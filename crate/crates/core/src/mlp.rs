//! Feedforward multilayer perceptron with hand-derived backpropagation.
//!
//! Layers compute `y = act(x Wᵀ + b)` with `W` stored out×in. The forward pass
//! records every layer output in a [`Tape`], which is all the backward pass
//! needs: the rectifier derivative is recovered from the sign of its output.
//! All reductions run sequentially in index order, so results do not depend
//! on how a batch is split.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{axpy, Matrix};
use crate::rng::{self, Prng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// out×in
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::Shape {
                context: "layer bias",
                expected_rows: 1,
                expected_cols: weights.rows(),
                rows: 1,
                cols: bias.len(),
            });
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("layer bias".into()));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            weights: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
            activation,
        }
    }

    /// Uniform in ±sqrt(6 / (fan_in + fan_out)), zero bias.
    pub fn glorot(inputs: usize, outputs: usize, activation: Activation, rng: &mut Prng) -> Self {
        let limit = libm::sqrt(6.0 / (inputs + outputs) as f64);
        let weights = Matrix::from_fn(outputs, inputs, |_, _| {
            (2.0 * rng::uniform01(rng) - 1.0) * limit
        });
        Self {
            weights,
            bias: vec![0.0; outputs],
            activation,
        }
    }

    #[inline]
    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }
}

/// The MLP parameters: a chain of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Activations recorded by [`Mlp::forward`] for use by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    input: Matrix,
    outputs: Vec<Matrix>,
}

impl Tape {
    pub fn input(&self) -> &Matrix {
        &self.input
    }

    /// Post-activation output of every layer, last one being the network output.
    pub fn layer_outputs(&self) -> &[Matrix] {
        &self.outputs
    }
}

/// Per-layer parameter gradients, shaped like the owning [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.outputs(), l.inputs()))
                .collect(),
            biases: mlp.layers.iter().map(|l| vec![0.0; l.outputs()]).collect(),
        }
    }

    /// Flattened in the same order as [`Mlp::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.as_slice().iter().chain(b.iter()).copied())
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|g| g == 0.0)
    }
}

impl Mlp {
    /// Validates that consecutive layers chain and all entries are finite.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("an MLP needs at least one layer".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::LayerShape {
                    layer: k + 1,
                    expected: pair[0].outputs(),
                    actual: pair[1].inputs(),
                });
            }
        }
        for l in &layers {
            if !l.weights.all_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::NonFinite("MLP parameters".into()));
            }
        }
        Ok(Self { layers })
    }

    /// Rectifier hidden layers and an identity output layer with Glorot-uniform weights.
    pub fn glorot(sizes: &[usize], rng: &mut Prng) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidArgument("need at least input and output sizes".into()));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let act = if k == last {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                Layer::glorot(w[0], w[1], act, rng)
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Weights then bias, layer by layer.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::InvalidArgument(alloc::format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let w = l.weights.as_mut_slice();
            w.copy_from_slice(&flat[offset..offset + w.len()]);
            offset += w.len();
            let n = l.bias.len();
            l.bias.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Mutable parameters in flat order.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.as_mut_slice().iter_mut().chain(l.bias.iter_mut()))
    }

    /// Visits every parameter together with its gradient, in flat order.
    pub fn for_each_param_mut(&mut self, grads: &Gradients, mut f: impl FnMut(&mut f64, f64)) {
        for (l, (gw, gb)) in self
            .layers
            .iter_mut()
            .zip(grads.weights.iter().zip(&grads.biases))
        {
            for (p, g) in l.weights.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                f(p, *g);
            }
            for (p, g) in l.bias.iter_mut().zip(gb) {
                f(p, *g);
            }
        }
    }

    /// Evaluates the network, keeping every layer output for the backward pass.
    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, Tape)> {
        let mut outputs: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.iter().enumerate() {
            let input = outputs.last().unwrap_or(batch);
            if input.cols() != layer.inputs() {
                return Err(Error::LayerShape {
                    layer: k,
                    expected: layer.inputs(),
                    actual: input.cols(),
                });
            }
            let out = dense_forward(layer, input);
            outputs.push(out);
        }
        let result = outputs.last().cloned().unwrap_or_else(|| batch.clone());
        Ok((
            result,
            Tape {
                input: batch.clone(),
                outputs,
            },
        ))
    }

    /// Output only, without keeping the tape.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        let mut current: Option<Matrix> = None;
        for (k, layer) in self.layers.iter().enumerate() {
            let input = current.as_ref().unwrap_or(batch);
            if input.cols() != layer.inputs() {
                return Err(Error::LayerShape {
                    layer: k,
                    expected: layer.inputs(),
                    actual: input.cols(),
                });
            }
            current = Some(dense_forward(layer, input));
        }
        Ok(current.unwrap_or_else(|| batch.clone()))
    }

    /// Backpropagates `upstream` (dLoss/dOutput) through the recorded tape.
    ///
    /// Returns parameter gradients and dLoss/dInput.
    pub fn backward(&self, tape: &Tape, upstream: &Matrix) -> Result<(Gradients, Matrix)> {
        if tape.outputs.len() != self.layers.len() {
            return Err(Error::InvalidArgument("tape does not match this network".into()));
        }
        let n = tape.input.rows();
        for (k, (layer, out)) in self.layers.iter().zip(&tape.outputs).enumerate() {
            if out.rows() != n || out.cols() != layer.outputs() {
                return Err(Error::LayerShape {
                    layer: k,
                    expected: layer.outputs(),
                    actual: out.cols(),
                });
            }
        }
        if tape.input.cols() != self.input_dim() {
            return Err(Error::LayerShape {
                layer: 0,
                expected: self.input_dim(),
                actual: tape.input.cols(),
            });
        }
        upstream.ensure_shape("mlp upstream gradient", n, self.output_dim())?;

        let mut grads = Gradients::zeros_like(self);
        let mut delta = upstream.clone();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let out = &tape.outputs[k];
            if layer.activation == Activation::Relu {
                for (d, y) in delta.as_mut_slice().iter_mut().zip(out.as_slice()) {
                    if *y <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = if k == 0 { &tape.input } else { &tape.outputs[k - 1] };
            let gw = &mut grads.weights[k];
            let gb = &mut grads.biases[k];
            let mut next = Matrix::zeros(n, layer.inputs());
            for i in 0..n {
                let d_row = delta.row(i);
                let x_row = input.row(i);
                for (o, &g) in d_row.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    gb[o] += g;
                    axpy(g, x_row, gw.row_mut(o));
                    axpy(g, layer.weights.row(o), next.row_mut(i));
                }
            }
            delta = next;
        }
        Ok((grads, delta))
    }
}

fn dense_forward(layer: &Layer, input: &Matrix) -> Matrix {
    // Transposed weights turn the inner loop into a contiguous axpy.
    let wt = layer.weights.transpose();
    let mut out = Matrix::zeros(input.rows(), layer.outputs());
    for i in 0..input.rows() {
        let y = out.row_mut(i);
        y.copy_from_slice(&layer.bias);
        for (k, &x) in input.row(i).iter().enumerate() {
            if x != 0.0 {
                axpy(x, wt.row(k), y);
            }
        }
        if layer.activation == Activation::Relu {
            for v in y.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }
    out
}
