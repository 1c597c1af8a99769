use serde::{Deserialize, Serialize};

use super::matrix::{gemm, Matrix};
use crate::error::{invalid, Error, Result};
use crate::rng::Rng;

/// Fully-connected network: ReLU on hidden layers, identity on the output.
///
/// `weights[k]` is `layer_dims[k+1] × layer_dims[k]` (row-major, one row per
/// output unit); `biases[k]` has `layer_dims[k+1]` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layer_dims: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

/// Parameter-shaped gradient (also used for optimizer moments).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

/// Activations cached by [`Network::forward_pass`] for a later backward sweep.
/// `activations[0]` is the input, the last entry is the network output.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    activations: Vec<Matrix>,
}

impl ForwardPass {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("forward pass has an output")
    }

    pub fn input(&self) -> &Matrix {
        &self.activations[0]
    }

    /// Post-ReLU activations of hidden layer `k` (1-based like `layer_dims`).
    pub fn hidden(&self, k: usize) -> &Matrix {
        &self.activations[k]
    }
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(invalid(format!(
            "network needs at least an input and an output layer, got dims {layer_dims:?}"
        )));
    }
    if layer_dims.contains(&0) {
        return Err(invalid(format!("layer widths must be >= 1, got {layer_dims:?}")));
    }
    Ok(())
}

/// He-initialized network: weights `N(0, 2/fan_in)`, zero biases.
pub fn init_network(layer_dims: &[usize], rng: &mut Rng) -> Result<Network> {
    check_dims(layer_dims)?;
    let mut weights = Vec::with_capacity(layer_dims.len() - 1);
    let mut biases = Vec::with_capacity(layer_dims.len() - 1);
    for pair in layer_dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let scale = (2.0 / fan_in as f64).sqrt();
        let w = (0..fan_in * fan_out).map(|_| scale * rng.gaussian()).collect();
        weights.push(Matrix::from_vec(fan_out, fan_in, w)?);
        biases.push(vec![0.0; fan_out]);
    }
    Ok(Network {
        layer_dims: layer_dims.to_vec(),
        weights,
        biases,
    })
}

/// Free-function form of [`Network::forward`].
pub fn forward(net: &Network, batch: &Matrix) -> Result<Matrix> {
    net.forward(batch)
}

/// Gradient of `Σ output_grads ⊙ forward(net, batch)` with respect to the
/// parameters.
pub fn backward(net: &Network, batch: &Matrix, output_grads: &Matrix) -> Result<Gradients> {
    let pass = net.forward_pass(batch)?;
    Ok(net.backward_pass(&pass, output_grads, false)?.0)
}

impl Network {
    pub fn from_parts(weights: Vec<Matrix>, biases: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(invalid("need one bias vector per weight matrix"));
        }
        let mut layer_dims = vec![weights[0].cols()];
        for (k, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.cols() != *layer_dims.last().unwrap() || b.len() != w.rows() {
                return Err(invalid(format!("layer {k} shape mismatch")));
            }
            layer_dims.push(w.rows());
        }
        check_dims(&layer_dims)?;
        let net = Self {
            layer_dims,
            weights,
            biases,
        };
        if !net.is_finite() {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        Ok(net)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.data().len()).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite)
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }

    /// Flat copy of all parameters, layer by layer, weights before biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }

    /// Inverse of [`Network::params_flat`].
    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(invalid("flat parameter length mismatch"));
        }
        let mut off = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let n = w.data().len();
            w.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
            let nb = b.len();
            b.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let mut act = batch.clone();
        for k in 0..self.num_layers() {
            act = self.layer(k, &act);
        }
        Ok(act)
    }

    /// Forward evaluation that keeps every layer's activations.
    pub fn forward_pass(&self, batch: &Matrix) -> Result<ForwardPass> {
        self.check_input(batch)?;
        let mut activations = Vec::with_capacity(self.num_layers() + 1);
        activations.push(batch.clone());
        for k in 0..self.num_layers() {
            let next = self.layer(k, activations.last().unwrap());
            activations.push(next);
        }
        Ok(ForwardPass { activations })
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(invalid(format!(
                "batch has {} columns, network expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn layer(&self, k: usize, input: &Matrix) -> Matrix {
        let w = &self.weights[k];
        let (b, fan_in, fan_out) = (input.rows(), w.cols(), w.rows());
        let mut out = Matrix::zeros(b, fan_out);
        for row in out.data_mut().chunks_exact_mut(fan_out) {
            row.copy_from_slice(&self.biases[k]);
        }
        gemm(b, fan_in, fan_out, 1.0, input.data(), false, w.data(), true, 1.0, out.data_mut());
        if k + 1 < self.num_layers() {
            for v in out.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        out
    }

    /// Reverse sweep over a cached forward pass.
    ///
    /// Returns parameter gradients of `Σ output_grads ⊙ output`, and, when
    /// `want_input_grad` is set, the gradient with respect to the input batch.
    pub fn backward_pass(
        &self,
        pass: &ForwardPass,
        output_grads: &Matrix,
        want_input_grad: bool,
    ) -> Result<(Gradients, Option<Matrix>)> {
        if output_grads.shape() != pass.output().shape() {
            return Err(invalid(format!(
                "output gradient shape {:?} does not match output shape {:?}",
                output_grads.shape(),
                pass.output().shape()
            )));
        }
        let layers = self.num_layers();
        let mut gw: Vec<Matrix> = Vec::with_capacity(layers);
        let mut gb: Vec<Vec<f64>> = Vec::with_capacity(layers);
        let mut delta = output_grads.clone();
        let mut input_grad = None;
        for k in (0..layers).rev() {
            let w = &self.weights[k];
            let a_in = &pass.activations[k];
            let (b, fan_in, fan_out) = (a_in.rows(), w.cols(), w.rows());

            let mut dw = Matrix::zeros(fan_out, fan_in);
            gemm(fan_out, b, fan_in, 1.0, delta.data(), true, a_in.data(), false, 0.0, dw.data_mut());
            let mut db = vec![0.0; fan_out];
            for row in delta.data().chunks_exact(fan_out) {
                for (acc, v) in db.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            gw.push(dw);
            gb.push(db);

            if k > 0 || want_input_grad {
                let mut prev = Matrix::zeros(b, fan_in);
                gemm(b, fan_out, fan_in, 1.0, delta.data(), false, w.data(), false, 0.0, prev.data_mut());
                if k > 0 {
                    // ReLU mask from the post-activation values.
                    for (g, a) in prev.data_mut().iter_mut().zip(a_in.data()) {
                        if *a <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    delta = prev;
                } else {
                    input_grad = Some(prev);
                }
            }
        }
        gw.reverse();
        gb.reverse();
        Ok((
            Gradients {
                weights: gw,
                biases: gb,
            },
            input_grad,
        ))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut arrays = Vec::with_capacity(2 * self.num_layers());
        for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            arrays.push(NamedArray {
                name: format!("layer{k}.weight"),
                layer: k,
                shape: vec![w.rows(), w.cols()],
                values: w.data().to_vec(),
            });
            arrays.push(NamedArray {
                name: format!("layer{k}.bias"),
                layer: k,
                shape: vec![b.len()],
                values: b.clone(),
            });
        }
        Checkpoint {
            layer_dims: self.layer_dims.clone(),
            arrays,
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for k in 0..ckpt.layer_dims.len().saturating_sub(1) {
            let find = |suffix: &str| {
                ckpt.arrays
                    .iter()
                    .find(|a| a.layer == k && a.name == format!("layer{k}.{suffix}"))
                    .ok_or_else(|| Error::Serialization(format!("missing layer{k}.{suffix}")))
            };
            let w = find("weight")?;
            let b = find("bias")?;
            if w.shape.len() != 2 {
                return Err(Error::Serialization(format!("layer{k}.weight must be 2-D")));
            }
            weights.push(Matrix::from_vec(w.shape[0], w.shape[1], w.values.clone())?);
            biases.push(b.values.clone());
        }
        let net = Self::from_parts(weights, biases)?;
        if net.layer_dims != ckpt.layer_dims {
            return Err(Error::Serialization("layer_dims disagree with arrays".into()));
        }
        Ok(net)
    }
}

/// Parameter checkpoint: a flat list of named arrays.
///
/// JSON layout:
///
/// ```text
/// { "layer_dims": [1, 64, 1],
///   "arrays": [ { "name": "layer0.weight", "layer": 0, "shape": [64, 1], "values": [...] },
///               { "name": "layer0.bias",   "layer": 0, "shape": [64],    "values": [...] }, ... ] }
/// ```
///
/// Values are row-major; floats round-trip bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layer_dims: Vec<usize>,
    pub arrays: Vec<NamedArray>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub layer: usize,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .flat_map(|w| w.data().iter())
            .chain(self.biases.iter().flatten())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .flat_map(|w| w.data_mut().iter_mut())
            .chain(self.biases.iter_mut().flatten())
    }

    /// Global L2 norm over every component.
    pub fn norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, c: f64) {
        for v in self.values_mut() {
            *v *= c;
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
    }

    /// Flat copy in the same order as [`Network::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }
}
