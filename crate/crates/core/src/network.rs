//! Dense feedforward Q-value approximator with hand-written backpropagation.
//!
//! Hidden layers are rectified-linear, the output layer is affine. Weights
//! are stored one contiguous row per output (`out x in`, the checkpoint
//! layout), so a single Q-value is one dot product and masked queries only
//! touch the rows of feasible actions.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// `outputs x inputs`, row-major.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    fn row(&self, row: usize) -> &[f64] {
        &self.weights[row * self.inputs..(row + 1) * self.inputs]
    }

    fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.inputs + col]
    }

    fn weight_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        &mut self.weights[row * self.inputs + col]
    }

    fn output(&self, row: usize, x: &[f64]) -> f64 {
        self.biases[row] + dot(self.row(row), x)
    }

    fn affine_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.outputs).map(|j| self.output(j, x)));
    }
}

/// Dot product with four independent partial sums so it vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += a x`.
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Weights and biases of a dense network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NetworkDocument", try_from = "NetworkDocument")]
pub struct NetworkParams {
    layer_dims: Vec<usize>,
    layers: Vec<Layer>,
}

/// Checkpoint layout: `weights[layer][row][col]` with `row` indexing the
/// layer's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl From<NetworkParams> for NetworkDocument {
    fn from(p: NetworkParams) -> Self {
        NetworkDocument {
            weights: p
                .layers
                .iter()
                .map(|l| {
                    (0..l.outputs)
                        .map(|r| (0..l.inputs).map(|c| l.weight(r, c)).collect())
                        .collect()
                })
                .collect(),
            biases: p.layers.iter().map(|l| l.biases.clone()).collect(),
            layer_dims: p.layer_dims,
        }
    }
}

impl TryFrom<NetworkDocument> for NetworkParams {
    type Error = Error;

    fn try_from(doc: NetworkDocument) -> Result<Self> {
        check_dims(&doc.layer_dims)?;
        let n_layers = doc.layer_dims.len() - 1;
        if doc.weights.len() != n_layers || doc.biases.len() != n_layers {
            return Err(Error::Shape(format!(
                "layer_dims describe {n_layers} layers, found {} weight and {} bias blocks",
                doc.weights.len(),
                doc.biases.len()
            )));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for (l, (rows, biases)) in doc.weights.into_iter().zip(doc.biases).enumerate() {
            let (inputs, outputs) = (doc.layer_dims[l], doc.layer_dims[l + 1]);
            if rows.len() != outputs || biases.len() != outputs {
                return Err(Error::Shape(format!(
                    "layer {l}: expected {outputs} rows and biases, found {} and {}",
                    rows.len(),
                    biases.len()
                )));
            }
            let mut layer = Layer {
                inputs,
                outputs,
                weights: vec![0.0; inputs * outputs],
                biases,
            };
            for (r, row) in rows.iter().enumerate() {
                if row.len() != inputs {
                    return Err(Error::Shape(format!(
                        "layer {l} row {r}: expected {inputs} columns, found {}",
                        row.len()
                    )));
                }
                for (c, &w) in row.iter().enumerate() {
                    *layer.weight_mut(r, c) = w;
                }
            }
            layers.push(layer);
        }
        let params = NetworkParams {
            layer_dims: doc.layer_dims,
            layers,
        };
        if !params.is_finite() {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(params)
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Shape(format!(
            "need at least input and output dims, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Shape(format!("zero-width layer in {dims:?}")));
    }
    Ok(())
}

/// `batch x outputs` affine map of `batch x inputs` row-major inputs.
fn affine_batch(layer: &Layer, inputs: &[f64], batch: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch * layer.outputs);
    for _ in 0..batch {
        out.extend_from_slice(&layer.biases);
    }
    if batch > 0 {
        // SAFETY: the buffers hold batch x inputs, outputs x inputs (read
        // transposed) and batch x outputs values, matching the strides.
        unsafe {
            matrixmultiply::dgemm(
                batch,
                layer.inputs,
                layer.outputs,
                1.0,
                inputs.as_ptr(),
                layer.inputs as isize,
                1,
                layer.weights.as_ptr(),
                1,
                layer.inputs as isize,
                1.0,
                out.as_mut_ptr(),
                layer.outputs as isize,
                1,
            );
        }
    }
    out
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

impl NetworkParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(layer_dims: &[usize], rng: &mut R) -> Result<Self> {
        check_dims(layer_dims)?;
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let limit = (6.0 / (inputs + outputs) as f64).sqrt();
                // Drawn in checkpoint (row-major out x in) order.
                let mut layer = Layer {
                    inputs,
                    outputs,
                    weights: vec![0.0; inputs * outputs],
                    biases: vec![0.0; outputs],
                };
                for r in 0..outputs {
                    for c in 0..inputs {
                        *layer.weight_mut(r, c) = rng.random_range(-limit..=limit);
                    }
                }
                layer
            })
            .collect();
        Ok(NetworkParams {
            layer_dims: layer_dims.to_vec(),
            layers,
        })
    }

    /// All-zero parameters.
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        check_dims(layer_dims)?;
        let layers = layer_dims
            .windows(2)
            .map(|w| Layer {
                inputs: w[0],
                outputs: w[1],
                weights: vec![0.0; w[0] * w[1]],
                biases: vec![0.0; w[1]],
            })
            .collect();
        Ok(NetworkParams {
            layer_dims: layer_dims.to_vec(),
            layers,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("at least two dims")
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Weight from input `col` to output `row` of `layer`.
    pub fn weight(&self, layer: usize, row: usize, col: usize) -> f64 {
        self.layers[layer].weight(row, col)
    }

    pub fn set_weight(&mut self, layer: usize, row: usize, col: usize, value: f64) {
        *self.layers[layer].weight_mut(row, col) = value;
    }

    pub fn bias(&self, layer: usize, row: usize) -> f64 {
        self.layers[layer].biases[row]
    }

    pub fn set_bias(&mut self, layer: usize, row: usize, value: f64) {
        self.layers[layer].biases[row] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} entries, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Last hidden activation (the input itself for a single-layer net).
    fn penultimate(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers[..self.layers.len() - 1] {
            layer.affine_into(&cur, &mut next);
            relu_in_place(&mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Q-values of every output for one input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let h = self.penultimate(x);
        let mut out = Vec::with_capacity(self.output_dim());
        self.layers
            .last()
            .expect("non-empty")
            .affine_into(&h, &mut out);
        Ok(out)
    }

    /// A single output, skipping the rest of the final layer.
    pub fn forward_one(&self, x: &[f64], output: usize) -> Result<f64> {
        self.check_input(x)?;
        self.check_output(output)?;
        let h = self.penultimate(x);
        Ok(self.layers.last().expect("non-empty").output(output, &h))
    }

    /// Best feasible output for one input: lowest index among the maxima of
    /// the outputs flagged in `mask`, and its value. Only feasible rows of
    /// the final layer are evaluated.
    pub fn masked_best(&self, x: &[f64], mask: &[bool]) -> Result<(usize, f64)> {
        self.check_input(x)?;
        if mask.len() != self.output_dim() {
            return Err(Error::Shape(format!(
                "mask has {} entries, network has {} outputs",
                mask.len(),
                self.output_dim()
            )));
        }
        let h = self.penultimate(x);
        let last = self.layers.last().expect("non-empty");
        let mut best: Option<(usize, f64)> = None;
        for (a, _) in mask.iter().enumerate().filter(|(_, &ok)| ok) {
            let q = last.output(a, &h);
            if best.is_none_or(|(_, b)| q > b) {
                best = Some((a, q));
            }
        }
        best.ok_or(Error::EmptyMask)
    }

    /// Forward pass over `batch` inputs stored row-major in `inputs`;
    /// returns `batch x output_dim` row-major.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<Vec<f64>> {
        if inputs.len() != batch * self.input_dim() {
            return Err(Error::Shape(format!(
                "batch of {batch} needs {} inputs, got {}",
                batch * self.input_dim(),
                inputs.len()
            )));
        }
        let mut cur = inputs.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            cur = affine_batch(layer, &cur, batch);
            if l + 1 < self.layers.len() {
                relu_in_place(&mut cur);
            }
        }
        Ok(cur)
    }

    fn check_output(&self, output: usize) -> Result<()> {
        if output >= self.output_dim() {
            return Err(Error::IndexOutOfRange {
                index: output,
                limit: self.output_dim(),
            });
        }
        Ok(())
    }

    /// Gradient of `0.5 (target - Q(x)[action])^2`; also returns the TD error
    /// `target - Q(x)[action]`.
    pub fn td_gradient(&self, x: &[f64], action: usize, target: f64) -> Result<(Gradients, f64)> {
        let mut grads = Gradients::zeros(self);
        let td = self.accumulate_td_gradient(x, action, target, 1.0, &mut grads)?;
        Ok((grads, td))
    }

    /// Adds `scale` times the squared-TD-error gradient into `grads` and
    /// returns the TD error.
    pub fn accumulate_td_gradient(
        &self,
        x: &[f64],
        action: usize,
        target: f64,
        scale: f64,
        grads: &mut Gradients,
    ) -> Result<f64> {
        self.check_input(x)?;
        self.check_output(action)?;
        grads.check_shape(self)?;

        let n = self.layers.len();
        // Hidden activations only; the output row is computed on its own.
        let mut acts = Vec::with_capacity(n);
        acts.push(x.to_vec());
        for layer in &self.layers[..n - 1] {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.affine_into(acts.last().expect("input pushed"), &mut out);
            relu_in_place(&mut out);
            acts.push(out);
        }
        let last = &self.layers[n - 1];
        let h = &acts[n - 1];
        let q = last.output(action, h);
        let td = target - q;
        let delta_out = -td * scale;

        let row = grads.output.entry(action).or_insert_with(|| OutputRow {
            weights: vec![0.0; last.inputs],
            bias: 0.0,
        });
        axpy(delta_out, h, &mut row.weights);
        row.bias += delta_out;

        if n == 1 {
            return Ok(td);
        }
        // Error signal at the last hidden layer.
        let mut delta: Vec<f64> = last
            .row(action)
            .iter()
            .zip(h)
            .map(|(&w, &hk)| if hk > 0.0 { delta_out * w } else { 0.0 })
            .collect();
        for l in (0..n - 1).rev() {
            let layer = &self.layers[l];
            let input = &acts[l];
            let g = &mut grads.dense[l];
            for (j, &dj) in delta.iter().enumerate() {
                if dj != 0.0 {
                    axpy(
                        dj,
                        input,
                        &mut g.weights[j * layer.inputs..(j + 1) * layer.inputs],
                    );
                    g.biases[j] += dj;
                }
            }
            if l == 0 {
                break;
            }
            let mut below = vec![0.0; layer.inputs];
            for (j, &dj) in delta.iter().enumerate() {
                if dj != 0.0 {
                    axpy(dj, layer.row(j), &mut below);
                }
            }
            for (b, &ik) in below.iter_mut().zip(input) {
                if ik <= 0.0 {
                    *b = 0.0;
                }
            }
            delta = below;
        }
        Ok(td)
    }

    /// Batched [`NetworkParams::accumulate_td_gradient`]: `inputs` holds
    /// one row per sample. Hidden layers run as matrix products over the
    /// whole batch; returns the TD error of each sample.
    pub fn accumulate_td_gradient_batch(
        &self,
        inputs: &[f64],
        actions: &[usize],
        targets: &[f64],
        scale: f64,
        grads: &mut Gradients,
    ) -> Result<Vec<f64>> {
        let batch = actions.len();
        if targets.len() != batch || inputs.len() != batch * self.input_dim() {
            return Err(Error::Shape(format!(
                "batch of {batch} actions with {} targets and {} input values",
                targets.len(),
                inputs.len()
            )));
        }
        for &a in actions {
            self.check_output(a)?;
        }
        grads.check_shape(self)?;

        let n = self.layers.len();
        let mut acts = Vec::with_capacity(n);
        acts.push(inputs.to_vec());
        for layer in &self.layers[..n - 1] {
            let mut out = affine_batch(layer, acts.last().expect("input pushed"), batch);
            relu_in_place(&mut out);
            acts.push(out);
        }
        let last = &self.layers[n - 1];
        let h = &acts[n - 1];
        let width = last.inputs;
        let mut tds = Vec::with_capacity(batch);
        let mut delta = vec![0.0; batch * width];
        for (b, (&a, &y)) in actions.iter().zip(targets).enumerate() {
            let hb = &h[b * width..(b + 1) * width];
            let td = y - last.output(a, hb);
            tds.push(td);
            let delta_out = -td * scale;
            let row = grads.output.entry(a).or_insert_with(|| OutputRow {
                weights: vec![0.0; width],
                bias: 0.0,
            });
            axpy(delta_out, hb, &mut row.weights);
            row.bias += delta_out;
            for ((d, &w), &hk) in delta[b * width..(b + 1) * width]
                .iter_mut()
                .zip(last.row(a))
                .zip(hb)
            {
                if hk > 0.0 {
                    *d = delta_out * w;
                }
            }
        }
        for l in (0..n - 1).rev() {
            let layer = &self.layers[l];
            let input = &acts[l];
            let g = &mut grads.dense[l];
            // grad W += delta^T input, grad b += column sums of delta.
            // SAFETY: delta is batch x outputs, input is batch x inputs and
            // the gradient is outputs x inputs, all row-major.
            unsafe {
                matrixmultiply::dgemm(
                    layer.outputs,
                    batch,
                    layer.inputs,
                    1.0,
                    delta.as_ptr(),
                    1,
                    layer.outputs as isize,
                    input.as_ptr(),
                    layer.inputs as isize,
                    1,
                    1.0,
                    g.weights.as_mut_ptr(),
                    layer.inputs as isize,
                    1,
                );
            }
            for row in delta.chunks_exact(layer.outputs) {
                for (gb, &d) in g.biases.iter_mut().zip(row) {
                    *gb += d;
                }
            }
            if l == 0 {
                break;
            }
            let mut below = vec![0.0; batch * layer.inputs];
            // SAFETY: delta is batch x outputs, weights outputs x inputs and
            // below batch x inputs, all row-major.
            unsafe {
                matrixmultiply::dgemm(
                    batch,
                    layer.outputs,
                    layer.inputs,
                    1.0,
                    delta.as_ptr(),
                    layer.outputs as isize,
                    1,
                    layer.weights.as_ptr(),
                    layer.inputs as isize,
                    1,
                    0.0,
                    below.as_mut_ptr(),
                    layer.inputs as isize,
                    1,
                );
            }
            for (b, &ik) in below.iter_mut().zip(input) {
                if ik <= 0.0 {
                    *b = 0.0;
                }
            }
            delta = below;
        }
        Ok(tds)
    }

    /// Gradient-descent step `theta <- theta - alpha grad`.
    pub fn apply_update(&mut self, grads: &Gradients, alpha: f64) -> Result<()> {
        grads.check_shape(self)?;
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        let n = self.layers.len();
        for (layer, g) in self.layers[..n - 1].iter_mut().zip(&grads.dense) {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= alpha * gw;
            }
            for (b, gb) in layer.biases.iter_mut().zip(&g.biases) {
                *b -= alpha * gb;
            }
        }
        let last = &mut self.layers[n - 1];
        for (&row, g) in &grads.output {
            let inputs = last.inputs;
            axpy(
                -alpha,
                &g.weights,
                &mut last.weights[row * inputs..(row + 1) * inputs],
            );
            last.biases[row] -= alpha * g.bias;
        }
        Ok(())
    }

    /// Finite check limited to what `grads` can have changed: every hidden
    /// layer plus the touched output rows.
    pub fn is_finite_after(&self, grads: &Gradients) -> bool {
        let n = self.layers.len();
        let last = &self.layers[n - 1];
        self.layers[..n - 1]
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
            && grads
                .output
                .keys()
                .all(|&r| last.biases[r].is_finite() && last.row(r).iter().all(|v| v.is_finite()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDocument = serde_json::from_str(text)?;
        NetworkParams::try_from(doc)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DenseGrad {
    /// Same `out x in` layout as the layer.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct OutputRow {
    weights: Vec<f64>,
    bias: f64,
}

/// Gradient with the network's shape. Hidden layers are dense; the output
/// layer only stores rows that received a contribution, every other row is
/// zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layer_dims: Vec<usize>,
    dense: Vec<DenseGrad>,
    output: BTreeMap<usize, OutputRow>,
}

impl Gradients {
    pub fn zeros(params: &NetworkParams) -> Self {
        let n = params.layers.len();
        Gradients {
            layer_dims: params.layer_dims.clone(),
            dense: params.layers[..n - 1]
                .iter()
                .map(|l| DenseGrad {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
            output: BTreeMap::new(),
        }
    }

    fn check_shape(&self, params: &NetworkParams) -> Result<()> {
        if self.layer_dims != params.layer_dims {
            return Err(Error::Shape(format!(
                "gradient dims {:?} vs network dims {:?}",
                self.layer_dims, params.layer_dims
            )));
        }
        Ok(())
    }

    fn is_output(&self, layer: usize) -> bool {
        layer + 1 == self.layer_dims.len() - 1
    }

    pub fn weight(&self, layer: usize, row: usize, col: usize) -> f64 {
        if self.is_output(layer) {
            self.output.get(&row).map_or(0.0, |r| r.weights[col])
        } else {
            self.dense[layer].weights[row * self.layer_dims[layer] + col]
        }
    }

    pub fn bias(&self, layer: usize, row: usize) -> f64 {
        if self.is_output(layer) {
            self.output.get(&row).map_or(0.0, |r| r.bias)
        } else {
            self.dense[layer].biases[row]
        }
    }

    /// Output rows holding a (possibly zero) contribution.
    pub fn touched_outputs(&self) -> impl Iterator<Item = usize> + '_ {
        self.output.keys().copied()
    }

    pub fn is_finite(&self) -> bool {
        self.dense
            .iter()
            .all(|g| g.weights.iter().chain(&g.biases).all(|v| v.is_finite()))
            && self
                .output
                .values()
                .all(|r| r.bias.is_finite() && r.weights.iter().all(|v| v.is_finite()))
    }

    pub fn is_zero(&self) -> bool {
        self.dense
            .iter()
            .all(|g| g.weights.iter().chain(&g.biases).all(|&v| v == 0.0))
            && self
                .output
                .values()
                .all(|r| r.bias == 0.0 && r.weights.iter().all(|&v| v == 0.0))
    }
}
