//! Dense feed-forward network with reverse-mode gradients.
//!
//! Weights are stored per layer as `(out, in)` matrices; inputs are batched
//! row-wise, so a batch of `n` samples is an `(n, in)` matrix and
//! `Z = A W^T + b`.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::{HiddenActivation, OutputActivation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    hidden: HiddenActivation,
    output: OutputActivation,
    lineage: SeedLineage,
}

/// Seeds that produced a network's parameters: initialization, then training.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub init: Option<u64>,
    pub train: Option<u64>,
}

/// Per-layer gradients, shape-congruent with the [`Mlp`] they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Activations of every layer from a batched forward pass; `activations[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations
            .last()
            .expect("cache holds at least the input")
    }
}

fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::invalid(format!(
            "an MLP needs at least input and output widths, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::invalid(format!(
            "layer widths must be positive, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

impl Mlp {
    /// Glorot-uniform weights, zero biases. Same seed, same parameters.
    pub fn new(
        layer_sizes: &[usize],
        hidden: HiddenActivation,
        output: OutputActivation,
        seed: u64,
    ) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || {
                dist.sample(&mut rng)
            }));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            hidden,
            output,
            lineage: SeedLineage {
                init: Some(seed),
                train: None,
            },
        })
    }

    /// Builds a network from explicit parameters. Layer sizes are inferred from the shapes.
    pub fn from_parts(
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        hidden: HiddenActivation,
        output: OutputActivation,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::invalid(format!(
                "need one bias per weight matrix, got {} weights and {} biases",
                weights.len(),
                biases.len()
            )));
        }
        let mut layer_sizes = vec![weights[0].ncols()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != *layer_sizes.last().unwrap() || b.len() != w.nrows() {
                return Err(Error::invalid(format!(
                    "layer {l}: weight {:?} and bias {} do not chain",
                    w.dim(),
                    b.len()
                )));
            }
            layer_sizes.push(w.nrows());
        }
        check_sizes(&layer_sizes)?;
        Ok(Self {
            layer_sizes,
            weights,
            biases,
            hidden,
            output,
            lineage: SeedLineage::default(),
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn hidden_activation(&self) -> HiddenActivation {
        self.hidden
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn lineage(&self) -> SeedLineage {
        self.lineage
    }

    pub fn set_lineage(&mut self, lineage: SeedLineage) {
        self.lineage = lineage;
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    pub fn num_params(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let input = self.row(x)?;
        Ok(self
            .forward_batch(input.view())?
            .into_raw_vec_and_offset()
            .0)
    }

    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(inputs)?;
        let mut a = inputs.to_owned();
        for l in 0..self.num_layers() {
            a = self.affine(l, a.view());
            self.activate(l, &mut a);
        }
        Ok(a)
    }

    /// Forward pass that keeps every layer's activation for [`Mlp::backward_cached`].
    pub fn forward_cached(&self, inputs: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(inputs)?;
        let mut activations = Vec::with_capacity(self.num_layers() + 1);
        activations.push(inputs.to_owned());
        for l in 0..self.num_layers() {
            let mut a = self.affine(l, activations[l].view());
            self.activate(l, &mut a);
            activations.push(a);
        }
        Ok(ForwardCache { activations })
    }

    /// Single-sample vector-Jacobian product: gradients of `upstream · net(x)`.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<GradientSet> {
        let input = self.row(x)?;
        let g = Array2::from_shape_vec((1, upstream.len()), upstream.to_vec())
            .map_err(|e| Error::invalid(e.to_string()))?;
        let cache = self.forward_cached(input.view())?;
        self.backward_cached(&cache, g.view())
    }

    /// Batched backward pass. `upstream` holds dL/d(output) per row; gradients are summed
    /// over rows, so any 1/N averaging belongs in `upstream`.
    pub fn backward_cached(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
    ) -> Result<GradientSet> {
        Ok(self.backward_with_input_grad(cache, upstream)?.0)
    }

    pub(crate) fn backward_with_input_grad(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
    ) -> Result<(GradientSet, Array2<f64>)> {
        let out = cache.output();
        if upstream.dim() != out.dim() || cache.activations.len() != self.num_layers() + 1 {
            return Err(Error::invalid(format!(
                "upstream gradient {:?} does not match network output {:?}",
                upstream.dim(),
                out.dim()
            )));
        }
        let layers = self.num_layers();
        let mut weight_grads = Vec::with_capacity(layers);
        let mut bias_grads = Vec::with_capacity(layers);
        let mut delta = upstream.to_owned();
        self.output.backprop(out.view(), &mut delta);
        for l in (0..layers).rev() {
            let a_prev = &cache.activations[l];
            weight_grads.push(delta.t().dot(a_prev));
            bias_grads.push(delta.sum_axis(Axis(0)));
            delta = delta.dot(&self.weights[l]);
            if l > 0 {
                self.hidden.backprop(a_prev.view(), &mut delta);
            }
        }
        weight_grads.reverse();
        bias_grads.reverse();
        Ok((
            GradientSet {
                weights: weight_grads,
                biases: bias_grads,
            },
            delta,
        ))
    }

    fn affine(&self, l: usize, a: ArrayView2<f64>) -> Array2<f64> {
        let mut z = a.dot(&self.weights[l].t());
        z += &self.biases[l];
        z
    }

    fn activate(&self, l: usize, z: &mut Array2<f64>) {
        if l + 1 == self.num_layers() {
            self.output.apply(z);
        } else {
            self.hidden.apply(z);
        }
    }

    fn row(&self, x: &[f64]) -> Result<Array2<f64>> {
        if x.len() != self.input_width() {
            return Err(Error::invalid(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_width()
            )));
        }
        Ok(Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row shape"))
    }

    fn check_input(&self, inputs: ArrayView2<f64>) -> Result<()> {
        if inputs.ncols() != self.input_width() {
            return Err(Error::invalid(format!(
                "input has {} features, network expects {}",
                inputs.ncols(),
                self.input_width()
            )));
        }
        Ok(())
    }
}

impl GradientSet {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    pub fn is_congruent(&self, net: &Mlp) -> bool {
        self.weights.len() == net.weights.len()
            && self.biases.len() == net.biases.len()
            && self
                .weights
                .iter()
                .zip(&net.weights)
                .all(|(g, w)| g.dim() == w.dim())
            && self
                .biases
                .iter()
                .zip(&net.biases)
                .all(|(g, b)| g.len() == b.len())
    }

    /// Index of the first layer holding a NaN or infinite entry.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        (0..self.weights.len()).find(|&l| {
            self.weights[l].iter().any(|v| !v.is_finite())
                || self.biases[l].iter().any(|v| !v.is_finite())
        })
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|&v| v == 0.0))
            && self.biases.iter().all(|b| b.iter().all(|&v| v == 0.0))
    }

    /// All entries flattened layer by layer (weights row-major, then biases).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    /// `||a - b|| / max(||a||, ||b||)` over all parameters; zero when both vanish.
    pub fn relative_error(&self, other: &GradientSet) -> f64 {
        let (a, b) = (self.flatten(), other.flatten());
        let diff = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = norm(&a).max(norm(&b));
        if scale == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }

    /// Largest entry-wise relative error, `|a - b| / max(|a|, |b|, floor)`.
    pub fn max_relative_error(&self, other: &GradientSet, floor: f64) -> f64 {
        self.flatten()
            .iter()
            .zip(other.flatten())
            .map(|(&a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
            .fold(0.0, f64::max)
    }
}
