//! Dense multilayer perceptron with a hand-written backward pass.
//!
//! Weights are stored per layer as a `fan_in × fan_out` row-major matrix, so
//! row `i` holds the outgoing weights of input unit `i`. Forward and backward
//! passes are per-sample; batching is a loop over samples, which keeps every
//! output bit-identical regardless of how samples are grouped.

use rand::distr::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GradientBundle, Parameters};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, values: &mut [f64]) {
        if self == Activation::Tanh {
            values.iter_mut().for_each(|v| *v = v.tanh());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    fan_in: usize,
    fan_out: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl Dense {
    pub fn fan_in(&self) -> usize {
        self.fan_in
    }

    pub fn fan_out(&self) -> usize {
        self.fan_out
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Row-major `fan_in × fan_out` weight matrix.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    #[inline]
    fn affine(&self, input: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.biases);
        for (&x, row) in input.iter().zip(self.weights.chunks_exact(self.fan_out)) {
            for (o, &w) in out.iter_mut().zip(row) {
                *o += x * w;
            }
        }
    }
}

/// Parameters of a fully connected network: Tanh hidden layers and a
/// linear output layer. Output transforms (action scaling, modulation range)
/// are applied by the callers that own the heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRecord", into = "MlpRecord")]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Intermediate values of one forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input; `activations[k + 1]` is the output of layer `k`.
    activations: Vec<Vec<f64>>,
    /// Pre-activation values `W x + b` per layer.
    pre_activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }

    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre_activations
    }

    pub fn activations(&self) -> &[Vec<f64>] {
        &self.activations
    }
}

/// Gradients of `output · upstream` with respect to parameters and input.
#[derive(Debug, Clone)]
pub struct MlpGradients {
    pub params: GradientBundle,
    pub input: Vec<f64>,
}

impl Mlp {
    /// Kaiming-uniform initialization: every weight is drawn from
    /// `U[-b, b]` with `b = sqrt(6 / fan_in)`, biases start at zero.
    pub fn init<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let last = layer_sizes.len() - 2;
        let layers = layer_sizes
            .windows(2)
            .enumerate()
            .map(|(k, pair)| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let bound = kaiming_bound(fan_in);
                let dist = Uniform::new_inclusive(-bound, bound)
                    .expect("kaiming bound is finite and positive");
                let weights = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
                Dense {
                    fan_in,
                    fan_out,
                    weights,
                    biases: vec![0.0; fan_out],
                    activation: if k == last {
                        Activation::Identity
                    } else {
                        Activation::Tanh
                    },
                }
            })
            .collect();
        Ok(Mlp { layers })
    }

    /// All-zero network with the same topology rules as [`Mlp::init`].
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let last = layer_sizes.len() - 2;
        let layers = layer_sizes
            .windows(2)
            .enumerate()
            .map(|(k, pair)| Dense {
                fan_in: pair[0],
                fan_out: pair[1],
                weights: vec![0.0; pair[0] * pair[1]],
                biases: vec![0.0; pair[1]],
                activation: if k == last {
                    Activation::Identity
                } else {
                    Activation::Tanh
                },
            })
            .collect();
        Ok(Mlp { layers })
    }

    /// Builds a network from explicit layers, checking that dimensions chain.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out != pair[1].fan_in {
                return Err(Error::Shape(format!(
                    "layer output {} does not feed next layer input {}",
                    pair[0].fan_out, pair[1].fan_in
                )));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.fan_out));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} entries, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Forward pass without keeping intermediates.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for layer in &self.layers {
            let mut out = vec![0.0; layer.fan_out];
            layer.affine(&x, &mut out);
            layer.activation.apply(&mut out);
            x = out;
        }
        Ok(x)
    }

    /// Forward pass returning the output and everything backward needs.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        activations.push(input.to_vec());
        for layer in &self.layers {
            let mut pre = vec![0.0; layer.fan_out];
            layer.affine(activations.last().expect("input pushed"), &mut pre);
            let mut post = pre.clone();
            layer.activation.apply(&mut post);
            pre_activations.push(pre);
            activations.push(post);
        }
        let output = activations.last().expect("at least one layer").clone();
        Ok((
            output,
            ForwardCache {
                activations,
                pre_activations,
            },
        ))
    }

    /// Gradients of `output · upstream` with respect to every parameter and
    /// the input, in a fresh bundle.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<MlpGradients> {
        let mut params = self.zero_grads();
        let input = self.backward_into(cache, upstream, &mut params.tensors)?;
        Ok(MlpGradients { params, input })
    }

    /// Accumulates parameter gradients into `grads` (laid out as
    /// [`Parameters::tensors`]) and returns the input gradient.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        upstream: &[f64],
        grads: &mut [Vec<f64>],
    ) -> Result<Vec<f64>> {
        self.check_cache(cache)?;
        if upstream.len() != self.output_dim() {
            return Err(Error::Shape(format!(
                "upstream gradient has {} entries, network outputs {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        if grads.len() != 2 * self.layers.len() {
            return Err(Error::Shape(format!(
                "gradient bundle has {} tensors, network has {}",
                grads.len(),
                2 * self.layers.len()
            )));
        }

        let mut delta = upstream.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Tanh {
                for (d, y) in delta.iter_mut().zip(&cache.activations[k + 1]) {
                    *d *= 1.0 - y * y;
                }
            }
            let input = &cache.activations[k];
            let (head, tail) = grads.split_at_mut(2 * k + 1);
            let dw = &mut head[2 * k];
            let db = &mut tail[0];
            for (b, d) in db.iter_mut().zip(&delta) {
                *b += d;
            }
            let mut dx = vec![0.0; layer.fan_in];
            for ((&x, w_row), (dw_row, dx_i)) in input
                .iter()
                .zip(layer.weights.chunks_exact(layer.fan_out))
                .zip(dw.chunks_exact_mut(layer.fan_out).zip(dx.iter_mut()))
            {
                let mut acc = 0.0;
                for ((g, &w), &d) in dw_row.iter_mut().zip(w_row).zip(&delta) {
                    *g += x * d;
                    acc += w * d;
                }
                *dx_i = acc;
            }
            delta = dx;
        }
        Ok(delta)
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        let matches = cache.activations.len() == self.layers.len() + 1
            && cache.activations[0].len() == self.input_dim()
            && self
                .layers
                .iter()
                .zip(&cache.activations[1..])
                .all(|(l, a)| l.fan_out == a.len());
        if matches {
            Ok(())
        } else {
            Err(Error::Shape(
                "forward cache was not produced by this network".into(),
            ))
        }
    }
}

impl Parameters for Mlp {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
            .collect()
    }
}

pub fn kaiming_bound(fan_in: usize) -> f64 {
    (6.0 / fan_in as f64).sqrt()
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config(format!(
            "need at least two layer sizes, got {}",
            layer_sizes.len()
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Config(format!(
            "layer sizes must be positive, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

/// On-disk form of an [`Mlp`]: layer sizes plus flat row-major arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpRecord {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl From<Mlp> for MlpRecord {
    fn from(mlp: Mlp) -> Self {
        let layer_sizes = mlp.layer_sizes();
        let activations = mlp.layers.iter().map(|l| l.activation).collect();
        let (weights, biases) = mlp
            .layers
            .into_iter()
            .map(|l| (l.weights, l.biases))
            .unzip();
        MlpRecord {
            layer_sizes,
            activations,
            weights,
            biases,
        }
    }
}

impl TryFrom<MlpRecord> for Mlp {
    type Error = Error;

    fn try_from(record: MlpRecord) -> Result<Self> {
        validate_sizes(&record.layer_sizes)?;
        let n = record.layer_sizes.len() - 1;
        if record.activations.len() != n || record.weights.len() != n || record.biases.len() != n {
            return Err(Error::Shape(format!(
                "record describes {n} layers but stores {} activations, {} weight and {} bias arrays",
                record.activations.len(),
                record.weights.len(),
                record.biases.len()
            )));
        }
        let mut layers = Vec::with_capacity(n);
        for (k, ((weights, biases), activation)) in record
            .weights
            .into_iter()
            .zip(record.biases)
            .zip(record.activations)
            .enumerate()
        {
            let (fan_in, fan_out) = (record.layer_sizes[k], record.layer_sizes[k + 1]);
            if weights.len() != fan_in * fan_out || biases.len() != fan_out {
                return Err(Error::Shape(format!(
                    "layer {k} arrays do not match {fan_in}x{fan_out}"
                )));
            }
            if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "layer {k} holds non-finite values"
                )));
            }
            layers.push(Dense {
                fan_in,
                fan_out,
                weights,
                biases,
                activation,
            });
        }
        Mlp::from_layers(layers)
    }
}
