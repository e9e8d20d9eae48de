//! Minimal dense network core: MLPs with manual backpropagation, Adam, and
//! diagonal-Gaussian distribution math. Everything is `f64`.

mod adam;
mod gaussian;
mod mlp;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use gaussian::{gaussian_entropy, gaussian_logprob, gaussian_sample, GaussianHead};
pub use mlp::{kaiming_bound, Activation, Dense, ForwardCache, Mlp, MlpGradients};

/// Anything that exposes its trainable values as a fixed sequence of flat
/// tensors. Gradient bundles and optimizer moments mirror that sequence.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn zero_grads(&self) -> GradientBundle {
        GradientBundle {
            tensors: self.tensors().iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Per-tensor gradient arrays, shape-congruent with some [`Parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub tensors: Vec<Vec<f64>>,
}

impl GradientBundle {
    pub fn zeros_like(other: &GradientBundle) -> Self {
        GradientBundle {
            tensors: other.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|v| v.is_finite())
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flatten()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.tensors.iter_mut().flatten().for_each(|v| *v *= factor);
    }

    /// Rescales so the global L2 norm is at most `max_norm`; returns the
    /// norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm {
            self.scale(max_norm / (norm + 1e-6));
        }
        norm
    }

    pub fn shapes(&self) -> Vec<usize> {
        self.tensors.iter().map(Vec::len).collect()
    }
}
