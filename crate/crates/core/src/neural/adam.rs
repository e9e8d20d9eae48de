use super::{GradientBundle, Parameters};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment accumulators for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: GradientBundle,
    second: GradientBundle,
    step: u64,
}

impl AdamState {
    pub fn new<P: Parameters + ?Sized>(params: &P) -> Self {
        let zeros = params.zero_grads();
        AdamState {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &GradientBundle {
        &self.first
    }

    pub fn second_moment(&self) -> &GradientBundle {
        &self.second
    }
}

/// One bias-corrected Adam update. Parameters are left untouched when the
/// gradient holds non-finite entries or shapes disagree.
pub fn adam_step<P: Parameters + ?Sized>(
    params: &mut P,
    grads: &GradientBundle,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    if grads.shapes() != shapes || state.first.shapes() != shapes {
        return Err(Error::Shape(format!(
            "adam: params {shapes:?}, grads {:?}, state {:?}",
            grads.shapes(),
            state.first.shapes()
        )));
    }
    if let Some((t, i)) = grads
        .tensors
        .iter()
        .enumerate()
        .find_map(|(t, g)| g.iter().position(|v| !v.is_finite()).map(|i| (t, i)))
    {
        return Err(Error::Numerical(format!(
            "non-finite gradient at tensor {t}, index {i} (value {})",
            grads.tensors[t][i]
        )));
    }

    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - ADAM_BETA1.powi(t);
    let bias2 = 1.0 - ADAM_BETA2.powi(t);
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(&grads.tensors)
        .zip(&mut state.first.tensors)
        .zip(&mut state.second.tensors)
    {
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}
