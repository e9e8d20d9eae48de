//! Analytic PPO-loss gradients against central finite differences.

use instinct_core::neural::{gaussian_logprob, GradientBundle, Parameters};
use instinct_core::rl::{ppo_loss_gradients, PpoSample};
use instinct_core::{ActorCritic, PpoHyper};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const CASES: u64 = 100;
const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Gradients smaller than this are compared absolutely.
const SCALE_FLOOR: f64 = 1e-5;

struct Owned {
    input: Vec<f64>,
    sample: Vec<f64>,
    old_logprob: f64,
    advantage: f64,
    target_return: f64,
}

fn random_batch(
    net: &ActorCritic,
    rng: &mut ChaCha8Rng,
    size: usize,
    critic_only: bool,
) -> Vec<Owned> {
    (0..size)
        .map(|_| {
            let input: Vec<f64> = (0..net.input_dim())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let mean = net.mean(&input).unwrap();
            let sigma = net.head.sigma();
            let sample: Vec<f64> = mean
                .iter()
                .zip(&sigma)
                .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
                .collect();
            // Old policy close to the current one keeps every ratio inside the clip range.
            let old_logprob =
                gaussian_logprob(&mean, &sigma, &sample).unwrap() + rng.random_range(-0.05..0.05);
            Owned {
                input,
                sample,
                old_logprob,
                advantage: if critic_only {
                    0.0
                } else {
                    rng.random_range(-2.0..2.0)
                },
                target_return: rng.random_range(-3.0..3.0),
            }
        })
        .collect()
}

fn loss_and_grads(net: &ActorCritic, batch: &[Owned], hyper: &PpoHyper) -> (f64, GradientBundle) {
    let samples: Vec<PpoSample<'_>> = batch
        .iter()
        .map(|o| PpoSample {
            input: &o.input,
            sample: &o.sample,
            old_logprob: o.old_logprob,
            advantage: o.advantage,
            target_return: o.target_return,
        })
        .collect();
    let mut grads = net.zero_grads();
    let loss = ppo_loss_gradients(net, &samples, hyper, &mut grads).unwrap();
    assert_eq!(
        loss.clipped, 0,
        "finite differences need an unclipped ratio"
    );
    (loss.total(hyper), grads)
}

/// Largest relative error over every parameter of `net`.
fn max_relative_error(net: &ActorCritic, batch: &[Owned], hyper: &PpoHyper) -> f64 {
    let (_, analytic) = loss_and_grads(net, batch, hyper);
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (t, grad) in analytic.tensors.iter().enumerate() {
        for (i, &a) in grad.iter().enumerate() {
            let original = probe.tensors()[t][i];
            probe.tensors_mut()[t][i] = original + STEP;
            let plus = loss_and_grads(&probe, batch, hyper).0;
            probe.tensors_mut()[t][i] = original - STEP;
            let minus = loss_and_grads(&probe, batch, hyper).0;
            probe.tensors_mut()[t][i] = original;
            let numeric = (plus - minus) / (2.0 * STEP);
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(SCALE_FLOOR);
            worst = worst.max(err);
        }
    }
    worst
}

fn perturb_head(net: &mut ActorCritic, rng: &mut ChaCha8Rng) {
    for ls in &mut net.head.log_sigma {
        *ls += rng.random_range(-0.5..0.5);
    }
}

/// Largest relative error over `CASES` random networks from `make`.
pub fn check_family(
    name: &str,
    make: impl Fn(&mut ChaCha8Rng) -> ActorCritic,
    hyper: PpoHyper,
    critic_only: bool,
) -> f64 {
    let mut worst: f64 = 0.0;
    for case in 0..CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let mut net = make(&mut rng);
        perturb_head(&mut net, &mut rng);
        let size = rng.random_range(1..5);
        let batch = random_batch(&net, &mut rng, size, critic_only);
        worst = worst.max(max_relative_error(&net, &batch, &hyper));
    }
    let _ = name;
    worst
}
