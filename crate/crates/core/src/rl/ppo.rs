use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{PpoHyper, RolloutBatch};
use crate::agent::ActorCritic;
use crate::error::{Error, Result};
use crate::neural::{adam_step, gaussian_entropy, AdamState, GradientBundle, Parameters};

/// Averages over every minibatch step of one update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub actor_loss: f64,
    /// Mean squared error of the critic (before the value coefficient).
    pub critic_loss: f64,
    pub entropy: f64,
    /// Fraction of samples whose ratio left `[1 − ε, 1 + ε]`.
    pub clip_fraction: f64,
    /// Mean KL(old‖new) estimate of each PPO epoch.
    pub epoch_kl: Vec<f64>,
    /// Mean gradient norm before clipping.
    pub grad_norm: f64,
}

impl UpdateStats {
    pub fn max_epoch_kl(&self) -> f64 {
        self.epoch_kl.iter().copied().fold(0.0, f64::max)
    }
}

/// One training sample in the learner's coordinates.
#[derive(Debug, Clone, Copy)]
pub struct PpoSample<'a> {
    pub input: &'a [f64],
    /// Unclamped Gaussian draw the old log-probability was computed on.
    pub sample: &'a [f64],
    pub old_logprob: f64,
    pub advantage: f64,
    pub target_return: f64,
}

/// Minibatch loss terms; `actor` and `critic` are means over the minibatch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PpoLoss {
    pub actor: f64,
    /// Mean squared error (before the value coefficient).
    pub critic: f64,
    pub entropy: f64,
    /// Samples whose ratio left `[1 − ε, 1 + ε]`.
    pub clipped: usize,
    /// Sum of the per-sample KL(old‖new) estimates `(ρ − 1) − ln ρ`.
    pub kl_sum: f64,
}

impl PpoLoss {
    /// `actor + c_v·critic − c_e·entropy`, the quantity the gradient descends.
    pub fn total(&self, hyper: &PpoHyper) -> f64 {
        self.actor + hyper.value_coef * self.critic - hyper.entropy_coef * self.entropy
    }
}

/// Runs the clipped-surrogate PPO update of `net` on `batch`, which must
/// carry targets. On a numerical failure both `net` and `adam` are restored
/// to their state at entry.
pub fn ppo_update<R: Rng + ?Sized>(
    net: &mut ActorCritic,
    adam: &mut AdamState,
    batch: &RolloutBatch,
    hyper: &PpoHyper,
    rng: &mut R,
) -> Result<UpdateStats> {
    hyper.validate()?;
    let targets = batch
        .targets
        .as_ref()
        .ok_or_else(|| Error::Argument("batch has no advantage targets".into()))?;
    let n = batch.len();
    if n == 0 || targets.advantages.len() != n || targets.returns.len() != n {
        return Err(Error::Shape(format!(
            "batch of {n} transitions with {} advantages and {} returns",
            targets.advantages.len(),
            targets.returns.len()
        )));
    }
    let inputs: Vec<Vec<f64>> = batch
        .transitions()
        .map(|t| t.learner_input(batch.learner))
        .collect();
    let transitions: Vec<_> = batch.transitions().collect();
    if inputs[0].len() != net.input_dim() || transitions[0].sample.len() != net.action_dim() {
        return Err(Error::Shape(format!(
            "batch holds {}-dim inputs and {}-dim actions, network expects {} and {}",
            inputs[0].len(),
            transitions[0].sample.len(),
            net.input_dim(),
            net.action_dim()
        )));
    }

    let saved_net = net.clone();
    let saved_adam = adam.clone();
    let result = (|| {
        let mut order: Vec<usize> = (0..n).collect();
        let chunks = hyper.minibatches.min(n);
        let mut epoch_kl = Vec::with_capacity(hyper.ppo_epochs);
        let (mut actor_loss, mut critic_loss, mut entropy, mut clipped, mut grad_norm) =
            (0.0, 0.0, 0.0, 0, 0.0);
        let mut steps = 0usize;
        for _ in 0..hyper.ppo_epochs {
            order.shuffle(rng);
            let mut kl_sum = 0.0;
            for c in 0..chunks {
                let mut grads = net.zero_grads();
                let minibatch: Vec<PpoSample<'_>> = order[c * n / chunks..(c + 1) * n / chunks]
                    .iter()
                    .map(|&i| PpoSample {
                        input: &inputs[i],
                        sample: &transitions[i].sample,
                        old_logprob: transitions[i].logprob,
                        advantage: targets.advantages[i],
                        target_return: targets.returns[i],
                    })
                    .collect();
                let loss = ppo_loss_gradients(net, &minibatch, hyper, &mut grads)?;
                if !(loss.actor.is_finite() && loss.critic.is_finite() && loss.entropy.is_finite())
                {
                    return Err(Error::Numerical(format!(
                        "loss became non-finite (actor {}, critic {}, entropy {})",
                        loss.actor, loss.critic, loss.entropy
                    )));
                }
                grad_norm += grads.clip_global_norm(hyper.max_grad_norm);
                adam_step(net, &grads, adam, hyper.lr)?;
                let sigma = net.head.sigma();
                if let Some(bad) = sigma.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
                    return Err(Error::Numerical(format!("action std degenerated to {bad}")));
                }
                actor_loss += loss.actor;
                critic_loss += loss.critic;
                entropy += loss.entropy;
                clipped += loss.clipped;
                kl_sum += loss.kl_sum;
                steps += 1;
            }
            epoch_kl.push(kl_sum / n as f64);
        }
        if !net
            .tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
        {
            return Err(Error::Numerical("parameters became non-finite".into()));
        }
        let s = steps as f64;
        Ok(UpdateStats {
            actor_loss: actor_loss / s,
            critic_loss: critic_loss / s,
            entropy: entropy / s,
            clip_fraction: clipped as f64 / (n * hyper.ppo_epochs) as f64,
            epoch_kl,
            grad_norm: grad_norm / s,
        })
    })();
    if result.is_err() {
        *net = saved_net;
        *adam = saved_adam;
    }
    result
}

/// Accumulates the gradient of [`PpoLoss::total`] over `samples` into `grads`:
/// `−min(ρÂ, clip(ρ)Â)` and `(V − R̂)²` averaged, minus the entropy bonus.
pub fn ppo_loss_gradients(
    net: &ActorCritic,
    samples: &[PpoSample<'_>],
    hyper: &PpoHyper,
    grads: &mut GradientBundle,
) -> Result<PpoLoss> {
    if grads.shapes() != net.tensors().iter().map(|t| t.len()).collect::<Vec<_>>() {
        return Err(Error::Shape(
            "gradient bundle does not match the network".into(),
        ));
    }
    let b = samples.len().max(1) as f64;
    let sigma = net.head.sigma();
    let n_actor = net.actor.tensors().len();
    let (actor_g, rest) = grads.tensors.split_at_mut(n_actor);
    let (head_g, critic_g) = rest.split_at_mut(1);
    let head_g = &mut head_g[0];

    let dims = net.action_dim();
    let mut upstream = vec![0.0; dims];
    let mut dlogp_dmean = vec![0.0; dims];
    let mut dlogp_dlogsigma = vec![0.0; dims];
    let mut dmean_draw = vec![0.0; dims];
    let mut loss = PpoLoss {
        entropy: gaussian_entropy(&sigma)?,
        ..Default::default()
    };
    for s in samples {
        if s.sample.len() != dims {
            return Err(Error::Shape(format!(
                "{}-dim sample for a {dims}-dim head",
                s.sample.len()
            )));
        }
        let adv = s.advantage;
        let (raw, cache) = net.actor.forward(s.input)?;

        let mut logp = 0.0;
        for k in 0..dims {
            let (mean, dm) = net.transforms[k].apply(raw[k]);
            let z = (s.sample[k] - mean) / sigma[k];
            logp += -0.5 * z * z - net.head.log_sigma[k] - 0.5 * (2.0 * std::f64::consts::PI).ln();
            dlogp_dmean[k] = z / sigma[k];
            dlogp_dlogsigma[k] = z * z - 1.0;
            dmean_draw[k] = dm;
        }

        let log_ratio = logp - s.old_logprob;
        let ratio = log_ratio.exp();
        let clipped_ratio = ratio.clamp(1.0 - hyper.clip, 1.0 + hyper.clip);
        loss.actor -= (ratio * adv).min(clipped_ratio * adv) / b;
        if (ratio - 1.0).abs() > hyper.clip {
            loss.clipped += 1;
        }
        loss.kl_sum += (ratio - 1.0) - log_ratio;

        // The clipped branch is constant in the parameters.
        let clip_active =
            (adv > 0.0 && ratio > 1.0 + hyper.clip) || (adv < 0.0 && ratio < 1.0 - hyper.clip);
        let dloss_dlogp = if clip_active { 0.0 } else { -ratio * adv / b };
        for k in 0..dims {
            upstream[k] = dloss_dlogp * dlogp_dmean[k] * dmean_draw[k];
            head_g[k] += dloss_dlogp * dlogp_dlogsigma[k];
        }
        net.actor.backward_into(&cache, &upstream, actor_g)?;

        let (value, vcache) = net.critic.forward(s.input)?;
        let err = value[0] - s.target_return;
        loss.critic += err * err / b;
        net.critic
            .backward_into(&vcache, &[hyper.value_coef * 2.0 * err / b], critic_g)?;
    }
    for g in head_g.iter_mut() {
        *g -= hyper.entropy_coef;
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::HeadTransform;
    use crate::rl::{AdvantageTargets, LearnerRole, Trajectory, Transition};
    use crate::world::{Action, Observation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn policy_net(seed: u64) -> ActorCritic {
        let t = vec![HeadTransform::Scaled { limit: 0.1 }; 2];
        ActorCritic::new(85, &[8], t, 0.6, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn batch_from(net: &ActorCritic, n: usize, seed: u64) -> RolloutBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let transitions = (0..n)
            .map(|_| {
                let obs: Vec<f64> = (0..85).map(|_| rng.random_range(0.0..1.0)).collect();
                let step = net.act(&obs, true, &mut rng).unwrap();
                Transition {
                    observation: Observation::try_from(obs).unwrap(),
                    policy_action: Action::from_slice(&step.executed),
                    modulation: None,
                    executed: Action::from_slice(&step.executed),
                    sample: step.sample,
                    logprob: step.logprob,
                    value: step.value,
                    task_reward: 0.0,
                    hazard: 0,
                    reward: 0.0,
                }
            })
            .collect();
        RolloutBatch::new(
            LearnerRole::Policy,
            vec![Trajectory {
                env_seed: 0,
                transitions,
            }],
        )
    }

    #[test]
    fn zero_advantage_without_entropy_leaves_actor_untouched() {
        let mut net = policy_net(1);
        let mut batch = batch_from(&net, 40, 2);
        let values: Vec<f64> = batch.transitions().map(|t| t.value).collect();
        batch.targets = Some(AdvantageTargets {
            returns: values,
            advantages: vec![0.0; 40],
            normalized: true,
        });
        let before = net.clone();
        let hyper = PpoHyper {
            entropy_coef: 0.0,
            minibatches: 4,
            ..Default::default()
        };
        let mut adam = AdamState::new(&net);
        let stats = ppo_update(
            &mut net,
            &mut adam,
            &batch,
            &hyper,
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap();
        assert_eq!(net, before);
        assert_eq!(stats.actor_loss, 0.0);
        assert_eq!(stats.clip_fraction, 0.0);
        assert!(stats.critic_loss < 1e-24);
    }

    #[test]
    fn entropy_term_only_moves_log_sigma() {
        let mut net = policy_net(4);
        let mut batch = batch_from(&net, 16, 5);
        let values: Vec<f64> = batch.transitions().map(|t| t.value).collect();
        batch.targets = Some(AdvantageTargets {
            returns: values,
            advantages: vec![0.0; 16],
            normalized: true,
        });
        let before = net.clone();
        let mut adam = AdamState::new(&net);
        let hyper = PpoHyper {
            ppo_epochs: 1,
            minibatches: 1,
            ..Default::default()
        };
        ppo_update(
            &mut net,
            &mut adam,
            &batch,
            &hyper,
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap();
        assert_eq!(net.actor, before.actor);
        assert_eq!(net.critic, before.critic);
        // One Adam step of size lr against the entropy gradient.
        for (a, b) in net.head.log_sigma.iter().zip(&before.head.log_sigma) {
            assert!((a - b - 0.001).abs() < 1e-8);
        }
    }

    #[test]
    fn missing_targets_rejected() {
        let mut net = policy_net(1);
        let batch = batch_from(&net, 4, 2);
        let mut adam = AdamState::new(&net);
        let r = ppo_update(
            &mut net,
            &mut adam,
            &batch,
            &PpoHyper::default(),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn non_finite_targets_restore_state() {
        let mut net = policy_net(1);
        let mut batch = batch_from(&net, 8, 2);
        batch.targets = Some(AdvantageTargets {
            returns: vec![f64::NAN; 8],
            advantages: vec![1.0; 8],
            normalized: true,
        });
        let before = net.clone();
        let mut adam = AdamState::new(&net);
        let r = ppo_update(
            &mut net,
            &mut adam,
            &batch,
            &PpoHyper::default(),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(matches!(r, Err(Error::Numerical(_))));
        assert_eq!(net, before);
        assert_eq!(adam.step(), 0);
    }

    #[test]
    fn same_seed_same_update() {
        let run = || {
            let mut net = policy_net(7);
            let mut batch = batch_from(&net, 50, 8);
            let adv: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
            batch.targets = Some(AdvantageTargets {
                returns: adv.clone(),
                advantages: adv,
                normalized: false,
            });
            let mut adam = AdamState::new(&net);
            let s = ppo_update(
                &mut net,
                &mut adam,
                &batch,
                &PpoHyper::default(),
                &mut ChaCha8Rng::seed_from_u64(9),
            )
            .unwrap();
            (net, s)
        };
        assert_eq!(run(), run());
    }
}
