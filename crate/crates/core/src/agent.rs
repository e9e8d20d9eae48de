//! The two networks of the agent and how their actions combine.
//!
//! The policy proposes `a^P`. The instinct sees the observation together
//! with `a^P` and answers with its own action `a^I` and a modulation value
//! `m ∈ [0, 1]`; the executed action is `m·a^P + (1 − m)·a^I`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{gaussian_logprob, gaussian_sample, GaussianHead, Mlp, Parameters};
use crate::world::{Action, Observation, ACTION_LIMIT, OBS_DIM};

pub const POLICY_ACTION_DIM: usize = 2;
pub const INSTINCT_INPUT_DIM: usize = OBS_DIM + POLICY_ACTION_DIM;
pub const INSTINCT_OUTPUT_DIM: usize = 3;
pub const INITIAL_SIGMA: f64 = 0.6;
/// Instinct reward constants `H` and `D`.
pub const DEFAULT_INSTINCT_H: f64 = 100.0;
pub const DEFAULT_INSTINCT_D: f64 = 15.0;

/// Maps one raw actor output to the mean of its Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HeadTransform {
    /// `limit · tanh(x)`
    Scaled { limit: f64 },
    /// `(tanh(x + bias) + 1) / 2`
    Unit { bias: f64 },
}

impl HeadTransform {
    /// Returns `(mean, d mean / d raw)`.
    #[inline]
    pub fn apply(self, raw: f64) -> (f64, f64) {
        match self {
            HeadTransform::Scaled { limit } => {
                let t = raw.tanh();
                (limit * t, limit * (1.0 - t * t))
            }
            HeadTransform::Unit { bias } => {
                let t = (raw + bias).tanh();
                (0.5 * (t + 1.0), 0.5 * (1.0 - t * t))
            }
        }
    }

    fn clip(self, value: f64) -> f64 {
        match self {
            HeadTransform::Scaled { limit } => value.clamp(-limit, limit),
            HeadTransform::Unit { .. } => value.clamp(0.0, 1.0),
        }
    }
}

/// Actor (Gaussian policy) and critic as two separate networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorCritic {
    pub actor: Mlp,
    pub head: GaussianHead,
    pub critic: Mlp,
    pub transforms: Vec<HeadTransform>,
}

/// Result of evaluating an [`ActorCritic`] on one input.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorStep {
    pub mean: Vec<f64>,
    /// The Gaussian draw before clamping (equals `mean` when deterministic).
    pub sample: Vec<f64>,
    /// Sample clipped to each head's valid range.
    pub executed: Vec<f64>,
    pub logprob: f64,
    pub value: f64,
}

impl ActorCritic {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        transforms: Vec<HeadTransform>,
        sigma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut actor_sizes = vec![input_dim];
        actor_sizes.extend_from_slice(hidden);
        let mut critic_sizes = actor_sizes.clone();
        actor_sizes.push(transforms.len());
        critic_sizes.push(1);
        let actor = Mlp::init(&actor_sizes, rng)?;
        let critic = Mlp::init(&critic_sizes, rng)?;
        let head = GaussianHead::new(transforms.len(), sigma)?;
        Ok(ActorCritic {
            actor,
            head,
            critic,
            transforms,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.transforms.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.transforms.len();
        if self.actor.output_dim() != n || self.head.dim() != n {
            return Err(Error::Shape(format!(
                "actor outputs {}, head has {}, {} transforms",
                self.actor.output_dim(),
                self.head.dim(),
                n
            )));
        }
        if self.critic.output_dim() != 1 || self.critic.input_dim() != self.actor.input_dim() {
            return Err(Error::Shape(
                "critic must map the actor input to one value".into(),
            ));
        }
        if !self.head.log_sigma.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("non-finite log sigma".into()));
        }
        Ok(())
    }

    /// Gaussian means for `input` (transform applied to raw actor outputs).
    pub fn mean(&self, input: &[f64]) -> Result<Vec<f64>> {
        let raw = self.actor.predict(input)?;
        let mean: Vec<f64> = raw
            .iter()
            .zip(&self.transforms)
            .map(|(&r, t)| t.apply(r).0)
            .collect();
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("actor produced {mean:?}")));
        }
        Ok(mean)
    }

    pub fn value(&self, input: &[f64]) -> Result<f64> {
        let v = self.critic.predict(input)?[0];
        if !v.is_finite() {
            return Err(Error::Numerical(format!("critic produced {v}")));
        }
        Ok(v)
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        input: &[f64],
        stochastic: bool,
        rng: &mut R,
    ) -> Result<ActorStep> {
        let mean = self.mean(input)?;
        let sigma = self.head.sigma();
        let sample = if stochastic {
            gaussian_sample(&mean, &sigma, rng)?
        } else {
            mean.clone()
        };
        let logprob = gaussian_logprob(&mean, &sigma, &sample)?;
        let executed = sample
            .iter()
            .zip(&self.transforms)
            .map(|(&s, t)| t.clip(s))
            .collect();
        let value = self.value(input)?;
        Ok(ActorStep {
            mean,
            sample,
            executed,
            logprob,
            value,
        })
    }
}

impl Parameters for ActorCritic {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.actor.tensors();
        t.extend(self.head.tensors());
        t.extend(self.critic.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.actor.tensors_mut();
        t.extend(self.head.tensors_mut());
        t.extend(self.critic.tensors_mut());
        t
    }
}

/// The task-learning policy: 85-dim observation to a 2-dim action in `[-0.1, 0.1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyAgent {
    pub net: ActorCritic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStep {
    pub action: Action,
    pub sample: [f64; POLICY_ACTION_DIM],
    pub logprob: f64,
    pub value: f64,
}

impl PolicyAgent {
    pub fn new<R: Rng + ?Sized>(hidden: &[usize], rng: &mut R) -> Result<Self> {
        let transforms = vec![
            HeadTransform::Scaled {
                limit: ACTION_LIMIT
            };
            POLICY_ACTION_DIM
        ];
        Ok(PolicyAgent {
            net: ActorCritic::new(OBS_DIM, hidden, transforms, INITIAL_SIGMA, rng)?,
        })
    }

    pub fn from_net(net: ActorCritic) -> Result<Self> {
        net.validate()?;
        if net.input_dim() != OBS_DIM || net.action_dim() != POLICY_ACTION_DIM {
            return Err(Error::Shape(format!(
                "policy must map {OBS_DIM} inputs to {POLICY_ACTION_DIM} actions, got {} -> {}",
                net.input_dim(),
                net.action_dim()
            )));
        }
        Ok(PolicyAgent { net })
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &Observation,
        stochastic: bool,
        rng: &mut R,
    ) -> Result<PolicyStep> {
        let step = self.net.act(obs.as_slice(), stochastic, rng)?;
        Ok(PolicyStep {
            action: Action::from_slice(&step.executed),
            sample: [step.sample[0], step.sample[1]],
            logprob: step.logprob,
            value: step.value,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstinctOutput {
    pub action: Action,
    /// `m ∈ [0, 1]`: 1 lets the policy through, 0 hands control to the instinct.
    pub modulation: f64,
}

/// The hazard-avoiding instinct: `⟨observation, a^P⟩` to `(a^I, m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstinctAgent {
    pub net: ActorCritic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstinctStep {
    pub output: InstinctOutput,
    pub sample: [f64; INSTINCT_OUTPUT_DIM],
    pub logprob: f64,
    pub value: f64,
}

/// Concatenates the observation and the proposed policy action.
pub fn instinct_input(obs: &Observation, policy_action: Action) -> Vec<f64> {
    let mut input = Vec::with_capacity(INSTINCT_INPUT_DIM);
    input.extend_from_slice(obs.as_slice());
    input.push(policy_action.forward);
    input.push(policy_action.turn);
    input
}

impl InstinctAgent {
    /// `m_bias` shifts the modulation head before its squashing; 0 starts the
    /// instinct half engaged (`m = 0.5` for a zero network).
    pub fn new<R: Rng + ?Sized>(hidden: &[usize], m_bias: f64, rng: &mut R) -> Result<Self> {
        let transforms = vec![
            HeadTransform::Scaled {
                limit: ACTION_LIMIT,
            },
            HeadTransform::Scaled {
                limit: ACTION_LIMIT,
            },
            HeadTransform::Unit { bias: m_bias },
        ];
        Ok(InstinctAgent {
            net: ActorCritic::new(INSTINCT_INPUT_DIM, hidden, transforms, INITIAL_SIGMA, rng)?,
        })
    }

    pub fn from_net(net: ActorCritic) -> Result<Self> {
        net.validate()?;
        if net.input_dim() != INSTINCT_INPUT_DIM || net.action_dim() != INSTINCT_OUTPUT_DIM {
            return Err(Error::Shape(format!(
                "instinct must map {INSTINCT_INPUT_DIM} inputs to {INSTINCT_OUTPUT_DIM} outputs, got {} -> {}",
                net.input_dim(),
                net.action_dim()
            )));
        }
        Ok(InstinctAgent { net })
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &Observation,
        policy_action: Action,
        stochastic: bool,
        rng: &mut R,
    ) -> Result<InstinctStep> {
        let input = instinct_input(obs, policy_action);
        let step = self.net.act(&input, stochastic, rng)?;
        Ok(InstinctStep {
            output: InstinctOutput {
                action: Action::new(step.executed[0], step.executed[1]),
                modulation: step.executed[2],
            },
            sample: [step.sample[0], step.sample[1], step.sample[2]],
            logprob: step.logprob,
            value: step.value,
        })
    }
}

/// `m · a^P + (1 − m) · a^I`, componentwise.
pub fn mix_actions(policy: Action, instinct: Action, modulation: f64) -> Action {
    Action::new(
        modulation * policy.forward + (1.0 - modulation) * instinct.forward,
        modulation * policy.turn + (1.0 - modulation) * instinct.turn,
    )
}

/// Instinct training reward `(1 − h·H) · m · r_t · D`.
pub fn instinct_reward(
    hazard: u8,
    modulation: f64,
    task_reward: f64,
    h_penalty: f64,
    d_gain: f64,
) -> f64 {
    (1.0 - f64::from(hazard) * h_penalty) * modulation * task_reward * d_gain
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Mlp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_policy() -> PolicyAgent {
        let mut p = PolicyAgent::new(&[8], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        p.net.actor = Mlp::zeros(&[OBS_DIM, 8, 2]).unwrap();
        p
    }

    fn zero_instinct() -> InstinctAgent {
        let mut i = InstinctAgent::new(&[8], 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        i.net.actor = Mlp::zeros(&[INSTINCT_INPUT_DIM, 8, 3]).unwrap();
        i
    }

    #[test]
    fn zero_policy_deterministic_is_still() {
        let step = zero_policy()
            .act(
                &Observation::zeros(),
                false,
                &mut ChaCha8Rng::seed_from_u64(1),
            )
            .unwrap();
        assert_eq!(step.action, Action::ZERO);
    }

    #[test]
    fn stochastic_policy_reproducible_and_logprob_on_raw_sample() {
        let p = PolicyAgent::new(&[16, 16], &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let obs = Observation::zeros();
        let a = p
            .act(&obs, true, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        let b = p
            .act(&obs, true, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        assert_eq!(a, b);
        let mean = p.net.mean(obs.as_slice()).unwrap();
        let expected = gaussian_logprob(&mean, &p.net.head.sigma(), &a.sample).unwrap();
        assert_eq!(a.logprob, expected);
        assert!(a.action.forward.abs() <= ACTION_LIMIT && a.action.turn.abs() <= ACTION_LIMIT);
    }

    #[test]
    fn zero_instinct_half_engaged() {
        let step = zero_instinct()
            .act(
                &Observation::zeros(),
                Action::new(0.1, -0.1),
                false,
                &mut ChaCha8Rng::seed_from_u64(0),
            )
            .unwrap();
        assert_eq!(step.output.action, Action::ZERO);
        assert_eq!(step.output.modulation, 0.5);
    }

    #[test]
    fn modulation_sample_is_clipped() {
        let t = HeadTransform::Unit { bias: 0.0 };
        assert_eq!(t.clip(1.3), 1.0);
        assert_eq!(t.clip(-0.2), 0.0);
        let inst = InstinctAgent::new(&[8], 0.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let s = inst
                .act(&Observation::zeros(), Action::ZERO, true, &mut rng)
                .unwrap();
            assert!((0.0..=1.0).contains(&s.output.modulation));
        }
    }

    #[test]
    fn instinct_input_tail_is_policy_action() {
        let obs = Observation::try_from((0..OBS_DIM).map(|i| i as f64 * 0.01).collect::<Vec<_>>())
            .unwrap();
        let a = instinct_input(&obs, Action::new(0.05, -0.07));
        let b = instinct_input(&obs, Action::new(-0.02, 0.03));
        assert_eq!(a[..OBS_DIM], b[..OBS_DIM]);
        assert_eq!(&a[OBS_DIM..], &[0.05, -0.07]);
        assert_eq!(&b[OBS_DIM..], &[-0.02, 0.03]);
    }

    #[test]
    fn mixing_identities() {
        let p = Action::new(0.1, -0.1);
        let i = Action::new(0.0, 0.05);
        assert_eq!(mix_actions(p, i, 1.0), p);
        assert_eq!(mix_actions(p, i, 0.0), i);
        let m = mix_actions(p, i, 0.3);
        assert!((m.forward - 0.03).abs() < 1e-15 && (m.turn - 0.005).abs() < 1e-15);
    }

    #[test]
    fn instinct_reward_values() {
        assert_eq!(instinct_reward(0, 1.0, 0.5, 100.0, 15.0), 7.5);
        assert!((instinct_reward(1, 0.5, 0.1, 100.0, 15.0) + 74.25).abs() < 1e-12);
        assert_eq!(instinct_reward(1, 0.0, 0.3, 100.0, 15.0), 0.0);
        assert_eq!(instinct_reward(0, 0.0, -0.3, 100.0, 15.0), 0.0);
    }

    #[test]
    fn deterministic_mode_ignores_rng() {
        let inst = InstinctAgent::new(&[8], 0.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let a = inst
            .act(
                &Observation::zeros(),
                Action::ZERO,
                false,
                &mut ChaCha8Rng::seed_from_u64(1),
            )
            .unwrap();
        let b = inst
            .act(
                &Observation::zeros(),
                Action::ZERO,
                false,
                &mut ChaCha8Rng::seed_from_u64(2),
            )
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn from_net_checks_dimensions() {
        let inst = InstinctAgent::new(&[8], 0.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(PolicyAgent::from_net(inst.net.clone()).is_err());
        assert!(InstinctAgent::from_net(inst.net).is_ok());
    }
}
