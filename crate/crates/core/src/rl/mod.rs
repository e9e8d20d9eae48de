//! PPO machinery: rollout collection, GAE, and the clipped-surrogate update,
//! applied to whichever network is learning in the current phase.

mod advantage;
mod normalize;
mod ppo;
mod rollout;
mod seeding;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use advantage::{compute_returns_advantages, discounted_return, gae};
pub use normalize::{RewardScaler, RunningMoments, SCALED_REWARD_CLIP};
pub use ppo::{ppo_loss_gradients, ppo_update, PpoLoss, PpoSample, UpdateStats};
pub use rollout::{
    collect_rollout, run_episode, ActingMode, AdvantageTargets, AgentPair, EpisodeStep,
    LearnerRole, RewardRouting, RolloutBatch, RolloutSpec, Trajectory, Transition,
};
pub use seeding::{derive_seed, SeedStream};

/// PPO hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpoHyper {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub ppo_epochs: usize,
    pub minibatches: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub lr: f64,
    pub max_grad_norm: f64,
    /// Scale learner rewards by the running std of the discounted return.
    #[serde(default)]
    pub reward_scaling: bool,
}

impl Default for PpoHyper {
    fn default() -> Self {
        PpoHyper {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            ppo_epochs: 4,
            minibatches: 32,
            value_coef: 0.5,
            entropy_coef: 0.01,
            lr: 0.001,
            max_grad_norm: 0.5,
            reward_scaling: false,
        }
    }
}

impl PpoHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: String| Err(Error::Config(format!("{name} out of range: {v}")));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", self.gamma.to_string());
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda", self.gae_lambda.to_string());
        }
        if !(self.clip > 0.0 && self.clip.is_finite()) {
            return bad("clip", self.clip.to_string());
        }
        if self.ppo_epochs == 0 {
            return bad("ppo_epochs", "0".into());
        }
        if self.minibatches == 0 {
            return bad("minibatches", "0".into());
        }
        if !(self.value_coef >= 0.0 && self.value_coef.is_finite()) {
            return bad("value_coef", self.value_coef.to_string());
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return bad("entropy_coef", self.entropy_coef.to_string());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr", self.lr.to_string());
        }
        if self.max_grad_norm.is_nan() || self.max_grad_norm <= 0.0 {
            return bad("max_grad_norm", self.max_grad_norm.to_string());
        }
        Ok(())
    }
}
