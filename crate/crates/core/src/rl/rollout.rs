use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::seeding::{derive_seed, SeedStream};
use crate::agent::{
    instinct_input, instinct_reward, mix_actions, InstinctAgent, InstinctStep, PolicyAgent,
    PolicyStep, DEFAULT_INSTINCT_D, DEFAULT_INSTINCT_H,
};
use crate::error::{Error, Result};
use crate::tasks::{shaped_transfer_reward, StepOutcome, TaskConfig, TaskEnv};
use crate::world::{Action, Observation};

/// Which network is being trained; the other one (if any) is frozen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerRole {
    Policy,
    Instinct,
}

/// Constants of the instinct training reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardRouting {
    /// `H`: how strongly a hazard step flips the sign of the reward.
    pub h_penalty: f64,
    /// `D`: overall gain.
    pub d_gain: f64,
}

impl Default for RewardRouting {
    fn default() -> Self {
        RewardRouting {
            h_penalty: DEFAULT_INSTINCT_H,
            d_gain: DEFAULT_INSTINCT_D,
        }
    }
}

/// The networks acting in an episode. Without an instinct the policy action
/// is executed unchanged.
#[derive(Debug, Clone, Copy)]
pub struct AgentPair<'a> {
    pub policy: &'a PolicyAgent,
    pub instinct: Option<&'a InstinctAgent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActingMode {
    pub policy_stochastic: bool,
    pub instinct_stochastic: bool,
}

impl ActingMode {
    pub const DETERMINISTIC: ActingMode = ActingMode {
        policy_stochastic: false,
        instinct_stochastic: false,
    };

    /// Only the learner explores.
    pub fn for_learner(role: LearnerRole) -> Self {
        ActingMode {
            policy_stochastic: role == LearnerRole::Policy,
            instinct_stochastic: role == LearnerRole::Instinct,
        }
    }
}

/// Everything that happened in one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStep {
    pub index: usize,
    /// Observation the networks acted on.
    pub observation: Observation,
    pub policy: PolicyStep,
    pub instinct: Option<InstinctStep>,
    pub executed: Action,
    pub outcome: StepOutcome,
}

impl EpisodeStep {
    /// `m`, or 1.0 when no instinct is present.
    pub fn modulation(&self) -> f64 {
        self.instinct.as_ref().map_or(1.0, |i| i.output.modulation)
    }
}

/// Plays `env` to its horizon, handing every step to `visit`.
pub fn run_episode<R, F>(
    env: &mut TaskEnv,
    agents: AgentPair<'_>,
    mode: ActingMode,
    noise: &mut R,
    mut visit: F,
) -> Result<()>
where
    R: Rng + ?Sized,
    F: FnMut(EpisodeStep, &TaskEnv) -> Result<()>,
{
    let mut observation = env.observe();
    let mut index = 0;
    while !env.is_done() {
        let policy = agents
            .policy
            .act(&observation, mode.policy_stochastic, noise)?;
        let instinct = match agents.instinct {
            Some(inst) => {
                Some(inst.act(&observation, policy.action, mode.instinct_stochastic, noise)?)
            }
            None => None,
        };
        let executed = match &instinct {
            Some(i) => mix_actions(policy.action, i.output.action, i.output.modulation),
            None => policy.action,
        };
        let outcome = env.step(executed)?;
        let next = outcome.observation.clone();
        visit(
            EpisodeStep {
                index,
                observation,
                policy,
                instinct,
                executed,
                outcome,
            },
            env,
        )?;
        observation = next;
        index += 1;
    }
    Ok(())
}

/// One step as seen by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub policy_action: Action,
    /// `m` of the acting instinct, if any.
    pub modulation: Option<f64>,
    pub executed: Action,
    /// The learner's Gaussian draw before clipping.
    pub sample: Vec<f64>,
    pub logprob: f64,
    pub value: f64,
    pub task_reward: f64,
    pub hazard: u8,
    /// Reward the learner is trained on.
    pub reward: f64,
}

impl Transition {
    /// Network input of the learner for this step.
    pub fn learner_input(&self, role: LearnerRole) -> Vec<f64> {
        match role {
            LearnerRole::Policy => self.observation.as_slice().to_vec(),
            LearnerRole::Instinct => instinct_input(&self.observation, self.policy_action),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub env_seed: u64,
    pub transitions: Vec<Transition>,
}

impl Trajectory {
    pub fn collisions(&self) -> u64 {
        self.transitions.iter().map(|t| u64::from(t.hazard)).sum()
    }

    pub fn task_return(&self) -> f64 {
        self.transitions.iter().map(|t| t.task_reward).sum()
    }
}

/// Return targets and advantages aligned with the batch's transition order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageTargets {
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub learner: LearnerRole,
    pub trajectories: Vec<Trajectory>,
    pub targets: Option<AdvantageTargets>,
}

impl RolloutBatch {
    pub fn new(learner: LearnerRole, trajectories: Vec<Trajectory>) -> Self {
        RolloutBatch {
            learner,
            trajectories,
            targets: None,
        }
    }

    pub fn len(&self) -> usize {
        self.trajectories.iter().map(|t| t.transitions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.trajectories.iter().flat_map(|t| t.transitions.iter())
    }

    pub fn collisions(&self) -> u64 {
        self.trajectories.iter().map(Trajectory::collisions).sum()
    }

    pub fn mean_reward(&self) -> f64 {
        self.transitions().map(|t| t.reward).sum::<f64>() / self.len().max(1) as f64
    }

    /// Mean `m` over the batch, `None` when no instinct acted.
    pub fn mean_modulation(&self) -> Option<f64> {
        let ms: Vec<f64> = self.transitions().filter_map(|t| t.modulation).collect();
        (!ms.is_empty()).then(|| ms.iter().sum::<f64>() / ms.len() as f64)
    }
}

/// What to collect in one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutSpec {
    pub task: TaskConfig,
    pub learner: LearnerRole,
    pub routing: RewardRouting,
    pub master_seed: u64,
    pub epoch: u64,
    pub trajectories: usize,
    /// Worker threads; the batch does not depend on this.
    pub workers: usize,
}

fn collect_trajectory(
    spec: &RolloutSpec,
    agents: AgentPair<'_>,
    index: usize,
) -> Result<Trajectory> {
    let env_seed = derive_seed(
        spec.master_seed,
        spec.epoch,
        index as u64,
        SeedStream::Environment,
    );
    let noise_seed = derive_seed(
        spec.master_seed,
        spec.epoch,
        index as u64,
        SeedStream::ActionNoise,
    );
    let mut env = TaskEnv::new(spec.task.clone(), env_seed)?;
    let mut noise = ChaCha8Rng::seed_from_u64(noise_seed);
    let mode = ActingMode::for_learner(spec.learner);
    let mut transitions = Vec::with_capacity(spec.task.horizon);
    run_episode(&mut env, agents, mode, &mut noise, |step, _| {
        let r = step.outcome.reward;
        let h = step.outcome.hazard;
        let (sample, logprob, value, reward) = match spec.learner {
            LearnerRole::Policy => (
                step.policy.sample.to_vec(),
                step.policy.logprob,
                step.policy.value,
                shaped_transfer_reward(r, h, spec.task.hazard_punishment),
            ),
            LearnerRole::Instinct => {
                let inst = step
                    .instinct
                    .as_ref()
                    .expect("instinct learner always has an instinct");
                (
                    inst.sample.to_vec(),
                    inst.logprob,
                    inst.value,
                    instinct_reward(
                        h,
                        inst.output.modulation,
                        r,
                        spec.routing.h_penalty,
                        spec.routing.d_gain,
                    ),
                )
            }
        };
        transitions.push(Transition {
            modulation: step.instinct.as_ref().map(|i| i.output.modulation),
            observation: step.observation,
            policy_action: step.policy.action,
            executed: step.executed,
            sample,
            logprob,
            value,
            task_reward: r,
            hazard: h,
            reward,
        });
        Ok(())
    })?;
    Ok(Trajectory {
        env_seed,
        transitions,
    })
}

/// Collects `spec.trajectories` episodes. Trajectory `i` draws its layout and
/// action noise from streams derived from `(master_seed, epoch, i)`, so the
/// batch is identical for any worker count.
pub fn collect_rollout(spec: &RolloutSpec, agents: AgentPair<'_>) -> Result<RolloutBatch> {
    spec.task.validate()?;
    if spec.trajectories == 0 {
        return Err(Error::Config(
            "trajectories per epoch must be positive".into(),
        ));
    }
    if spec.learner == LearnerRole::Instinct && agents.instinct.is_none() {
        return Err(Error::Config(
            "instinct learner needs an instinct network".into(),
        ));
    }
    let trajectories = if spec.workers <= 1 {
        (0..spec.trajectories)
            .map(|i| collect_trajectory(spec, agents, i))
            .collect::<Result<Vec<_>>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", spec.workers)))?;
        pool.install(|| {
            (0..spec.trajectories)
                .into_par_iter()
                .map(|i| collect_trajectory(spec, agents, i))
                .collect::<Result<Vec<_>>>()
        })?
    };
    Ok(RolloutBatch::new(spec.learner, trajectories))
}
