use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Phase, PhaseConfig, TransferMode};
use crate::agent::{InstinctAgent, PolicyAgent};
use crate::checkpoint::{Checkpoint, CheckpointRole};
use crate::error::{Error, Result};
use crate::neural::AdamState;
use crate::rl::{
    collect_rollout, compute_returns_advantages, derive_seed, ppo_update, run_episode, ActingMode,
    AgentPair, LearnerRole, RewardScaler, RolloutSpec, SeedStream,
};
use crate::tasks::TaskEnv;

/// One line of training metrics, written after every update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub update: usize,
    /// Environment steps collected so far, this update included.
    pub env_steps: u64,
    /// Mean per-step reward the learner was trained on.
    pub mean_reward: f64,
    /// Hazard steps over all exploration episodes of this update.
    pub collisions: u64,
    /// Task return of one deterministic episode after the update.
    pub eval_return: f64,
    pub mean_modulation: Option<f64>,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Receives each metrics row as soon as it exists.
pub type MetricsSink<'a> = &'a mut dyn FnMut(&MetricsRow) -> Result<()>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub rows: Vec<MetricsRow>,
    pub cumulative_collisions: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutput {
    pub checkpoint: Checkpoint,
    pub result: RunResult,
}

/// Networks a transfer run starts from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransferArtifacts {
    /// Phase-2 checkpoint (`ir2l`).
    pub instinct: Option<Checkpoint>,
    /// Baseline pre-training checkpoint (`pretrained_baseline`).
    pub pretrained_policy: Option<Checkpoint>,
}

fn fresh_rng(cfg: &PhaseConfig, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(cfg.phase_seed(), 0, index, SeedStream::Init))
}

fn eval_episode(cfg: &PhaseConfig, seed: u64, epoch: u64, agents: AgentPair<'_>) -> Result<f64> {
    let env_seed = derive_seed(seed, epoch, 0, SeedStream::Evaluation);
    let mut env = TaskEnv::new(cfg.task.clone(), env_seed)?;
    let mut noise = ChaCha8Rng::seed_from_u64(0);
    let mut total = 0.0;
    run_episode(
        &mut env,
        agents,
        ActingMode::DETERMINISTIC,
        &mut noise,
        |step, _| {
            total += step.outcome.reward;
            Ok(())
        },
    )?;
    Ok(total)
}

/// PPO on whichever network `role` names; the other stays frozen.
fn train_loop(
    cfg: &PhaseConfig,
    role: LearnerRole,
    policy: &mut PolicyAgent,
    mut instinct: Option<&mut InstinctAgent>,
    sink: MetricsSink<'_>,
) -> Result<RunResult> {
    let seed = cfg.phase_seed();
    let mut adam = match role {
        LearnerRole::Policy => AdamState::new(&policy.net),
        LearnerRole::Instinct => {
            let inst = instinct
                .as_deref()
                .ok_or_else(|| Error::Config("instinct training needs an instinct".into()))?;
            AdamState::new(&inst.net)
        }
    };
    let mut rows = Vec::with_capacity(cfg.epochs);
    let mut env_steps = 0u64;
    let mut cumulative = 0u64;
    let mut scaler = RewardScaler::default();
    for epoch in 0..cfg.epochs as u64 {
        let spec = RolloutSpec {
            task: cfg.task.clone(),
            learner: role,
            routing: cfg.routing,
            master_seed: seed,
            epoch,
            trajectories: cfg.trajectories_per_epoch,
            workers: cfg.workers,
        };
        let mut batch = collect_rollout(
            &spec,
            AgentPair {
                policy,
                instinct: instinct.as_deref(),
            },
        )?;
        let mean_reward = batch.mean_reward();
        if cfg.ppo.reward_scaling {
            scaler.scale_batch(&mut batch, cfg.ppo.gamma);
        }
        compute_returns_advantages(&mut batch, &cfg.ppo)?;
        let mut shuffle =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, epoch, 0, SeedStream::Shuffle));
        let net = match role {
            LearnerRole::Policy => &mut policy.net,
            LearnerRole::Instinct => &mut instinct.as_deref_mut().expect("checked above").net,
        };
        let stats = ppo_update(net, &mut adam, &batch, &cfg.ppo, &mut shuffle)?;

        let eval_return = eval_episode(
            cfg,
            seed,
            epoch,
            AgentPair {
                policy,
                instinct: instinct.as_deref(),
            },
        )?;
        let collisions = batch.collisions();
        env_steps += batch.len() as u64;
        cumulative += collisions;
        let row = MetricsRow {
            update: epoch as usize,
            env_steps,
            mean_reward,
            collisions,
            eval_return,
            mean_modulation: batch.mean_modulation(),
            actor_loss: stats.actor_loss,
            critic_loss: stats.critic_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
            approx_kl: stats.epoch_kl.iter().sum::<f64>() / stats.epoch_kl.len() as f64,
        };
        sink(&row)?;
        rows.push(row);
    }
    Ok(RunResult {
        rows,
        cumulative_collisions: cumulative,
    })
}

fn expect_phase(cfg: &PhaseConfig, phase: Phase) -> Result<()> {
    cfg.validate()?;
    if cfg.phase != phase {
        return Err(Error::Config(format!(
            "expected a {phase:?} config, got {:?}",
            cfg.phase
        )));
    }
    Ok(())
}

fn require_role(ckpt: &Checkpoint, role: CheckpointRole, what: &str) -> Result<()> {
    ckpt.validate()?;
    if ckpt.role != role {
        return Err(Error::Config(format!(
            "{what} must be a {role:?} checkpoint, got {:?}",
            ckpt.role
        )));
    }
    Ok(())
}

/// Trains a fresh policy on hazard-free Goal.
pub fn pretrain_policy_phase1(cfg: &PhaseConfig, sink: MetricsSink<'_>) -> Result<PhaseOutput> {
    expect_phase(cfg, Phase::Phase1)?;
    let mut policy = PolicyAgent::new(&cfg.hidden, &mut fresh_rng(cfg, 0))?;
    let result = train_loop(cfg, LearnerRole::Policy, &mut policy, None, sink)?;
    Ok(PhaseOutput {
        checkpoint: Checkpoint::policy_only(policy),
        result,
    })
}

/// Trains a fresh instinct next to the frozen, deterministic phase-1 policy.
pub fn pretrain_instinct_phase2(
    cfg: &PhaseConfig,
    phase1: &Checkpoint,
    sink: MetricsSink<'_>,
) -> Result<PhaseOutput> {
    expect_phase(cfg, Phase::Phase2)?;
    require_role(phase1, CheckpointRole::PolicyOnly, "the phase-1 artifact")?;
    let mut policy = phase1.policy.clone();
    let mut instinct =
        InstinctAgent::new(&cfg.hidden, cfg.instinct_m_bias, &mut fresh_rng(cfg, 1))?;
    let result = train_loop(
        cfg,
        LearnerRole::Instinct,
        &mut policy,
        Some(&mut instinct),
        sink,
    )?;
    Ok(PhaseOutput {
        checkpoint: Checkpoint::with_instinct(policy, instinct),
        result,
    })
}

/// Continues training the phase-1 policy on hazardous Goal with the shaped
/// reward, giving the plain-policy baseline the same total pre-training
/// budget as policy plus instinct.
pub fn train_pretrained_baseline(
    cfg: &PhaseConfig,
    phase1: &Checkpoint,
    sink: MetricsSink<'_>,
) -> Result<PhaseOutput> {
    expect_phase(cfg, Phase::PretrainedBaseline)?;
    require_role(phase1, CheckpointRole::PolicyOnly, "the phase-1 artifact")?;
    let mut policy = phase1.policy.clone();
    let result = train_loop(cfg, LearnerRole::Policy, &mut policy, None, sink)?;
    Ok(PhaseOutput {
        checkpoint: Checkpoint::policy_only(policy),
        result,
    })
}

/// Trains a policy on Buttons or Push in the configured mode.
pub fn train_transfer(
    cfg: &PhaseConfig,
    artifacts: &TransferArtifacts,
    sink: MetricsSink<'_>,
) -> Result<PhaseOutput> {
    expect_phase(cfg, Phase::Transfer)?;
    let mode = cfg.mode.expect("validated");
    let fresh = || PolicyAgent::new(&cfg.hidden, &mut fresh_rng(cfg, 0));
    match mode {
        TransferMode::Ir2l => {
            let ckpt = artifacts
                .instinct
                .as_ref()
                .ok_or_else(|| Error::Config("ir2l transfer needs a phase-2 checkpoint".into()))?;
            require_role(
                ckpt,
                CheckpointRole::PolicyPlusInstinct,
                "the phase-2 artifact",
            )?;
            let mut instinct = ckpt.instinct.clone().expect("validated");
            let mut policy = fresh()?;
            // The instinct is borrowed mutably only to share the loop; it is never updated.
            let result = train_loop(
                cfg,
                LearnerRole::Policy,
                &mut policy,
                Some(&mut instinct),
                sink,
            )?;
            Ok(PhaseOutput {
                checkpoint: Checkpoint::with_instinct(policy, instinct),
                result,
            })
        }
        TransferMode::RandomBaseline => {
            let mut policy = fresh()?;
            let result = train_loop(cfg, LearnerRole::Policy, &mut policy, None, sink)?;
            Ok(PhaseOutput {
                checkpoint: Checkpoint::policy_only(policy),
                result,
            })
        }
        TransferMode::PretrainedBaseline => {
            let ckpt = artifacts.pretrained_policy.as_ref().ok_or_else(|| {
                Error::Config(
                    "pretrained_baseline transfer needs a pre-trained policy checkpoint".into(),
                )
            })?;
            require_role(
                ckpt,
                CheckpointRole::PolicyOnly,
                "the pre-trained baseline artifact",
            )?;
            let mut policy = ckpt.policy.clone();
            let result = train_loop(cfg, LearnerRole::Policy, &mut policy, None, sink)?;
            Ok(PhaseOutput {
                checkpoint: Checkpoint::policy_only(policy),
                result,
            })
        }
    }
}
