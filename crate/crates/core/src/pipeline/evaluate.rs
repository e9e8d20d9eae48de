use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::rl::{derive_seed, run_episode, ActingMode, AgentPair, SeedStream};
use crate::stats::Quartiles;
use crate::tasks::{TaskConfig, TaskEnv};

pub const DEFAULT_EVAL_EPISODES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub task: TaskConfig,
    pub episodes: usize,
    pub seed: u64,
    /// Subtract `H_t` per hazard step from the reported returns.
    pub count_hazard_reward: bool,
}

impl EvalConfig {
    pub fn new(task: TaskConfig, seed: u64) -> Self {
        EvalConfig {
            task,
            episodes: DEFAULT_EVAL_EPISODES,
            seed,
            count_hazard_reward: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub returns: Vec<f64>,
    /// Hazard steps per episode.
    pub collisions: Vec<u64>,
    pub return_quartiles: Quartiles,
    pub collision_quartiles: Quartiles,
}

/// Deterministic evaluation. Episode `i` uses the layout seeded by
/// `(seed, i)`, so two agent sets evaluated with one config see the same
/// layouts.
pub fn evaluate_agents(agents: AgentPair<'_>, cfg: &EvalConfig) -> Result<EvalStats> {
    cfg.task.validate()?;
    if cfg.episodes == 0 {
        return Err(Error::Config(
            "evaluation needs at least one episode".into(),
        ));
    }
    let mut returns = Vec::with_capacity(cfg.episodes);
    let mut collisions = Vec::with_capacity(cfg.episodes);
    let mut noise = ChaCha8Rng::seed_from_u64(0);
    for i in 0..cfg.episodes as u64 {
        let mut env = TaskEnv::new(
            cfg.task.clone(),
            derive_seed(cfg.seed, 0, i, SeedStream::Evaluation),
        )?;
        let (mut ret, mut hits) = (0.0, 0u64);
        run_episode(
            &mut env,
            agents,
            ActingMode::DETERMINISTIC,
            &mut noise,
            |step, _| {
                let h = step.outcome.hazard;
                ret += step.outcome.reward;
                if cfg.count_hazard_reward {
                    ret -= f64::from(h) * cfg.task.hazard_punishment;
                }
                hits += u64::from(h);
                Ok(())
            },
        )?;
        returns.push(ret);
        collisions.push(hits);
    }
    let as_f64: Vec<f64> = collisions.iter().map(|&c| c as f64).collect();
    Ok(EvalStats {
        return_quartiles: Quartiles::of(&returns),
        collision_quartiles: Quartiles::of(&as_f64),
        returns,
        collisions,
    })
}

/// Evaluates a checkpoint with its instinct, if it has one.
pub fn evaluate(checkpoint: &Checkpoint, cfg: &EvalConfig) -> Result<EvalStats> {
    checkpoint.validate()?;
    evaluate_agents(
        AgentPair {
            policy: &checkpoint.policy,
            instinct: checkpoint.instinct.as_ref(),
        },
        cfg,
    )
}
