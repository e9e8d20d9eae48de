//! Fixtures for the benchmarks in `benches/`.

use instinct_core::pipeline::Profile;
use instinct_core::rl::{
    collect_rollout, compute_returns_advantages, AgentPair, RolloutBatch, RolloutSpec,
};
use instinct_core::{
    InstinctAgent, LearnerRole, PolicyAgent, PpoHyper, RewardRouting, TaskConfig, TaskKind,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Policy and instinct with the given hidden layers.
pub fn agents(hidden: &[usize]) -> (PolicyAgent, InstinctAgent) {
    let mut rng = rng(0);
    let policy = PolicyAgent::new(hidden, &mut rng).expect("valid sizes");
    let instinct = InstinctAgent::new(hidden, 0.0, &mut rng).expect("valid sizes");
    (policy, instinct)
}

pub fn desk_hidden() -> Vec<usize> {
    Profile::Desk.scale().hidden
}

/// A policy-learner batch on Goal with targets filled in.
pub fn policy_batch(policy: &PolicyAgent, trajectories: usize, horizon: usize) -> RolloutBatch {
    let spec = RolloutSpec {
        task: TaskConfig::new(TaskKind::Goal).with_horizon(horizon),
        learner: LearnerRole::Policy,
        routing: RewardRouting::default(),
        master_seed: 1,
        epoch: 0,
        trajectories,
        workers: 1,
    };
    let agents = AgentPair {
        policy,
        instinct: None,
    };
    let mut batch = collect_rollout(&spec, agents).expect("rollout");
    compute_returns_advantages(&mut batch, &PpoHyper::default()).expect("finite targets");
    batch
}
