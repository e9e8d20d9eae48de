//! The experimental program: policy pre-training, instinct pre-training,
//! transfer training (with or without the instinct), evaluation and suites.

mod config;
mod evaluate;
mod suite;
mod train;

pub use config::{Phase, PhaseConfig, Profile, TrainingScale, TransferMode, DESK_INSTINCT_H};
pub use evaluate::{evaluate, evaluate_agents, EvalConfig, EvalStats, DEFAULT_EVAL_EPISODES};
pub use suite::{run_experiment_suite, CellOutcome, SuiteCell, SuiteConfig, SuiteReport};
pub use train::{
    pretrain_instinct_phase2, pretrain_policy_phase1, train_pretrained_baseline, train_transfer,
    MetricsRow, MetricsSink, PhaseOutput, RunResult, TransferArtifacts,
};
