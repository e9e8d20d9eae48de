//! Instinct-regulated reinforcement learning: a task policy learns under the
//! supervision of a frozen, pre-trained instinct network that can override
//! its actions near hazards.
//!
//! The crate holds a small 2D navigation world with three tasks, a dense
//! network core with manual backpropagation, PPO, and the training pipeline
//! (policy pre-training, instinct pre-training, transfer training, evaluation).

pub mod agent;
pub mod checkpoint;
pub mod error;
pub mod neural;
pub mod persist;
pub mod pipeline;
pub mod rl;
pub mod stats;
pub mod tasks;
pub mod world;

pub use agent::{ActorCritic, InstinctAgent, InstinctOutput, PolicyAgent};
pub use checkpoint::{Checkpoint, CheckpointRole};
pub use error::{Error, Result};
pub use pipeline::{MetricsRow, Phase, PhaseConfig, Profile, RunResult, TransferMode};
pub use rl::{LearnerRole, PpoHyper, RewardRouting};
pub use tasks::{TaskConfig, TaskEnv, TaskKind};
pub use world::{Action, Observation, WorldLayout, WorldState};
