use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::DEFAULT_INSTINCT_H;
use crate::error::{Error, Result};
use crate::rl::{PpoHyper, RewardRouting};
use crate::tasks::{TaskConfig, TaskKind};

/// Instinct `H` of the desk profile. With its smaller sample budget,
/// `H = 100` trains an instinct that stops the agent outright.
pub const DESK_INSTINCT_H: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Policy alone on hazard-free Goal.
    Phase1,
    /// Instinct against the frozen phase-1 policy on hazardous Goal.
    Phase2,
    /// Plain policy fine-tuned on hazardous Goal with the shaped reward.
    PretrainedBaseline,
    /// Policy learning Buttons or Push.
    Transfer,
}

impl Phase {
    fn tag(self) -> u64 {
        match self {
            Phase::Phase1 => 1,
            Phase::Phase2 => 2,
            Phase::PretrainedBaseline => 3,
            Phase::Transfer => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    /// Fresh policy protected by the frozen instinct.
    Ir2l,
    /// Fresh policy, no instinct.
    RandomBaseline,
    /// Policy pre-trained on hazardous Goal, no instinct.
    PretrainedBaseline,
}

impl TransferMode {
    pub const ALL: [TransferMode; 3] = [
        TransferMode::Ir2l,
        TransferMode::PretrainedBaseline,
        TransferMode::RandomBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TransferMode::Ir2l => "ir2l",
            TransferMode::RandomBaseline => "random_baseline",
            TransferMode::PretrainedBaseline => "pretrained_baseline",
        }
    }
}

impl fmt::Display for TransferMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransferMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TransferMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown mode {s:?} (expected ir2l, random_baseline or pretrained_baseline)"
                ))
            })
    }
}

/// Network size and sample budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingScale {
    pub hidden: Vec<usize>,
    pub trajectories_per_epoch: usize,
    pub horizon: usize,
    pub epochs: usize,
    /// `H` of the instinct reward used by phase 2.
    pub instinct_h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 3×512 networks, 216 trajectories of 1000 steps, 300 epochs.
    Paper,
    /// 2×64 networks, 20 trajectories of 400 steps, 60 epochs, `H = 5`.
    Desk,
}

impl Profile {
    pub fn scale(self) -> TrainingScale {
        match self {
            Profile::Paper => TrainingScale {
                hidden: vec![512, 512, 512],
                trajectories_per_epoch: 216,
                horizon: 1000,
                epochs: 300,
                instinct_h: DEFAULT_INSTINCT_H,
            },
            Profile::Desk => TrainingScale {
                hidden: vec![64, 64],
                trajectories_per_epoch: 20,
                horizon: 400,
                epochs: 60,
                instinct_h: DESK_INSTINCT_H,
            },
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "desk" => Ok(Profile::Desk),
            _ => Err(Error::Config(format!(
                "unknown profile {s:?} (expected paper or desk)"
            ))),
        }
    }
}

/// Everything one training phase needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub phase: Phase,
    pub task: TaskConfig,
    pub epochs: usize,
    pub trajectories_per_epoch: usize,
    pub hidden: Vec<usize>,
    pub ppo: PpoHyper,
    pub routing: RewardRouting,
    pub mode: Option<TransferMode>,
    pub seed: u64,
    pub workers: usize,
    /// Pre-squash offset of the modulation head of a fresh instinct.
    pub instinct_m_bias: f64,
}

impl PhaseConfig {
    /// The phase's canonical task at the given scale.
    pub fn new(phase: Phase, scale: &TrainingScale, seed: u64) -> Self {
        let task = match phase {
            Phase::Phase1 => TaskConfig::new(TaskKind::Goal).without_hazards(),
            Phase::Phase2 | Phase::PretrainedBaseline => TaskConfig::new(TaskKind::Goal),
            Phase::Transfer => TaskConfig::new(TaskKind::Buttons),
        }
        .with_horizon(scale.horizon);
        PhaseConfig {
            phase,
            task,
            epochs: scale.epochs,
            trajectories_per_epoch: scale.trajectories_per_epoch,
            hidden: scale.hidden.clone(),
            ppo: PpoHyper::default(),
            routing: RewardRouting {
                h_penalty: scale.instinct_h,
                ..RewardRouting::default()
            },
            mode: (phase == Phase::Transfer).then_some(TransferMode::Ir2l),
            seed,
            workers: 1,
            instinct_m_bias: 0.0,
        }
    }

    /// A transfer configuration for `kind` with its default hazard punishment.
    pub fn transfer(kind: TaskKind, mode: TransferMode, scale: &TrainingScale, seed: u64) -> Self {
        let mut cfg = PhaseConfig::new(Phase::Transfer, scale, seed);
        cfg.task = TaskConfig::new(kind).with_horizon(scale.horizon);
        cfg.mode = Some(mode);
        cfg
    }

    /// Master seed of this phase, distinct for each phase of one run.
    pub fn phase_seed(&self) -> u64 {
        crate::rl::derive_seed(self.seed, self.phase.tag(), 0, crate::rl::SeedStream::Init)
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        self.ppo.validate()?;
        let want = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        };
        match self.phase {
            Phase::Phase1 => want(
                self.task.kind == TaskKind::Goal && !self.task.hazards_enabled,
                "phase 1 runs on Goal with hazards disabled",
            )?,
            Phase::Phase2 | Phase::PretrainedBaseline => want(
                self.task.kind == TaskKind::Goal && self.task.hazards_enabled,
                "instinct and baseline pre-training run on Goal with hazards enabled",
            )?,
            Phase::Transfer => {
                want(
                    matches!(self.task.kind, TaskKind::Buttons | TaskKind::Push),
                    "transfer training runs on Buttons or Push",
                )?;
                want(self.mode.is_some(), "transfer training needs a mode")?;
            }
        }
        want(self.epochs > 0, "epochs must be positive")?;
        want(
            self.trajectories_per_epoch > 0,
            "trajectories per epoch must be positive",
        )?;
        want(
            !self.hidden.is_empty() && self.hidden.iter().all(|&h| h > 0),
            "hidden sizes must be a non-empty list of positive widths",
        )?;
        want(self.workers > 0, "workers must be positive")?;
        want(
            self.routing.h_penalty.is_finite() && self.routing.d_gain.is_finite(),
            "instinct reward constants must be finite",
        )?;
        want(
            self.instinct_m_bias.is_finite(),
            "instinct_m_bias must be finite",
        )
    }
}
