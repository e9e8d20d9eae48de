use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use instinct_core::pipeline::{Profile, TransferMode};
use instinct_core::TaskKind;

use crate::config::ConfigFile;

#[derive(Debug, Parser)]
#[command(
    name = "instinct",
    version,
    about = "Instinct-regulated reinforcement learning experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Phase 1: train a policy on Goal without hazards.
    PretrainPolicy(RunArgs),
    /// Phase 2: train an instinct next to a frozen phase-1 policy.
    PretrainInstinct(RunArgs),
    /// Fine-tune a phase-1 policy on Goal with hazards (pre-trained baseline).
    PretrainBaseline(RunArgs),
    /// Transfer training on Buttons or Push.
    Train(RunArgs),
    /// Deterministic evaluation of a checkpoint.
    Evaluate(RunArgs),
    /// Transfer training for every (task, mode, seed) cell plus a summary.
    Suite(RunArgs),
    /// Write one deterministic episode as JSON lines.
    ExportTrajectory(RunArgs),
    /// Summarize finished suite cell directories.
    Summarize(SummarizeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::PretrainPolicy(_) => "pretrain-policy",
            Command::PretrainInstinct(_) => "pretrain-instinct",
            Command::PretrainBaseline(_) => "pretrain-baseline",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Suite(_) => "suite",
            Command::ExportTrajectory(_) => "export-trajectory",
            Command::Summarize(_) => "summarize",
        }
    }
}

/// Flags shared by every run command. Each one overrides the config file,
/// which overrides the profile defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON config file (same keys as the flags, in snake_case).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub profile: Option<Profile>,
    #[arg(long)]
    pub task: Option<TaskKind>,
    #[arg(long, value_delimiter = ',')]
    pub tasks: Option<Vec<TaskKind>>,
    #[arg(long)]
    pub mode: Option<TransferMode>,
    #[arg(long, value_delimiter = ',')]
    pub modes: Option<Vec<TransferMode>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub trajectories_per_epoch: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Hidden layer widths, e.g. `64,64`.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub gae_lambda: Option<f64>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub ppo_epochs: Option<usize>,
    #[arg(long)]
    pub minibatches: Option<usize>,
    #[arg(long)]
    pub value_coef: Option<f64>,
    #[arg(long)]
    pub entropy_coef: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub max_grad_norm: Option<f64>,
    /// Scale learner rewards by the running std of the discounted return.
    #[arg(long)]
    pub reward_scaling: Option<bool>,
    /// Instinct reward hazard constant `H`.
    #[arg(long)]
    pub instinct_h: Option<f64>,
    /// Instinct reward gain `D`.
    #[arg(long)]
    pub instinct_d: Option<f64>,
    /// Per-step hazard punishment `H_t` of the shaped policy reward.
    #[arg(long)]
    pub hazard_punishment: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub instinct_m_bias: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Evaluation episodes.
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub count_hazard_reward: Option<bool>,
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
    /// Phase-1 policy checkpoint.
    #[arg(long = "policy")]
    pub policy_checkpoint: Option<PathBuf>,
    /// Phase-2 checkpoint (policy plus instinct).
    #[arg(long = "instinct")]
    pub instinct_checkpoint: Option<PathBuf>,
    /// Pre-trained baseline policy checkpoint.
    #[arg(long = "pretrained")]
    pub pretrained_checkpoint: Option<PathBuf>,
    /// Checkpoint to evaluate or export.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

impl RunArgs {
    pub fn as_layer(&self) -> ConfigFile {
        ConfigFile {
            command: None,
            profile: self.profile,
            task: self.task,
            tasks: self.tasks.clone(),
            mode: self.mode,
            modes: self.modes.clone(),
            seed: self.seed,
            seeds: self.seeds.clone(),
            epochs: self.epochs,
            trajectories_per_epoch: self.trajectories_per_epoch,
            horizon: self.horizon,
            hidden: self.hidden.clone(),
            gamma: self.gamma,
            gae_lambda: self.gae_lambda,
            clip: self.clip,
            ppo_epochs: self.ppo_epochs,
            minibatches: self.minibatches,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
            lr: self.lr,
            max_grad_norm: self.max_grad_norm,
            reward_scaling: self.reward_scaling,
            instinct_h: self.instinct_h,
            instinct_d: self.instinct_d,
            hazard_punishment: self.hazard_punishment,
            instinct_m_bias: self.instinct_m_bias,
            workers: self.workers,
            episodes: self.episodes,
            count_hazard_reward: self.count_hazard_reward,
            output_dir: self.output_dir.clone(),
            policy_checkpoint: self.policy_checkpoint.clone(),
            instinct_checkpoint: self.instinct_checkpoint.clone(),
            pretrained_checkpoint: self.pretrained_checkpoint.clone(),
            checkpoint: self.checkpoint.clone(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SummarizeArgs {
    /// Suite cell directories, or suite output directories containing them.
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,
    /// Where to write `summary.csv` and `summary.txt`.
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
}
