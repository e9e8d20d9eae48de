use std::fmt;
use std::path::{Path, PathBuf};

use instinct_core::pipeline::{Profile, TrainingScale, TransferMode};
use instinct_core::{PpoHyper, RewardRouting, TaskKind};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default root for output directories.
pub const OUTPUT_ROOT_ENV: &str = "INSTINCT_OUTPUT_ROOT";

/// A bad flag, config key or missing input. Exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

/// One layer of configuration: a JSON file or the command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    pub profile: Option<Profile>,
    pub task: Option<TaskKind>,
    pub tasks: Option<Vec<TaskKind>>,
    pub mode: Option<TransferMode>,
    pub modes: Option<Vec<TransferMode>>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub epochs: Option<usize>,
    pub trajectories_per_epoch: Option<usize>,
    pub horizon: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub gamma: Option<f64>,
    pub gae_lambda: Option<f64>,
    pub clip: Option<f64>,
    pub ppo_epochs: Option<usize>,
    pub minibatches: Option<usize>,
    pub value_coef: Option<f64>,
    pub entropy_coef: Option<f64>,
    pub lr: Option<f64>,
    pub max_grad_norm: Option<f64>,
    pub reward_scaling: Option<bool>,
    pub instinct_h: Option<f64>,
    pub instinct_d: Option<f64>,
    pub hazard_punishment: Option<f64>,
    pub instinct_m_bias: Option<f64>,
    pub workers: Option<usize>,
    pub episodes: Option<usize>,
    pub count_hazard_reward: Option<bool>,
    pub output_dir: Option<PathBuf>,
    pub policy_checkpoint: Option<PathBuf>,
    pub instinct_checkpoint: Option<PathBuf>,
    pub pretrained_checkpoint: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),+ $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )+
    };
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }

    /// Values set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &ConfigFile) -> Self {
        overlay!(
            self,
            top,
            command,
            profile,
            task,
            tasks,
            mode,
            modes,
            seed,
            seeds,
            epochs,
            trajectories_per_epoch,
            horizon,
            hidden,
            gamma,
            gae_lambda,
            clip,
            ppo_epochs,
            minibatches,
            value_coef,
            entropy_coef,
            lr,
            max_grad_norm,
            reward_scaling,
            instinct_h,
            instinct_d,
            hazard_punishment,
            instinct_m_bias,
            workers,
            episodes,
            count_hazard_reward,
            output_dir,
            policy_checkpoint,
            instinct_checkpoint,
            pretrained_checkpoint,
            checkpoint,
        );
        self
    }
}

/// Fully resolved configuration of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub profile: Profile,
    pub task: Option<TaskKind>,
    pub tasks: Vec<TaskKind>,
    pub mode: Option<TransferMode>,
    pub modes: Vec<TransferMode>,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub scale: TrainingScale,
    pub ppo: PpoHyper,
    pub routing: RewardRouting,
    /// `H_t`; `None` keeps each task's default.
    pub hazard_punishment: Option<f64>,
    pub instinct_m_bias: f64,
    pub workers: usize,
    pub episodes: usize,
    pub count_hazard_reward: bool,
    pub output_dir: PathBuf,
    pub policy_checkpoint: Option<PathBuf>,
    pub instinct_checkpoint: Option<PathBuf>,
    pub pretrained_checkpoint: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

fn default_output_dir(command: &str, cfg: &ConfigFile) -> PathBuf {
    let mut name = command.to_string();
    if let Some(t) = cfg.task {
        name.push_str(&format!("-{t}"));
    }
    if let Some(m) = cfg.mode {
        name.push_str(&format!("-{m}"));
    }
    if command != "suite" {
        name.push_str(&format!("-seed{}", cfg.seed.unwrap_or(0)));
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(name)
}

fn check(ok: bool, key: &str, what: &str, value: impl fmt::Display) -> Result<(), UsageError> {
    if ok {
        Ok(())
    } else {
        Err(usage(format!("{key}: {what}, got {value}")))
    }
}

impl RunConfig {
    /// Profile defaults, then `file`, then `flags`.
    pub fn resolve(
        command: &str,
        file: Option<ConfigFile>,
        flags: &ConfigFile,
    ) -> Result<Self, UsageError> {
        let merged = file.unwrap_or_default().overlay(flags);
        if let Some(c) = &merged.command {
            if c != command {
                return Err(usage(format!(
                    "command: config file is for {c:?}, not {command:?}"
                )));
            }
        }
        let profile = merged.profile.unwrap_or(Profile::Paper);
        let base = profile.scale();
        let defaults = PpoHyper::default();
        let routing_default = RewardRouting::default();
        let instinct_h = merged.instinct_h.unwrap_or(base.instinct_h);
        let cfg = RunConfig {
            command: command.to_string(),
            profile,
            task: merged.task,
            tasks: merged.tasks.clone().unwrap_or_default(),
            mode: merged.mode,
            modes: merged.modes.clone().unwrap_or_default(),
            seed: merged.seed.unwrap_or(0),
            seeds: merged.seeds.clone().unwrap_or_default(),
            scale: TrainingScale {
                hidden: merged.hidden.clone().unwrap_or(base.hidden),
                trajectories_per_epoch: merged
                    .trajectories_per_epoch
                    .unwrap_or(base.trajectories_per_epoch),
                horizon: merged.horizon.unwrap_or(base.horizon),
                epochs: merged.epochs.unwrap_or(base.epochs),
                instinct_h,
            },
            ppo: PpoHyper {
                gamma: merged.gamma.unwrap_or(defaults.gamma),
                gae_lambda: merged.gae_lambda.unwrap_or(defaults.gae_lambda),
                clip: merged.clip.unwrap_or(defaults.clip),
                ppo_epochs: merged.ppo_epochs.unwrap_or(defaults.ppo_epochs),
                minibatches: merged.minibatches.unwrap_or(defaults.minibatches),
                value_coef: merged.value_coef.unwrap_or(defaults.value_coef),
                entropy_coef: merged.entropy_coef.unwrap_or(defaults.entropy_coef),
                lr: merged.lr.unwrap_or(defaults.lr),
                max_grad_norm: merged.max_grad_norm.unwrap_or(defaults.max_grad_norm),
                reward_scaling: merged.reward_scaling.unwrap_or(defaults.reward_scaling),
            },
            routing: RewardRouting {
                h_penalty: instinct_h,
                d_gain: merged.instinct_d.unwrap_or(routing_default.d_gain),
            },
            hazard_punishment: merged.hazard_punishment.or_else(|| match command {
                "train" | "evaluate" | "export-trajectory" => {
                    merged.task.map(TaskKind::default_hazard_punishment)
                }
                "pretrain-baseline" => Some(TaskKind::Goal.default_hazard_punishment()),
                _ => None,
            }),
            instinct_m_bias: merged.instinct_m_bias.unwrap_or(0.0),
            workers: merged.workers.unwrap_or(1),
            episodes: merged
                .episodes
                .unwrap_or(instinct_core::pipeline::DEFAULT_EVAL_EPISODES),
            count_hazard_reward: merged.count_hazard_reward.unwrap_or(false),
            output_dir: merged
                .output_dir
                .clone()
                .unwrap_or_else(|| default_output_dir(command, &merged)),
            policy_checkpoint: merged.policy_checkpoint.clone(),
            instinct_checkpoint: merged.instinct_checkpoint.clone(),
            pretrained_checkpoint: merged.pretrained_checkpoint.clone(),
            checkpoint: merged.checkpoint.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), UsageError> {
        let p = &self.ppo;
        check(
            p.gamma > 0.0 && p.gamma <= 1.0,
            "gamma",
            "must be in (0, 1]",
            p.gamma,
        )?;
        check(
            (0.0..=1.0).contains(&p.gae_lambda),
            "gae_lambda",
            "must be in [0, 1]",
            p.gae_lambda,
        )?;
        check(
            p.clip > 0.0 && p.clip.is_finite(),
            "clip",
            "must be > 0",
            p.clip,
        )?;
        check(
            p.ppo_epochs > 0,
            "ppo_epochs",
            "must be positive",
            p.ppo_epochs,
        )?;
        check(
            p.minibatches > 0,
            "minibatches",
            "must be positive",
            p.minibatches,
        )?;
        check(
            p.value_coef >= 0.0 && p.value_coef.is_finite(),
            "value_coef",
            "must be >= 0",
            p.value_coef,
        )?;
        check(
            p.entropy_coef >= 0.0 && p.entropy_coef.is_finite(),
            "entropy_coef",
            "must be >= 0",
            p.entropy_coef,
        )?;
        check(p.lr > 0.0 && p.lr.is_finite(), "lr", "must be > 0", p.lr)?;
        check(
            p.max_grad_norm > 0.0,
            "max_grad_norm",
            "must be > 0",
            p.max_grad_norm,
        )?;
        let s = &self.scale;
        check(s.epochs > 0, "epochs", "must be positive", s.epochs)?;
        check(
            s.trajectories_per_epoch > 0,
            "trajectories_per_epoch",
            "must be positive",
            s.trajectories_per_epoch,
        )?;
        check(
            (1..=instinct_core::world::EPISODE_HORIZON).contains(&s.horizon),
            "horizon",
            "must be in 1..=1000",
            s.horizon,
        )?;
        check(
            !s.hidden.is_empty() && s.hidden.iter().all(|&h| h > 0),
            "hidden",
            "must list positive widths",
            format!("{:?}", s.hidden),
        )?;
        check(
            self.routing.h_penalty.is_finite(),
            "instinct_h",
            "must be finite",
            self.routing.h_penalty,
        )?;
        check(
            self.routing.d_gain.is_finite(),
            "instinct_d",
            "must be finite",
            self.routing.d_gain,
        )?;
        if let Some(h) = self.hazard_punishment {
            check(
                h >= 0.0 && h.is_finite(),
                "hazard_punishment",
                "must be >= 0",
                h,
            )?;
        }
        check(
            self.instinct_m_bias.is_finite(),
            "instinct_m_bias",
            "must be finite",
            self.instinct_m_bias,
        )?;
        check(
            self.workers > 0,
            "workers",
            "must be positive",
            self.workers,
        )?;
        check(
            self.episodes > 0,
            "episodes",
            "must be positive",
            self.episodes,
        )?;
        self.validate_command()
    }

    fn validate_command(&self) -> Result<(), UsageError> {
        let mut missing = Vec::new();
        let need = |cond: bool, name: &'static str, missing: &mut Vec<&'static str>| {
            if !cond {
                missing.push(name);
            }
        };
        match self.command.as_str() {
            "pretrain-policy" | "pretrain-instinct" | "pretrain-baseline" => {
                if let Some(t) = self.task.filter(|t| *t != TaskKind::Goal) {
                    return Err(usage(format!(
                        "task: pre-training always runs on goal, got {t}"
                    )));
                }
                if self.command != "pretrain-policy" {
                    need(
                        self.policy_checkpoint.is_some(),
                        "policy_checkpoint (--policy)",
                        &mut missing,
                    );
                }
            }
            "train" => {
                need(self.task.is_some(), "task", &mut missing);
                need(self.mode.is_some(), "mode", &mut missing);
                if let Some(t) = self.task.filter(|t| *t == TaskKind::Goal) {
                    return Err(usage(format!(
                        "task: transfer training runs on buttons or push, got {t}"
                    )));
                }
                match self.mode {
                    Some(TransferMode::Ir2l) => need(
                        self.instinct_checkpoint.is_some(),
                        "instinct_checkpoint (--instinct)",
                        &mut missing,
                    ),
                    Some(TransferMode::PretrainedBaseline) => need(
                        self.pretrained_checkpoint.is_some(),
                        "pretrained_checkpoint (--pretrained)",
                        &mut missing,
                    ),
                    _ => {}
                }
            }
            "evaluate" | "export-trajectory" => {
                need(self.task.is_some(), "task", &mut missing);
                need(self.checkpoint.is_some(), "checkpoint", &mut missing);
            }
            "suite" => {
                need(!self.tasks.is_empty(), "tasks", &mut missing);
                need(!self.modes.is_empty(), "modes", &mut missing);
                need(!self.seeds.is_empty(), "seeds", &mut missing);
                if self.tasks.contains(&TaskKind::Goal) {
                    return Err(usage("tasks: suites run on buttons and/or push"));
                }
                if self.modes.contains(&TransferMode::Ir2l) {
                    need(
                        self.instinct_checkpoint.is_some(),
                        "instinct_checkpoint (--instinct)",
                        &mut missing,
                    );
                }
                if self.modes.contains(&TransferMode::PretrainedBaseline) {
                    need(
                        self.pretrained_checkpoint.is_some(),
                        "pretrained_checkpoint (--pretrained)",
                        &mut missing,
                    );
                }
            }
            other => return Err(usage(format!("unknown command {other:?}"))),
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(usage(format!(
                "{}: missing required fields: {}",
                self.command,
                missing.join(", ")
            )))
        }
    }

    /// The resolved values in config-file form, loadable with `--config`.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            command: Some(self.command.clone()),
            profile: Some(self.profile),
            task: self.task,
            tasks: (!self.tasks.is_empty()).then(|| self.tasks.clone()),
            mode: self.mode,
            modes: (!self.modes.is_empty()).then(|| self.modes.clone()),
            seed: Some(self.seed),
            seeds: (!self.seeds.is_empty()).then(|| self.seeds.clone()),
            epochs: Some(self.scale.epochs),
            trajectories_per_epoch: Some(self.scale.trajectories_per_epoch),
            horizon: Some(self.scale.horizon),
            hidden: Some(self.scale.hidden.clone()),
            gamma: Some(self.ppo.gamma),
            gae_lambda: Some(self.ppo.gae_lambda),
            clip: Some(self.ppo.clip),
            ppo_epochs: Some(self.ppo.ppo_epochs),
            minibatches: Some(self.ppo.minibatches),
            value_coef: Some(self.ppo.value_coef),
            entropy_coef: Some(self.ppo.entropy_coef),
            lr: Some(self.ppo.lr),
            max_grad_norm: Some(self.ppo.max_grad_norm),
            reward_scaling: Some(self.ppo.reward_scaling),
            instinct_h: Some(self.routing.h_penalty),
            instinct_d: Some(self.routing.d_gain),
            hazard_punishment: self.hazard_punishment,
            instinct_m_bias: Some(self.instinct_m_bias),
            workers: Some(self.workers),
            episodes: Some(self.episodes),
            count_hazard_reward: Some(self.count_hazard_reward),
            output_dir: Some(self.output_dir.clone()),
            policy_checkpoint: self.policy_checkpoint.clone(),
            instinct_checkpoint: self.instinct_checkpoint.clone(),
            pretrained_checkpoint: self.pretrained_checkpoint.clone(),
            checkpoint: self.checkpoint.clone(),
        }
    }
}
