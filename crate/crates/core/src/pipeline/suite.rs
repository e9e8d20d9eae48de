use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{PhaseConfig, TrainingScale, TransferMode};
use super::evaluate::{evaluate, EvalConfig, EvalStats};
use super::train::{train_transfer, RunResult, TransferArtifacts};
use crate::checkpoint::write_atomic;
use crate::error::{Error, Result};
use crate::persist::{
    render_summary, summarize_suite, write_summary_csv, MetricsWriter, RunRecord, SummaryRow,
};
use crate::rl::{PpoHyper, RewardRouting};
use crate::tasks::TaskKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteCell {
    pub mode: TransferMode,
    pub task: TaskKind,
    pub seed: u64,
}

impl SuiteCell {
    pub fn dir_name(&self) -> String {
        format!("{}-{}-seed{}", self.task, self.mode, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub scale: TrainingScale,
    pub ppo: PpoHyper,
    pub routing: RewardRouting,
    /// Overrides each task's default `H_t`.
    pub hazard_punishment: Option<f64>,
    pub workers: usize,
    pub eval_episodes: usize,
    pub cells: Vec<SuiteCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub cell: SuiteCell,
    pub result: RunResult,
    pub eval: EvalStats,
}

impl CellOutcome {
    pub fn record(&self) -> RunRecord {
        RunRecord {
            task: self.cell.task,
            mode: self.cell.mode,
            seed: self.cell.seed,
            cumulative_collisions: self.result.cumulative_collisions,
            eval_returns: self.eval.returns.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub outcomes: Vec<CellOutcome>,
    pub failures: Vec<(SuiteCell, String)>,
    pub summary: Vec<SummaryRow>,
}

impl SuiteConfig {
    pub fn phase_config(&self, cell: &SuiteCell) -> PhaseConfig {
        let mut cfg = PhaseConfig::transfer(cell.task, cell.mode, &self.scale, cell.seed);
        cfg.ppo = self.ppo;
        cfg.routing = self.routing;
        cfg.workers = self.workers;
        if let Some(h) = self.hazard_punishment {
            cfg.task.hazard_punishment = h;
        }
        cfg
    }
}

fn run_cell(
    cfg: &SuiteConfig,
    cell: &SuiteCell,
    artifacts: &TransferArtifacts,
    out_dir: Option<&Path>,
) -> Result<CellOutcome> {
    let phase = cfg.phase_config(cell);
    let dir = out_dir.map(|d| d.join(cell.dir_name()));
    let mut writer = match &dir {
        Some(d) => {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            let cell_json =
                serde_json::to_vec_pretty(cell).map_err(|e| Error::json(d.join("cell.json"), e))?;
            write_atomic(&d.join("cell.json"), &cell_json)?;
            Some(MetricsWriter::create(d.join("metrics.csv"))?)
        }
        None => None,
    };
    let mut sink = |row: &super::MetricsRow| match writer.as_mut() {
        Some(w) => w.append(row),
        None => Ok(()),
    };
    let output = train_transfer(&phase, artifacts, &mut sink)?;
    let mut eval_cfg = EvalConfig::new(phase.task.clone(), cell.seed);
    eval_cfg.episodes = cfg.eval_episodes;
    let eval = evaluate(&output.checkpoint, &eval_cfg)?;
    if let Some(d) = &dir {
        output.checkpoint.save(d.join("checkpoint.json"))?;
        let json =
            serde_json::to_vec_pretty(&eval).map_err(|e| Error::json(d.join("eval.json"), e))?;
        write_atomic(&d.join("eval.json"), &json)?;
    }
    Ok(CellOutcome {
        cell: *cell,
        result: output.result,
        eval,
    })
}

/// Runs every cell; a failing cell is recorded and the suite moves on.
/// With `out_dir`, each cell writes into its own subdirectory and the
/// summary goes to `summary.csv` / `summary.txt`.
pub fn run_experiment_suite(
    cfg: &SuiteConfig,
    artifacts_for: &mut dyn FnMut(&SuiteCell) -> Result<TransferArtifacts>,
    out_dir: Option<&Path>,
) -> Result<SuiteReport> {
    if cfg.cells.is_empty() {
        return Err(Error::Config("suite has no cells".into()));
    }
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for cell in &cfg.cells {
        match artifacts_for(cell).and_then(|a| run_cell(cfg, cell, &a, out_dir)) {
            Ok(o) => outcomes.push(o),
            Err(e) => failures.push((*cell, e.to_string())),
        }
    }
    let records: Vec<RunRecord> = outcomes.iter().map(CellOutcome::record).collect();
    let summary = if records.is_empty() {
        Vec::new()
    } else {
        summarize_suite(&records)?
    };
    if let Some(d) = out_dir {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        if !summary.is_empty() {
            write_summary_csv(&summary, d.join("summary.csv"))?;
        }
        let mut text = render_summary(&summary);
        for (cell, err) in &failures {
            text.push_str(&format!("failed: {} ({err})\n", cell.dir_name()));
        }
        write_atomic(&d.join("summary.txt"), text.as_bytes())?;
    }
    Ok(SuiteReport {
        outcomes,
        failures,
        summary,
    })
}
