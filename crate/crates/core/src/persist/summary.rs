use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{format_float, read_metrics};
use crate::checkpoint::write_atomic;
use crate::error::{Error, Result};
use crate::pipeline::{EvalStats, SuiteCell, TransferMode};
use crate::stats::Quartiles;
use crate::tasks::TaskKind;

/// What the summary needs from one finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: TaskKind,
    pub mode: TransferMode,
    pub seed: u64,
    pub cumulative_collisions: u64,
    /// Final evaluation returns, one per episode.
    pub eval_returns: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: TaskKind,
    pub mode: TransferMode,
    pub runs: usize,
    /// Over runs.
    pub collisions: Quartiles,
    /// Over all evaluation episodes of all runs.
    pub eval_return: Quartiles,
}

/// Reads a suite cell directory (`cell.json`, `metrics.csv`, `eval.json`).
pub fn load_run_record(dir: impl AsRef<Path>) -> Result<RunRecord> {
    let dir = dir.as_ref();
    let read_json = |name: &str| -> Result<Vec<u8>> {
        let p = dir.join(name);
        fs::read(&p).map_err(|e| Error::io(p, e))
    };
    let cell: SuiteCell = serde_json::from_slice(&read_json("cell.json")?)
        .map_err(|e| Error::json(dir.join("cell.json"), e))?;
    let eval: EvalStats = serde_json::from_slice(&read_json("eval.json")?)
        .map_err(|e| Error::json(dir.join("eval.json"), e))?;
    let rows = read_metrics(dir.join("metrics.csv"))?;
    Ok(RunRecord {
        task: cell.task,
        mode: cell.mode,
        seed: cell.seed,
        cumulative_collisions: rows.iter().map(|r| r.collisions).sum(),
        eval_returns: eval.returns,
    })
}

/// Median and quartiles per (task, mode), ordered by task then mode.
pub fn summarize_suite(records: &[RunRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::Argument("no runs to summarize".into()));
    }
    let mut rows = Vec::new();
    for task in TaskKind::ALL {
        for mode in TransferMode::ALL {
            let group: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.task == task && r.mode == mode)
                .collect();
            if group.is_empty() {
                continue;
            }
            let collisions: Vec<f64> = group
                .iter()
                .map(|r| r.cumulative_collisions as f64)
                .collect();
            let returns: Vec<f64> = group
                .iter()
                .flat_map(|r| r.eval_returns.iter().copied())
                .collect();
            rows.push(SummaryRow {
                task,
                mode,
                runs: group.len(),
                collisions: Quartiles::of(&collisions),
                eval_return: Quartiles::of(&returns),
            });
        }
    }
    Ok(rows)
}

pub fn write_summary_csv(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from(
        "task,mode,runs,collisions_q1,collisions_median,collisions_q3,return_q1,return_median,return_q3\n",
    );
    for r in rows {
        let f = format_float;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.task,
            r.mode,
            r.runs,
            f(r.collisions.q1),
            f(r.collisions.median),
            f(r.collisions.q3),
            f(r.eval_return.q1),
            f(r.eval_return.median),
            f(r.eval_return.q3)
        );
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

/// Fixed-width text table.
pub fn render_summary(rows: &[SummaryRow]) -> String {
    let mut out = format!(
        "{:<8} {:<20} {:>4} {:>12} {:>12} {:>12} {:>12}\n",
        "task", "mode", "runs", "coll median", "coll IQR", "ret median", "ret IQR"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<8} {:<20} {:>4} {:>12.1} {:>12.1} {:>12.3} {:>12.3}",
            r.task.as_str(),
            r.mode.as_str(),
            r.runs,
            r.collisions.median,
            r.collisions.iqr(),
            r.eval_return.median,
            r.eval_return.iqr()
        );
    }
    out
}
