use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use instinct_core::persist::{
    export_trajectory, load_run_record, render_summary, summarize_suite, write_summary_csv,
    MetricsWriter,
};
use instinct_core::pipeline::{
    evaluate, pretrain_instinct_phase2, pretrain_policy_phase1, run_experiment_suite,
    train_pretrained_baseline, train_transfer, EvalConfig, EvalStats, PhaseOutput, SuiteCell,
    SuiteConfig, TransferArtifacts,
};
use instinct_core::{Checkpoint, MetricsRow, Phase, PhaseConfig, TaskConfig, TaskKind};

use crate::args::SummarizeArgs;
use crate::config::{RunConfig, UsageError};

fn phase_config(cfg: &RunConfig, phase: Phase) -> PhaseConfig {
    let mut pc = match phase {
        Phase::Transfer => PhaseConfig::transfer(
            cfg.task.expect("validated"),
            cfg.mode.expect("validated"),
            &cfg.scale,
            cfg.seed,
        ),
        _ => PhaseConfig::new(phase, &cfg.scale, cfg.seed),
    };
    pc.ppo = cfg.ppo;
    pc.routing = cfg.routing;
    pc.workers = cfg.workers;
    pc.instinct_m_bias = cfg.instinct_m_bias;
    if let (Some(h), true) = (cfg.hazard_punishment, pc.task.hazards_enabled) {
        pc.task.hazard_punishment = h;
    }
    pc
}

fn task_config(cfg: &RunConfig, kind: TaskKind) -> TaskConfig {
    let mut task = TaskConfig::new(kind).with_horizon(cfg.scale.horizon);
    if let Some(h) = cfg.hazard_punishment {
        task.hazard_punishment = h;
    }
    task
}

fn load_checkpoint(path: &Option<PathBuf>, what: &str) -> Result<Checkpoint> {
    let path = path
        .as_ref()
        .ok_or_else(|| UsageError(format!("missing {what} checkpoint")))?;
    Ok(Checkpoint::load(path)?)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Creates the output directory and echoes the resolved config into it.
pub fn prepare_output(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    write_json(&cfg.output_dir.join("config.json"), &cfg.to_file())
}

fn log_row(row: &MetricsRow) {
    let m = row
        .mean_modulation
        .map(|m| format!(" m={m:.3}"))
        .unwrap_or_default();
    eprintln!(
        "update {:4}  reward {:+.4}  collisions {:5}  eval {:+.3}{m}",
        row.update, row.mean_reward, row.collisions, row.eval_return
    );
}

fn run_phase(
    cfg: &RunConfig,
    train: impl FnOnce(
        &mut dyn FnMut(&MetricsRow) -> instinct_core::Result<()>,
    ) -> instinct_core::Result<PhaseOutput>,
) -> Result<PhaseOutput> {
    let mut writer = MetricsWriter::create(cfg.output_dir.join("metrics.csv"))?;
    let mut sink = |row: &MetricsRow| {
        log_row(row);
        writer.append(row)
    };
    let output = train(&mut sink)?;
    output
        .checkpoint
        .save(cfg.output_dir.join("checkpoint.json"))?;
    eprintln!(
        "cumulative collisions {}; checkpoint written to {}",
        output.result.cumulative_collisions,
        cfg.output_dir.join("checkpoint.json").display()
    );
    Ok(output)
}

fn print_eval(stats: &EvalStats) {
    let (r, c) = (&stats.return_quartiles, &stats.collision_quartiles);
    println!(
        "episodes {}  return median {:.3} [{:.3}, {:.3}]  collisions median {:.1} [{:.1}, {:.1}]",
        stats.returns.len(),
        r.median,
        r.q1,
        r.q3,
        c.median,
        c.q1,
        c.q3
    );
}

fn eval_after(cfg: &RunConfig, checkpoint: &Checkpoint, task: TaskConfig) -> Result<()> {
    let mut ec = EvalConfig::new(task, cfg.seed);
    ec.episodes = cfg.episodes;
    ec.count_hazard_reward = cfg.count_hazard_reward;
    let stats = evaluate(checkpoint, &ec)?;
    write_json(&cfg.output_dir.join("eval.json"), &stats)?;
    print_eval(&stats);
    Ok(())
}

pub fn pretrain_policy(cfg: &RunConfig) -> Result<()> {
    let pc = phase_config(cfg, Phase::Phase1);
    run_phase(cfg, |sink| pretrain_policy_phase1(&pc, sink))?;
    Ok(())
}

pub fn pretrain_instinct(cfg: &RunConfig) -> Result<()> {
    let pc = phase_config(cfg, Phase::Phase2);
    let phase1 = load_checkpoint(&cfg.policy_checkpoint, "phase-1 policy")?;
    run_phase(cfg, |sink| pretrain_instinct_phase2(&pc, &phase1, sink))?;
    Ok(())
}

pub fn pretrain_baseline(cfg: &RunConfig) -> Result<()> {
    let pc = phase_config(cfg, Phase::PretrainedBaseline);
    let phase1 = load_checkpoint(&cfg.policy_checkpoint, "phase-1 policy")?;
    run_phase(cfg, |sink| train_pretrained_baseline(&pc, &phase1, sink))?;
    Ok(())
}

fn transfer_artifacts(cfg: &RunConfig) -> Result<TransferArtifacts> {
    let load = |p: &Option<PathBuf>| p.as_ref().map(Checkpoint::load).transpose();
    Ok(TransferArtifacts {
        instinct: load(&cfg.instinct_checkpoint)?,
        pretrained_policy: load(&cfg.pretrained_checkpoint)?,
    })
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let pc = phase_config(cfg, Phase::Transfer);
    let artifacts = transfer_artifacts(cfg)?;
    let output = run_phase(cfg, |sink| train_transfer(&pc, &artifacts, sink))?;
    eval_after(cfg, &output.checkpoint, pc.task)
}

pub fn evaluate_checkpoint(cfg: &RunConfig) -> Result<()> {
    let checkpoint = load_checkpoint(&cfg.checkpoint, "evaluation")?;
    eval_after(
        cfg,
        &checkpoint,
        task_config(cfg, cfg.task.expect("validated")),
    )
}

pub fn export(cfg: &RunConfig) -> Result<()> {
    let checkpoint = load_checkpoint(&cfg.checkpoint, "export")?;
    let task = task_config(cfg, cfg.task.expect("validated"));
    let path = cfg.output_dir.join("trajectory.jsonl");
    let steps = export_trajectory(&checkpoint, &task, cfg.seed, &path)?;
    println!("{steps} steps written to {}", path.display());
    Ok(())
}

pub fn suite(cfg: &RunConfig) -> Result<()> {
    let mut cells = Vec::new();
    for &task in &cfg.tasks {
        for &mode in &cfg.modes {
            for &seed in &cfg.seeds {
                cells.push(SuiteCell { mode, task, seed });
            }
        }
    }
    let suite_cfg = SuiteConfig {
        scale: cfg.scale.clone(),
        ppo: cfg.ppo,
        routing: cfg.routing,
        hazard_punishment: cfg.hazard_punishment,
        workers: cfg.workers,
        eval_episodes: cfg.episodes,
        cells,
    };
    let artifacts = transfer_artifacts(cfg)?;
    let mut artifacts_for = |cell: &SuiteCell| {
        eprintln!("running {}", cell.dir_name());
        Ok(artifacts.clone())
    };
    let report = run_experiment_suite(&suite_cfg, &mut artifacts_for, Some(&cfg.output_dir))?;
    print!("{}", render_summary(&report.summary));
    for (cell, err) in &report.failures {
        eprintln!("failed: {} ({err})", cell.dir_name());
    }
    if report.outcomes.is_empty() {
        anyhow::bail!("every suite cell failed");
    }
    Ok(())
}

fn cell_dirs(root: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if root.join("cell.json").is_file() {
        out.push(root.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(root)
        .with_context(|| format!("reading {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("cell.json").is_file())
        .collect();
    entries.sort();
    out.extend(entries);
    Ok(())
}

pub fn summarize(args: &SummarizeArgs) -> Result<()> {
    let mut dirs = Vec::new();
    for d in &args.dirs {
        cell_dirs(d, &mut dirs)?;
    }
    if dirs.is_empty() {
        return Err(UsageError("no suite cell directories found".into()).into());
    }
    let records = dirs
        .iter()
        .map(load_run_record)
        .collect::<instinct_core::Result<Vec<_>>>()?;
    let rows = summarize_suite(&records)?;
    if let Some(out) = &args.output_dir {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write_summary_csv(&rows, out.join("summary.csv"))?;
        fs::write(out.join("summary.txt"), render_summary(&rows))
            .with_context(|| format!("writing {}", out.join("summary.txt").display()))?;
    }
    print!("{}", render_summary(&rows));
    Ok(())
}
