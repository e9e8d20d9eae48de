use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, CheckpointRole};
use crate::error::{Error, Result};
use crate::rl::{derive_seed, run_episode, ActingMode, AgentPair, SeedStream};
use crate::tasks::{TaskConfig, TaskEnv, TaskEvent};
use crate::world::{Action, AgentPose, WorldLayout};

/// First line of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryHeader {
    pub task: TaskConfig,
    pub seed: u64,
    pub env_seed: u64,
    pub role: CheckpointRole,
    /// Layout at the start of the episode.
    pub layout: WorldLayout,
}

/// State after one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryStep {
    pub step: usize,
    pub position: [f64; 2],
    pub heading: f64,
    /// Executed action.
    pub action: [f64; 2],
    pub policy_action: [f64; 2],
    /// 1.0 when no instinct is present.
    pub m: f64,
    pub h: u8,
    pub r: f64,
    pub box_position: Option<[f64; 2]>,
    pub goal_position: Option<[f64; 2]>,
    pub event: TaskEvent,
}

/// Plays one deterministic episode of `task` and writes it as JSON lines
/// (header, then one object per step). Returns the number of steps.
pub fn export_trajectory(
    checkpoint: &Checkpoint,
    task: &TaskConfig,
    seed: u64,
    path: impl AsRef<Path>,
) -> Result<usize> {
    let path = path.as_ref();
    checkpoint.validate()?;
    let env_seed = derive_seed(seed, 0, 0, SeedStream::Evaluation);
    let mut env = TaskEnv::new(task.clone(), env_seed)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_json_line(
        &mut out,
        path,
        &TrajectoryHeader {
            task: task.clone(),
            seed,
            env_seed,
            role: checkpoint.role,
            layout: env.state().layout.clone(),
        },
    )?;
    let agents = AgentPair {
        policy: &checkpoint.policy,
        instinct: checkpoint.instinct.as_ref(),
    };
    let mut steps = 0;
    let mut noise = ChaCha8Rng::seed_from_u64(0);
    run_episode(
        &mut env,
        agents,
        ActingMode::DETERMINISTIC,
        &mut noise,
        |step, env| {
            let state = env.state();
            steps += 1;
            write_json_line(
                &mut out,
                path,
                &TrajectoryStep {
                    step: step.index,
                    position: [state.agent.position.x, state.agent.position.y],
                    heading: state.agent.heading,
                    action: step.executed.to_array(),
                    policy_action: step.policy.action.to_array(),
                    m: step.modulation(),
                    h: step.outcome.hazard,
                    r: step.outcome.reward,
                    box_position: state.box_position().map(|p| [p.x, p.y]),
                    goal_position: state.layout.goal.map(|g| [g.center.x, g.center.y]),
                    event: step.outcome.event,
                },
            )
        },
    )?;
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(steps)
}

fn write_json_line<T: Serialize>(out: &mut impl Write, path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value).map_err(|e| Error::json(path, e))?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<(TrajectoryHeader, Vec<TrajectoryStep>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header: TrajectoryHeader = serde_json::from_str(
        lines
            .next()
            .ok_or_else(|| Error::Argument(format!("{} is empty", path.display())))?,
    )
    .map_err(|e| Error::json(path, e))?;
    let steps = lines
        .map(|l| serde_json::from_str(l).map_err(|e| Error::json(path, e)))
        .collect::<Result<Vec<TrajectoryStep>>>()?;
    Ok((header, steps))
}

/// Rebuilds the episode from the header and re-applies the logged actions,
/// returning the agent pose after each step.
pub fn replay_positions(
    header: &TrajectoryHeader,
    steps: &[TrajectoryStep],
) -> Result<Vec<AgentPose>> {
    let mut env = TaskEnv::new(header.task.clone(), header.env_seed)?;
    if env.state().layout != header.layout {
        return Err(Error::Config(
            "trajectory header layout does not match its seed".into(),
        ));
    }
    steps
        .iter()
        .map(|s| {
            env.step(Action::new(s.action[0], s.action[1]))?;
            Ok(env.state().agent)
        })
        .collect()
}
