//! Task definitions on top of the simulator: layout generation, per-task
//! progress rewards, goal/button/box events, and the hazard-shaped reward
//! used when training a policy on a new task.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{
    Action, AgentPose, Circle, Observation, Vec2, WorldLayout, WorldState, AGENT_RADIUS,
    BOX_RADIUS, BUTTON_RADIUS, EPISODE_HORIZON, GOAL_RADIUS, HAZARD_RADIUS,
};

pub const GOAL_HAZARD_COUNT: usize = 24;
pub const BUTTONS_HAZARD_COUNT: usize = 8;
pub const BUTTON_COUNT: usize = 4;
pub const PUSH_HAZARD_COUNT: usize = 20;
pub const MIN_SEPARATION: f64 = 0.45;
pub const BUTTON_PRESS_RADIUS: f64 = BUTTON_RADIUS + AGENT_RADIUS;
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Random objects keep their center at least this far from hazard centers,
/// so the agent can stand on any of them without being inside a hazard.
const HAZARD_CLEARANCE: f64 = HAZARD_RADIUS + AGENT_RADIUS;
/// Random objects are placed inside `[-PLACEMENT_EXTENT, PLACEMENT_EXTENT]²`.
const PLACEMENT_EXTENT: f64 = 1.8;
const PUSH_SPAWN_X: f64 = -1.95;
/// Horizontal corridors between the Push hazard rows.
const PUSH_SPAWN_YS: [f64; 4] = [-1.2, -0.4, 0.4, 1.2];
const PUSH_ZONE_X: (f64, f64) = (0.5, 1.6);
const PUSH_ZONE_Y: (f64, f64) = (-1.6, 1.6);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Goal,
    Buttons,
    Push,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Goal, TaskKind::Buttons, TaskKind::Push];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Goal => "goal",
            TaskKind::Buttons => "buttons",
            TaskKind::Push => "push",
        }
    }

    /// Hazard punishment `H_t` used for transfer training on this task.
    pub fn default_hazard_punishment(self) -> f64 {
        match self {
            TaskKind::Goal | TaskKind::Buttons => 1.0,
            TaskKind::Push => 10.0,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "goal" => Ok(TaskKind::Goal),
            "buttons" => Ok(TaskKind::Buttons),
            "push" => Ok(TaskKind::Push),
            other => Err(Error::Config(format!(
                "unknown task '{other}' (expected goal, buttons or push)"
            ))),
        }
    }
}

/// Optional layout overrides, mostly for tests and ablations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutOverrides {
    /// Replaces every generated hazard with these centers.
    pub hazard_centers: Option<Vec<Vec2>>,
    /// Number of randomly placed hazards (Buttons only).
    pub random_hazard_count: Option<usize>,
    pub min_separation: Option<f64>,
    pub agent_spawn: Option<AgentPose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub kind: TaskKind,
    pub hazards_enabled: bool,
    /// `H_t`: reward subtracted per hazard step when the policy learns.
    pub hazard_punishment: f64,
    pub horizon: usize,
    #[serde(default)]
    pub overrides: LayoutOverrides,
}

impl TaskConfig {
    pub fn new(kind: TaskKind) -> Self {
        TaskConfig {
            kind,
            hazards_enabled: true,
            hazard_punishment: kind.default_hazard_punishment(),
            horizon: EPISODE_HORIZON,
            overrides: LayoutOverrides::default(),
        }
    }

    pub fn without_hazards(mut self) -> Self {
        self.hazards_enabled = false;
        self.hazard_punishment = 0.0;
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_punishment(mut self, punishment: f64) -> Self {
        self.hazard_punishment = punishment;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.horizon > EPISODE_HORIZON {
            return Err(Error::Config(format!(
                "horizon must be in 1..={EPISODE_HORIZON}, got {}",
                self.horizon
            )));
        }
        if !(self.hazard_punishment >= 0.0 && self.hazard_punishment.is_finite()) {
            return Err(Error::Config(format!(
                "hazard punishment must be a finite value >= 0, got {}",
                self.hazard_punishment
            )));
        }
        if let Some(sep) = self.overrides.min_separation {
            if sep.is_nan() || sep < 0.0 {
                return Err(Error::Config(format!(
                    "min_separation must be >= 0, got {sep}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskEvent {
    None,
    GoalReached,
    ButtonPressed,
    BoxInGoal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Raw task reward `r_t` (no hazard punishment).
    pub reward: f64,
    pub hazard: u8,
    pub event: TaskEvent,
    pub observation: Observation,
}

/// Rejection sampler for object centers.
struct Placer<'a, R: Rng + ?Sized> {
    rng: &'a mut R,
    separation: f64,
}

impl<R: Rng + ?Sized> Placer<'_, R> {
    fn place(
        &mut self,
        x_range: (f64, f64),
        y_range: (f64, f64),
        separated_from: &[Vec2],
        hazards: &[Circle],
        what: &str,
    ) -> Result<Vec2> {
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let p = Vec2::new(
                self.rng.random_range(x_range.0..=x_range.1),
                self.rng.random_range(y_range.0..=y_range.1),
            );
            let spaced = separated_from
                .iter()
                .all(|q| p.distance(*q) >= self.separation);
            let clear = hazards
                .iter()
                .all(|h| p.distance(h.center) >= HAZARD_CLEARANCE);
            if spaced && clear {
                return Ok(p);
            }
        }
        Err(Error::Layout(format!(
            "could not place {what} within {MAX_PLACEMENT_ATTEMPTS} attempts"
        )))
    }
}

fn grid(xs: &[f64], ys: &[f64], skip: Option<Vec2>) -> Vec<Circle> {
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for &x in xs {
        for &y in ys {
            let c = Vec2::new(x, y);
            if skip.is_some_and(|s| s.distance(c) < 1e-9) {
                continue;
            }
            out.push(Circle::new(c, HAZARD_RADIUS));
        }
    }
    out
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// The 5×5 Task Goal grid over `[-1.6, 1.6]²` without its central cell.
pub fn goal_hazard_grid() -> Vec<Circle> {
    let axis = linspace(-1.6, 1.6, 5);
    grid(&axis, &axis, Some(Vec2::ZERO))
}

/// The Task Push grid: 4 columns over `x ∈ [-1.8, -0.2]`, 5 rows over `y ∈ [-1.6, 1.6]`.
pub fn push_hazard_grid() -> Vec<Circle> {
    grid(&linspace(-1.8, -0.2, 4), &linspace(-1.6, 1.6, 5), None)
}

fn random_heading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
}

/// Generates the starting layout of one episode.
pub fn make_layout<R: Rng + ?Sized>(
    kind: TaskKind,
    rng: &mut R,
    hazards_enabled: bool,
    overrides: &LayoutOverrides,
) -> Result<WorldLayout> {
    let mut placer = Placer {
        rng,
        separation: overrides.min_separation.unwrap_or(MIN_SEPARATION),
    };
    let full = (-PLACEMENT_EXTENT, PLACEMENT_EXTENT);
    let mut layout = WorldLayout::empty();
    let fixed_hazards = |default: Vec<Circle>| match &overrides.hazard_centers {
        Some(centers) => centers
            .iter()
            .map(|c| Circle::new(*c, HAZARD_RADIUS))
            .collect(),
        None => default,
    };

    match kind {
        TaskKind::Goal => {
            let spawn = overrides
                .agent_spawn
                .unwrap_or_else(|| AgentPose::new(Vec2::ZERO, random_heading(placer.rng)));
            if hazards_enabled {
                layout.hazards = fixed_hazards(goal_hazard_grid());
            }
            let mut taken = vec![spawn.position];
            let goal = placer.place(full, full, &taken, &layout.hazards, "goal")?;
            taken.push(goal);
            let box_ = placer.place(full, full, &taken, &layout.hazards, "box")?;
            taken.push(box_);
            for _ in 0..BUTTON_COUNT {
                let b = placer.place(full, full, &taken, &layout.hazards, "button")?;
                taken.push(b);
                layout.buttons.push(Circle::new(b, BUTTON_RADIUS));
            }
            layout.goal = Some(Circle::new(goal, GOAL_RADIUS));
            layout.box_ = Some(Circle::new(box_, BOX_RADIUS));
            layout.correct_button = Some(placer.rng.random_range(0..BUTTON_COUNT));
            layout.agent_spawn = spawn;
        }
        TaskKind::Buttons => {
            let spawn = overrides
                .agent_spawn
                .unwrap_or_else(|| AgentPose::new(Vec2::ZERO, random_heading(placer.rng)));
            let mut taken = vec![spawn.position];
            for _ in 0..BUTTON_COUNT {
                let b = placer.place(full, full, &taken, &[], "button")?;
                taken.push(b);
                layout.buttons.push(Circle::new(b, BUTTON_RADIUS));
            }
            if hazards_enabled {
                layout.hazards = match &overrides.hazard_centers {
                    Some(_) => fixed_hazards(Vec::new()),
                    None => {
                        let n = overrides
                            .random_hazard_count
                            .unwrap_or(BUTTONS_HAZARD_COUNT);
                        let mut hazards = Vec::with_capacity(n);
                        for _ in 0..n {
                            let h = placer.place(full, full, &taken, &[], "hazard")?;
                            taken.push(h);
                            hazards.push(Circle::new(h, HAZARD_RADIUS));
                        }
                        hazards
                    }
                };
            }
            layout.correct_button = Some(placer.rng.random_range(0..BUTTON_COUNT));
            layout.agent_spawn = spawn;
        }
        TaskKind::Push => {
            if hazards_enabled {
                layout.hazards = fixed_hazards(push_hazard_grid());
            }
            let spawn = match overrides.agent_spawn {
                Some(s) => s,
                None => {
                    let y = PUSH_SPAWN_YS[placer.rng.random_range(0..PUSH_SPAWN_YS.len())];
                    AgentPose::new(Vec2::new(PUSH_SPAWN_X, y), random_heading(placer.rng))
                }
            };
            let taken = vec![spawn.position];
            let (box_, goal) = place_box_and_goal(&mut placer, &taken, &layout.hazards)?;
            layout.box_ = Some(Circle::new(box_, BOX_RADIUS));
            layout.goal = Some(Circle::new(goal, GOAL_RADIUS));
            layout.agent_spawn = spawn;
        }
    }
    Ok(layout)
}

fn place_box_and_goal<R: Rng + ?Sized>(
    placer: &mut Placer<'_, R>,
    taken: &[Vec2],
    hazards: &[Circle],
) -> Result<(Vec2, Vec2)> {
    let mut taken = taken.to_vec();
    let box_ = placer.place(PUSH_ZONE_X, PUSH_ZONE_Y, &taken, hazards, "box")?;
    taken.push(box_);
    let goal = placer.place(PUSH_ZONE_X, PUSH_ZONE_Y, &taken, hazards, "goal")?;
    Ok((box_, goal))
}

/// Distances whose decrease is rewarded: `[agent→target, box→goal]`.
fn progress_distances(kind: TaskKind, state: &WorldState) -> [f64; 2] {
    let agent = state.agent.position;
    let layout = &state.layout;
    match kind {
        TaskKind::Goal => [layout.goal.map_or(0.0, |g| agent.distance(g.center)), 0.0],
        TaskKind::Buttons => [
            layout
                .correct_button_circle()
                .map_or(0.0, |b| agent.distance(b.center)),
            0.0,
        ],
        TaskKind::Push => match (layout.box_, layout.goal) {
            (Some(b), Some(g)) => [agent.distance(b.center), b.center.distance(g.center)],
            _ => [0.0, 0.0],
        },
    }
}

/// Progress reward between two consecutive states of one episode.
pub fn task_reward(kind: TaskKind, prev: &WorldState, next: &WorldState) -> f64 {
    let before = progress_distances(kind, prev);
    let after = progress_distances(kind, next);
    (before[0] - after[0]) + (before[1] - after[1])
}

/// `r_t - h · H_t`.
pub fn shaped_transfer_reward(task_reward: f64, hazard: u8, punishment: f64) -> f64 {
    task_reward - f64::from(hazard) * punishment
}

/// Detects the task event of the current state and applies its layout change.
pub fn check_events<R: Rng + ?Sized>(
    kind: TaskKind,
    state: &mut WorldState,
    rng: &mut R,
) -> Result<TaskEvent> {
    let agent = state.agent.position;
    let layout = &mut state.layout;
    match kind {
        TaskKind::Goal => {
            let Some(goal) = layout.goal else {
                return Ok(TaskEvent::None);
            };
            if !goal.contains(agent) {
                return Ok(TaskEvent::None);
            }
            let mut taken = vec![agent];
            taken.extend(layout.box_.map(|b| b.center));
            taken.extend(layout.buttons.iter().map(|b| b.center));
            let mut placer = Placer {
                rng,
                separation: MIN_SEPARATION,
            };
            let full = (-PLACEMENT_EXTENT, PLACEMENT_EXTENT);
            let center = placer.place(full, full, &taken, &layout.hazards, "goal")?;
            layout.goal = Some(Circle::new(center, GOAL_RADIUS));
            Ok(TaskEvent::GoalReached)
        }
        TaskKind::Buttons => {
            let Some(current) = layout.correct_button else {
                return Ok(TaskEvent::None);
            };
            let button = layout.buttons[current];
            if button.center.distance(agent) >= BUTTON_PRESS_RADIUS {
                return Ok(TaskEvent::None);
            }
            let n = layout.buttons.len();
            if n > 1 {
                let k = rng.random_range(0..n - 1);
                layout.correct_button = Some(if k >= current { k + 1 } else { k });
            }
            Ok(TaskEvent::ButtonPressed)
        }
        TaskKind::Push => {
            let (Some(b), Some(g)) = (layout.box_, layout.goal) else {
                return Ok(TaskEvent::None);
            };
            if !g.contains(b.center) {
                return Ok(TaskEvent::None);
            }
            let mut placer = Placer {
                rng,
                separation: MIN_SEPARATION,
            };
            let (box_, goal) = place_box_and_goal(&mut placer, &[agent], &layout.hazards)?;
            layout.box_ = Some(Circle::new(box_, BOX_RADIUS));
            layout.goal = Some(Circle::new(goal, GOAL_RADIUS));
            Ok(TaskEvent::BoxInGoal)
        }
    }
}

/// One episode of a task: world state, its own random stream for layout and
/// respawns, and the distance bookkeeping behind the progress reward.
#[derive(Debug, Clone)]
pub struct TaskEnv {
    config: TaskConfig,
    state: WorldState,
    rng: ChaCha8Rng,
    distances: [f64; 2],
}

impl TaskEnv {
    pub fn new(config: TaskConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = make_layout(
            config.kind,
            &mut rng,
            config.hazards_enabled,
            &config.overrides,
        )?;
        let state = WorldState::new(layout);
        let distances = progress_distances(config.kind, &state);
        Ok(TaskEnv {
            config,
            state,
            rng,
            distances,
        })
    }

    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn observe(&self) -> Observation {
        self.state.observe()
    }

    pub fn is_done(&self) -> bool {
        self.state.step >= self.config.horizon
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::Argument(format!(
                "episode already reached its horizon of {} steps",
                self.config.horizon
            )));
        }
        self.state.advance(action);
        let after = progress_distances(self.config.kind, &self.state);
        let reward = (self.distances[0] - after[0]) + (self.distances[1] - after[1]);
        let hazard = self.state.hazard();
        let event = check_events(self.config.kind, &mut self.state, &mut self.rng)?;
        self.distances = progress_distances(self.config.kind, &self.state);
        Ok(StepOutcome {
            reward,
            hazard,
            event,
            observation: self.state.observe(),
        })
    }
}
