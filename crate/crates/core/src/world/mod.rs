//! Deterministic 2D point-agent simulator with circle collisions, box
//! pushing, per-category pseudo-lidar and compass features.
//!
//! The geometry is a deliberate simplification: a square map, circular
//! objects, and first-order kinematics with no momentum.

mod geometry;
mod sensors;

use serde::{Deserialize, Serialize};

pub use geometry::{wrap_angle, Circle, Vec2};
pub use sensors::{
    assemble_observation, compass_features, lidar_scan, Observation, COMPASS_DIM, LIDAR_BINS,
    OBS_DIM,
};

pub const MAP_HALF_EXTENT: f64 = 2.0;
pub const AGENT_RADIUS: f64 = 0.1;
pub const HAZARD_RADIUS: f64 = 0.2;
pub const GOAL_RADIUS: f64 = 0.3;
pub const BUTTON_RADIUS: f64 = 0.1;
pub const BOX_RADIUS: f64 = 0.2;
pub const SPEED_GAIN: f64 = 1.0;
pub const TURN_GAIN: f64 = 1.0;
pub const ACTION_LIMIT: f64 = 0.1;
pub const HAZARD_RANGE: f64 = 1.0;
pub const ELEMENT_RANGE: f64 = 6.0;
pub const EPISODE_HORIZON: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentPose {
    pub position: Vec2,
    /// Radians in `[-π, π)`.
    pub heading: f64,
}

impl AgentPose {
    pub fn new(position: Vec2, heading: f64) -> Self {
        AgentPose {
            position,
            heading: wrap_angle(heading),
        }
    }
}

/// Two-dimensional control: forward/backward speed and turn rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub forward: f64,
    pub turn: f64,
}

impl Action {
    pub const ZERO: Action = Action {
        forward: 0.0,
        turn: 0.0,
    };

    pub fn new(forward: f64, turn: f64) -> Self {
        Action { forward, turn }
    }

    pub fn from_slice(values: &[f64]) -> Self {
        Action::new(values[0], values[1])
    }

    /// Both components clamped to `[-ACTION_LIMIT, ACTION_LIMIT]`; NaN maps to 0.
    pub fn clamped(self) -> Self {
        let c = |v: f64| {
            if v.is_nan() {
                0.0
            } else {
                v.clamp(-ACTION_LIMIT, ACTION_LIMIT)
            }
        };
        Action::new(c(self.forward), c(self.turn))
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.forward, self.turn]
    }
}

/// Static arrangement of one episode plus the objects events may move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldLayout {
    pub half_extent: f64,
    pub hazards: Vec<Circle>,
    pub buttons: Vec<Circle>,
    /// Index into `buttons` of the button currently rewarded.
    pub correct_button: Option<usize>,
    pub goal: Option<Circle>,
    #[serde(rename = "box")]
    pub box_: Option<Circle>,
    pub agent_spawn: AgentPose,
}

impl WorldLayout {
    pub fn empty() -> Self {
        WorldLayout {
            half_extent: MAP_HALF_EXTENT,
            hazards: Vec::new(),
            buttons: Vec::new(),
            correct_button: None,
            goal: None,
            box_: None,
            agent_spawn: AgentPose::new(Vec2::ZERO, 0.0),
        }
    }

    pub fn correct_button_circle(&self) -> Option<Circle> {
        self.correct_button
            .and_then(|i| self.buttons.get(i).copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub layout: WorldLayout,
    pub agent: AgentPose,
    pub step: usize,
}

impl WorldState {
    pub fn new(layout: WorldLayout) -> Self {
        let agent = layout.agent_spawn;
        WorldState {
            layout,
            agent,
            step: 0,
        }
    }

    pub fn box_position(&self) -> Option<Vec2> {
        self.layout.box_.map(|b| b.center)
    }

    /// Advances one step: kinematics then box contact. Pure in `(self, action)`.
    pub fn advance(&mut self, action: Action) {
        self.agent = step_kinematics(self.agent, action, self.layout.half_extent);
        if let Some(b) = self.layout.box_.as_mut() {
            b.center = resolve_box_push(
                self.agent,
                AGENT_RADIUS,
                b.center,
                b.radius,
                self.layout.half_extent,
            );
        }
        self.step += 1;
    }

    pub fn hazard(&self) -> u8 {
        hazard_indicator(self.agent.position, &self.layout.hazards)
    }

    pub fn observe(&self) -> Observation {
        assemble_observation(self)
    }
}

/// First-order point kinematics: turn, then move along the new heading.
pub fn step_kinematics(pose: AgentPose, action: Action, half_extent: f64) -> AgentPose {
    let action = action.clamped();
    let heading = wrap_angle(pose.heading + action.turn * TURN_GAIN);
    let position = (pose.position + Vec2::from_angle(heading) * (action.forward * SPEED_GAIN))
        .clamp_to_square(half_extent);
    AgentPose { position, heading }
}

/// `1` iff the agent center lies strictly inside some hazard.
pub fn hazard_indicator(position: Vec2, hazards: &[Circle]) -> u8 {
    u8::from(hazards.iter().any(|h| h.contains(position)))
}

/// Pushes the box out of the agent along the agent→box direction until the
/// two circles are tangent, then clamps the box to the map.
pub fn resolve_box_push(
    agent: AgentPose,
    agent_radius: f64,
    box_center: Vec2,
    box_radius: f64,
    half_extent: f64,
) -> Vec2 {
    let contact = agent_radius + box_radius;
    let offset = box_center - agent.position;
    let dist = offset.norm();
    if dist >= contact {
        return box_center;
    }
    let direction = if dist > 0.0 {
        offset * (1.0 / dist)
    } else {
        Vec2::from_angle(agent.heading)
    };
    (agent.position + direction * contact).clamp_to_square(half_extent - box_radius)
}
