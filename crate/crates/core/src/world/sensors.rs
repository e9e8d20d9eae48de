use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{AgentPose, Circle, Vec2, WorldState, AGENT_RADIUS, ELEMENT_RANGE, HAZARD_RANGE};
use crate::error::{Error, Result};

pub const LIDAR_BINS: usize = 16;
pub const COMPASS_DIM: usize = 5;
pub const OBS_DIM: usize = 5 * LIDAR_BINS + COMPASS_DIM;

const HAZARD_OFFSET: usize = 0;
const GOAL_OFFSET: usize = LIDAR_BINS;
const BOX_OFFSET: usize = 2 * LIDAR_BINS;
const BUTTONS_OFFSET: usize = 3 * LIDAR_BINS;
const CORRECT_BUTTON_OFFSET: usize = 4 * LIDAR_BINS;
const COMPASS_OFFSET: usize = 5 * LIDAR_BINS;

/// Fixed-layout sensor vector: hazard, goal, box, buttons and
/// correct-button lidar (16 bins each), then five compass features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Observation {
    values: Vec<f64>,
}

impl Observation {
    pub fn zeros() -> Self {
        Observation {
            values: vec![0.0; OBS_DIM],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn hazard_lidar(&self) -> &[f64] {
        &self.values[HAZARD_OFFSET..HAZARD_OFFSET + LIDAR_BINS]
    }

    pub fn goal_lidar(&self) -> &[f64] {
        &self.values[GOAL_OFFSET..GOAL_OFFSET + LIDAR_BINS]
    }

    pub fn box_lidar(&self) -> &[f64] {
        &self.values[BOX_OFFSET..BOX_OFFSET + LIDAR_BINS]
    }

    pub fn buttons_lidar(&self) -> &[f64] {
        &self.values[BUTTONS_OFFSET..BUTTONS_OFFSET + LIDAR_BINS]
    }

    pub fn correct_button_lidar(&self) -> &[f64] {
        &self.values[CORRECT_BUTTON_OFFSET..CORRECT_BUTTON_OFFSET + LIDAR_BINS]
    }

    pub fn compass(&self) -> &[f64] {
        &self.values[COMPASS_OFFSET..]
    }
}

impl TryFrom<Vec<f64>> for Observation {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        if values.len() != OBS_DIM {
            return Err(Error::Shape(format!(
                "observation needs {OBS_DIM} entries, got {}",
                values.len()
            )));
        }
        Ok(Observation { values })
    }
}

impl From<Observation> for Vec<f64> {
    fn from(obs: Observation) -> Self {
        obs.values
    }
}

/// Nearest-bin pseudo-lidar. Each object lights the bin closest to its
/// bearing with `1 - gap / range`, where `gap` is the surface-to-surface
/// distance; overlapping objects keep the maximum reading.
pub fn lidar_scan(
    agent: AgentPose,
    agent_radius: f64,
    objects: &[Circle],
    range: f64,
) -> [f64; LIDAR_BINS] {
    let mut bins = [0.0_f64; LIDAR_BINS];
    let bin_width = 2.0 * PI / LIDAR_BINS as f64;
    for obj in objects {
        let offset = obj.center - agent.position;
        let gap = (offset.norm() - agent_radius - obj.radius).max(0.0);
        let reading = (1.0 - gap / range).max(0.0);
        if reading <= 0.0 {
            continue;
        }
        let bearing = offset.angle() - agent.heading;
        let bin = ((bearing / bin_width).round() as i64).rem_euclid(LIDAR_BINS as i64) as usize;
        bins[bin] = bins[bin].max(reading);
    }
    bins
}

/// `(cos h, sin h, cos β, sin β, min(1, |p| / half_extent))` with β the
/// bearing of the map origin in the agent frame; β = 0 at the origin itself.
pub fn compass_features(agent: AgentPose, half_extent: f64) -> [f64; COMPASS_DIM] {
    let to_center = Vec2::ZERO - agent.position;
    let (cos_b, sin_b) = if to_center.norm() > 0.0 {
        let beta = to_center.angle() - agent.heading;
        (beta.cos(), beta.sin())
    } else {
        (1.0, 0.0)
    };
    [
        agent.heading.cos(),
        agent.heading.sin(),
        cos_b,
        sin_b,
        (agent.position.norm() / half_extent).min(1.0),
    ]
}

pub fn assemble_observation(state: &WorldState) -> Observation {
    let layout = &state.layout;
    let agent = state.agent;
    let mut values = Vec::with_capacity(OBS_DIM);
    values.extend(lidar_scan(
        agent,
        AGENT_RADIUS,
        &layout.hazards,
        HAZARD_RANGE,
    ));
    let goal: Vec<Circle> = layout.goal.into_iter().collect();
    values.extend(lidar_scan(agent, AGENT_RADIUS, &goal, ELEMENT_RANGE));
    let box_: Vec<Circle> = layout.box_.into_iter().collect();
    values.extend(lidar_scan(agent, AGENT_RADIUS, &box_, ELEMENT_RANGE));
    values.extend(lidar_scan(
        agent,
        AGENT_RADIUS,
        &layout.buttons,
        ELEMENT_RANGE,
    ));
    let correct: Vec<Circle> = layout.correct_button_circle().into_iter().collect();
    values.extend(lidar_scan(agent, AGENT_RADIUS, &correct, ELEMENT_RANGE));
    values.extend(compass_features(agent, layout.half_extent));
    debug_assert_eq!(values.len(), OBS_DIM);
    Observation { values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{WorldLayout, HAZARD_RADIUS};

    fn at_origin() -> AgentPose {
        AgentPose::new(Vec2::ZERO, 0.0)
    }

    #[test]
    fn no_objects_reads_zero() {
        assert_eq!(lidar_scan(at_origin(), 0.1, &[], 1.0), [0.0; LIDAR_BINS]);
    }

    #[test]
    fn adjacent_object_reads_one() {
        let obj = Circle::new(Vec2::new(0.3, 0.0), 0.2);
        let bins = lidar_scan(at_origin(), 0.1, &[obj], 1.0);
        assert_eq!(bins[0], 1.0);
        assert!(bins[1..].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn point_object_half_range() {
        let obj = Circle::new(Vec2::new(0.5, 0.0), 0.0);
        let bins = lidar_scan(at_origin(), 0.0, &[obj], 1.0);
        assert_eq!(bins[0], 0.5);
        assert!(bins[1..].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn bearing_is_agent_relative() {
        // object straight north, agent facing north -> bin 0; facing east -> bin 4
        let obj = Circle::new(Vec2::new(0.0, 0.5), 0.0);
        let north = AgentPose::new(Vec2::ZERO, PI / 2.0);
        assert!(lidar_scan(north, 0.0, &[obj], 1.0)[0] > 0.0);
        assert!(lidar_scan(at_origin(), 0.0, &[obj], 1.0)[4] > 0.0);
        // behind the agent maps to bin 8, to the right to bin 12
        let west = Circle::new(Vec2::new(-0.5, 0.0), 0.0);
        let south = Circle::new(Vec2::new(0.0, -0.5), 0.0);
        assert!(lidar_scan(at_origin(), 0.0, &[west], 1.0)[8] > 0.0);
        assert!(lidar_scan(at_origin(), 0.0, &[south], 1.0)[12] > 0.0);
    }

    #[test]
    fn overlapping_bins_keep_maximum() {
        let near = Circle::new(Vec2::new(0.4, 0.0), 0.0);
        let far = Circle::new(Vec2::new(0.8, 0.01), 0.0);
        let bins = lidar_scan(at_origin(), 0.0, &[far, near], 1.0);
        assert!((bins[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn compass_at_origin() {
        assert_eq!(
            compass_features(at_origin(), 2.0),
            [1.0, 0.0, 1.0, 0.0, 0.0]
        );
    }

    #[test]
    fn compass_hand_geometry() {
        let pose = AgentPose::new(Vec2::new(1.0, 0.0), PI / 2.0);
        let c = compass_features(pose, 2.0);
        let expected = [0.0, 1.0, 0.0, 1.0, 0.5];
        for (a, b) in c.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn empty_layout_observation() {
        let state = WorldState::new(WorldLayout::empty());
        let obs = assemble_observation(&state);
        assert_eq!(obs.as_slice().len(), OBS_DIM);
        assert!(obs.as_slice()[..80].iter().all(|&v| v == 0.0));
        assert_eq!(obs.compass(), &[1.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn hazard_range_is_short_element_range_long() {
        let mut layout = WorldLayout::empty();
        layout
            .hazards
            .push(Circle::new(Vec2::new(1.5, 0.0), HAZARD_RADIUS));
        layout.goal = Some(Circle::new(Vec2::new(-1.8, -1.8), 0.3));
        let obs = assemble_observation(&WorldState::new(layout));
        assert!(obs.hazard_lidar().iter().all(|&v| v == 0.0));
        assert!(obs.goal_lidar().iter().any(|&v| v > 0.0));
    }

    #[test]
    fn observation_serde_rejects_wrong_length() {
        assert!(serde_json::from_str::<Observation>("[0.0, 1.0]").is_err());
    }
}
