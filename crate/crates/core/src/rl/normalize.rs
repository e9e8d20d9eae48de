use serde::{Deserialize, Serialize};

use super::RolloutBatch;

/// Bound on a scaled reward.
pub const SCALED_REWARD_CLIP: f64 = 10.0;

/// Running mean and variance, merged batch-wise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunningMoments {
    pub count: f64,
    pub mean: f64,
    pub var: f64,
}

impl Default for RunningMoments {
    fn default() -> Self {
        RunningMoments {
            count: 1e-4,
            mean: 0.0,
            var: 1.0,
        }
    }
}

impl RunningMoments {
    pub fn update(&mut self, xs: &[f64]) {
        if xs.is_empty() {
            return;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let total = self.count + n;
        let delta = mean - self.mean;
        let m2 = self.var * self.count + var * n + delta * delta * self.count * n / total;
        self.mean += delta * n / total;
        self.var = m2 / total;
        self.count = total;
    }
}

/// Divides rewards by the running standard deviation of the discounted
/// return and clips them to `±SCALED_REWARD_CLIP`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardScaler {
    pub returns: RunningMoments,
}

impl RewardScaler {
    pub fn scale_batch(&mut self, batch: &mut RolloutBatch, gamma: f64) {
        let mut discounted = Vec::with_capacity(batch.len());
        for traj in &batch.trajectories {
            let mut ret = 0.0;
            for t in &traj.transitions {
                ret = ret * gamma + t.reward;
                discounted.push(ret);
            }
        }
        self.returns.update(&discounted);
        let std = (self.returns.var + 1e-8).sqrt();
        for traj in &mut batch.trajectories {
            for t in &mut traj.transitions {
                t.reward = (t.reward / std).clamp(-SCALED_REWARD_CLIP, SCALED_REWARD_CLIP);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batched_moments_match_direct() {
        let xs: Vec<f64> = (0..50)
            .map(|i| (i as f64 * 0.37).sin() * 3.0 + 1.0)
            .collect();
        let mut m = RunningMoments {
            count: 0.0,
            mean: 0.0,
            var: 0.0,
        };
        m.update(&xs[..17]);
        m.update(&xs[17..]);
        let mean = xs.iter().sum::<f64>() / 50.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 50.0;
        assert!((m.mean - mean).abs() < 1e-12);
        assert!((m.var - var).abs() < 1e-12);
    }
}
