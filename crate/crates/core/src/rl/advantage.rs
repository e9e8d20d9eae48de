use super::{AdvantageTargets, PpoHyper, RolloutBatch};
use crate::error::{Error, Result};

const NORMALIZE_EPS: f64 = 1e-8;

/// `R_i = r_i + γ R_{i+1}`, evaluated from the end of the episode.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (o, r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *o = acc;
    }
    out
}

/// Generalized advantage estimates for one episode that ends at its last
/// step (the value after the final step is 0).
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    debug_assert_eq!(rewards.len(), values.len());
    let mut adv = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    let mut next_value = 0.0;
    for i in (0..rewards.len()).rev() {
        let delta = rewards[i] + gamma * next_value - values[i];
        acc = delta + gamma * lambda * acc;
        adv[i] = acc;
        next_value = values[i];
    }
    adv
}

/// Fills per-transition return targets and batch-normalized advantages.
pub fn compute_returns_advantages(batch: &mut RolloutBatch, hyper: &PpoHyper) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Argument(
            "cannot compute advantages of an empty batch".into(),
        ));
    }
    let mut returns = Vec::with_capacity(batch.len());
    let mut advantages = Vec::with_capacity(batch.len());
    for traj in &batch.trajectories {
        let rewards: Vec<f64> = traj.transitions.iter().map(|t| t.reward).collect();
        let values: Vec<f64> = traj.transitions.iter().map(|t| t.value).collect();
        let adv = gae(&rewards, &values, hyper.gamma, hyper.gae_lambda);
        returns.extend(adv.iter().zip(&values).map(|(a, v)| a + v));
        advantages.extend(adv);
    }
    if advantages.iter().chain(&returns).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite return or advantage".into()));
    }

    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    let std = (advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    advantages
        .iter_mut()
        .for_each(|a| *a = (*a - mean) / (std + NORMALIZE_EPS));

    batch.targets = Some(AdvantageTargets {
        returns,
        advantages,
        normalized: true,
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discounted_examples() {
        let r = discounted_return(&[1.0, 1.0, 1.0], 0.99);
        assert!((r[0] - 2.9701).abs() < 1e-12);
        assert!((r[1] - 1.99).abs() < 1e-12);
        assert_eq!(r[2], 1.0);
        assert_eq!(
            discounted_return(&[0.5, -2.0, 3.0], 0.0),
            vec![0.5, -2.0, 3.0]
        );
    }

    #[test]
    fn gae_lambda_one_zero_values_is_discounted_return() {
        let rewards = [1.0, 1.0, 1.0];
        let adv = gae(&rewards, &[0.0; 3], 0.99, 1.0);
        assert_eq!(adv, discounted_return(&rewards, 0.99));
    }

    #[test]
    fn single_terminal_transition() {
        let adv = gae(&[1.0], &[0.5], 0.99, 0.95);
        assert_eq!(adv, vec![0.5]);
        assert_eq!(adv[0] + 0.5, 1.0);
    }
}
