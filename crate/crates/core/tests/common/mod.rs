//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod gradcheck;

/// `Σ_k γ^k r_{t+k}` by direct summation.
pub fn brute_discounted(rewards: &[f64], gamma: f64) -> Vec<f64> {
    (0..rewards.len())
        .map(|t| {
            rewards[t..]
                .iter()
                .enumerate()
                .map(|(k, r)| gamma.powi(k as i32) * r)
                .sum()
        })
        .collect()
}

/// `Σ_l (γλ)^l δ_{t+l}` with `δ_t = r_t + γ V_{t+1} − V_t` and `V_T = 0`.
pub fn double_loop_gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let delta: Vec<f64> = (0..n)
        .map(|t| {
            let next = if t + 1 < n { values[t + 1] } else { 0.0 };
            rewards[t] + gamma * next - values[t]
        })
        .collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut weight = 1.0;
            for d in &delta[t..] {
                sum += weight * d;
                weight *= gamma * lambda;
            }
            sum
        })
        .collect()
}

/// `max |a − b|` over two equally long slices.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
