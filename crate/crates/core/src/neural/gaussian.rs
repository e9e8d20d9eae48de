use std::f64::consts::{E, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};

/// State-independent diagonal Gaussian noise, stored as `log σ` so that
/// σ stays positive under unconstrained optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianHead {
    pub log_sigma: Vec<f64>,
}

impl GaussianHead {
    pub fn new(dim: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "initial sigma must be positive, got {sigma}"
            )));
        }
        Ok(GaussianHead {
            log_sigma: vec![sigma.ln(); dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.log_sigma.len()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.log_sigma.iter().map(|l| l.exp()).collect()
    }
}

impl Parameters for GaussianHead {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.log_sigma]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.log_sigma]
    }
}

fn check_sigma(sigma: &[f64]) -> Result<()> {
    match sigma.iter().find(|s| s.is_nan() || **s <= 0.0) {
        Some(s) => Err(Error::Domain(format!("sigma must be positive, got {s}"))),
        None => Ok(()),
    }
}

/// Log-density of `action` under `N(mean, diag(sigma²))`.
pub fn gaussian_logprob(mean: &[f64], sigma: &[f64], action: &[f64]) -> Result<f64> {
    if mean.len() != sigma.len() || mean.len() != action.len() {
        return Err(Error::Shape(format!(
            "logprob dims: mean {}, sigma {}, action {}",
            mean.len(),
            sigma.len(),
            action.len()
        )));
    }
    check_sigma(sigma)?;
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    Ok(mean
        .iter()
        .zip(sigma)
        .zip(action)
        .map(|((m, s), a)| {
            let z = (a - m) / s;
            -0.5 * z * z - s.ln() - half_log_2pi
        })
        .sum())
}

pub fn gaussian_entropy(sigma: &[f64]) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(sigma
        .iter()
        .map(|s| 0.5 * (2.0 * PI * E * s * s).ln())
        .sum())
}

/// `mean + sigma ⊙ z` with `z` drawn per dimension from the supplied generator.
pub fn gaussian_sample<R: Rng + ?Sized>(
    mean: &[f64],
    sigma: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if mean.len() != sigma.len() {
        return Err(Error::Shape(format!(
            "sample dims: mean {}, sigma {}",
            mean.len(),
            sigma.len()
        )));
    }
    check_sigma(sigma)?;
    Ok(mean
        .iter()
        .zip(sigma)
        .map(|(m, s)| {
            let z: f64 = StandardNormal.sample(rng);
            m + s * z
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_normal_at_mean() {
        let lp = gaussian_logprob(&[0.0], &[1.0], &[0.0]).unwrap();
        assert!((lp + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn two_dim_reference_value() {
        let direct = -2.0 * (0.5 * (0.1_f64 / 0.6).powi(2) + 0.6_f64.ln() + 0.5 * (2.0 * PI).ln());
        let lp = gaussian_logprob(&[0.0, 0.0], &[0.6, 0.6], &[0.1, -0.1]).unwrap();
        assert!((lp - direct).abs() < 1e-14);
        assert!((lp + 0.844_004).abs() < 1e-6);
    }

    #[test]
    fn logprob_peaks_at_mean() {
        let at_mean = gaussian_logprob(&[0.3], &[0.5], &[0.3]).unwrap();
        for a in [-1.0, 0.0, 0.29, 0.31, 2.0] {
            assert!(gaussian_logprob(&[0.3], &[0.5], &[a]).unwrap() < at_mean);
        }
    }

    #[test]
    fn entropy_values() {
        assert!((gaussian_entropy(&[1.0]).unwrap() - 1.418_938_533_204_672_7).abs() < 1e-12);
        assert!((gaussian_entropy(&[1.0, 1.0]).unwrap() - 2.837_877_066_409_345).abs() < 1e-12);
        let d = gaussian_entropy(&[1.4, 0.2]).unwrap() - gaussian_entropy(&[0.7, 0.1]).unwrap();
        assert!((d - 2.0 * 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn non_positive_sigma_is_domain_error() {
        assert!(matches!(gaussian_entropy(&[0.0]), Err(Error::Domain(_))));
        assert!(matches!(
            gaussian_logprob(&[0.0], &[-1.0], &[0.0]),
            Err(Error::Domain(_))
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            gaussian_sample(&[0.0], &[f64::NAN], &mut rng),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn tiny_sigma_returns_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = gaussian_sample(&[0.25, -0.5], &[1e-300, 1e-300], &mut rng).unwrap();
        assert_eq!(a, vec![0.25, -0.5]);
    }

    #[test]
    fn sampling_is_reproducible() {
        let a = gaussian_sample(&[0.0; 3], &[0.6; 3], &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = gaussian_sample(&[0.0; 3], &[0.6; 3], &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| gaussian_sample(&[0.0], &[0.6], &mut rng).unwrap()[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var.sqrt() - 0.6).abs() < 0.01, "std {}", var.sqrt());
    }

    #[test]
    fn head_initialization() {
        let head = GaussianHead::new(2, 0.6).unwrap();
        assert_eq!(head.log_sigma, vec![0.6_f64.ln(); 2]);
        assert!(head.sigma().iter().all(|s| (s - 0.6).abs() < 1e-15));
        assert!(GaussianHead::new(2, 0.0).is_err());
    }
}
