//! Classical energy detection: the noise-normalized statistic, exact CFAR
//! thresholds from the Gamma law of the statistic, noise-variance
//! estimation, and the closed-form SNR-wall under noise uncertainty.

mod special;

pub use special::{gammainc_lower, gammainc_upper, gammainc_upper_inv, q_func, q_inv};

use crate::sigmod::{Hypothesis, IQFrame};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EndetError {
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("noise variance estimate must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("need at least {needed} noise samples, got {got}")]
    NotEnoughNoiseSamples { needed: usize, got: usize },
    #[error("sample count must be positive")]
    ZeroSamples,
    #[error(
        "SNR-wall undefined: 1 - Q^-1(Pf) sqrt(phi) = {denominator} <= 0, \
         the (Pf, Pd, N, M) requirement is unattainable"
    )]
    WallUnattainable { denominator: f64 },
}

/// Number of noise-only samples available for variance estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleBudget {
    Finite(usize),
    Infinite,
}

impl SampleBudget {
    /// phi = (N + M) / (N M); with M infinite this degenerates to 1/N.
    pub fn phi(self, n_samples: usize) -> f64 {
        let n = n_samples as f64;
        match self {
            SampleBudget::Finite(m) => (n + m as f64) / (n * m as f64),
            SampleBudget::Infinite => 1.0 / n,
        }
    }
}

/// Noise knowledge available to the detector: the true per-dimension
/// variance, the estimation budget, and the estimate actually used.
#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    pub sigma2: f64,
    pub m_samples: SampleBudget,
    pub sigma2_hat: f64,
}

impl NoiseModel {
    /// Perfectly known noise density (M infinite, estimate exact).
    pub fn known(sigma2: f64) -> Self {
        NoiseModel {
            sigma2,
            m_samples: SampleBudget::Infinite,
            sigma2_hat: sigma2,
        }
    }

    pub fn estimated(sigma2: f64, m: usize, sigma2_hat: f64) -> Self {
        NoiseModel {
            sigma2,
            m_samples: SampleBudget::Finite(m),
            sigma2_hat,
        }
    }
}

/// Performance requirement for an SNR-wall query.
#[derive(Debug, Clone, Copy)]
pub struct WallQuery {
    pub pf_target: f64,
    pub pd_target: f64,
    pub n_samples: usize,
    pub m_samples: SampleBudget,
}

/// Result of an SNR-wall evaluation: either a wall in dB, or no positive
/// wall (the requirement is met at arbitrarily low SNR in the model).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnrWall {
    Db(f64),
    NoWall,
}

impl SnrWall {
    pub fn db(self) -> Option<f64> {
        match self {
            SnrWall::Db(v) => Some(v),
            SnrWall::NoWall => None,
        }
    }
}

/// Energy statistic Lambda = (1 / (2 sigma2_hat N)) sum |y(n)|^2.
///
/// Under H0 with the true noise variance, E[Lambda] = 1.
pub fn energy_statistic(frame: &IQFrame, sigma2_hat: f64) -> Result<f64, EndetError> {
    if !(sigma2_hat > 0.0) {
        return Err(EndetError::NonPositiveVariance(sigma2_hat));
    }
    if frame.is_empty() {
        return Err(EndetError::ZeroSamples);
    }
    let sum: f64 = frame.samples().iter().map(|s| s.norm_sqr()).sum();
    Ok(sum / (2.0 * sigma2_hat * frame.len() as f64))
}

/// Exact CFAR threshold: under H0 with known noise variance, N * Lambda is a
/// sum of N unit-mean exponentials, i.e. Gamma(N, 1), so the threshold that
/// pins Pr(Lambda > lambda) = pf is the Gamma upper-quantile divided by N.
pub fn cfar_threshold(pf_target: f64, n_samples: usize) -> Result<f64, EndetError> {
    if n_samples == 0 {
        return Err(EndetError::ZeroSamples);
    }
    if !(pf_target > 0.0 && pf_target < 1.0) {
        return Err(EndetError::ProbabilityOutOfRange(pf_target));
    }
    Ok(gammainc_upper_inv(n_samples as f64, pf_target)? / n_samples as f64)
}

/// Gaussian-regime threshold under noise uncertainty: lambda = 1 +
/// Q^-1(pf) sqrt(phi) with phi = (N + M)/(N M). This is the threshold model
/// behind the SNR-wall expression; use [`cfar_threshold`] when the noise
/// variance is known exactly.
pub fn gaussian_threshold(
    pf_target: f64,
    n_samples: usize,
    m_samples: SampleBudget,
) -> Result<f64, EndetError> {
    if n_samples == 0 {
        return Err(EndetError::ZeroSamples);
    }
    Ok(1.0 + q_inv(pf_target)? * libm::sqrt(m_samples.phi(n_samples)))
}

/// Unbiased per-dimension noise variance estimate from M complex noise-only
/// samples: sigma2_hat = (1 / 2M) sum |w(m)|^2.
pub fn estimate_noise(noise_samples: &IQFrame, m_samples: usize) -> Result<f64, EndetError> {
    if m_samples == 0 {
        return Err(EndetError::ZeroSamples);
    }
    if noise_samples.len() < m_samples {
        return Err(EndetError::NotEnoughNoiseSamples {
            needed: m_samples,
            got: noise_samples.len(),
        });
    }
    let sum: f64 = noise_samples.samples()[..m_samples]
        .iter()
        .map(|w| w.norm_sqr())
        .sum();
    Ok(sum / (2.0 * m_samples as f64))
}

/// SNR-wall in dB for a (Pf, Pd, N, M) requirement:
/// gamma_min = (1 - Q^-1(Pd) sqrt(phi)) / (1 - Q^-1(Pf) sqrt(phi)) - 1.
///
/// A non-positive gamma_min means the requirement imposes no wall and is
/// reported as [`SnrWall::NoWall`]; a non-positive denominator means the
/// requirement cannot be met at any SNR and is an error.
pub fn snr_wall(query: &WallQuery) -> Result<SnrWall, EndetError> {
    if query.n_samples == 0 {
        return Err(EndetError::ZeroSamples);
    }
    let phi = query.m_samples.phi(query.n_samples);
    let sqrt_phi = libm::sqrt(phi);
    let numerator = 1.0 - q_inv(query.pd_target)? * sqrt_phi;
    let denominator = 1.0 - q_inv(query.pf_target)? * sqrt_phi;
    if denominator <= 0.0 {
        return Err(EndetError::WallUnattainable { denominator });
    }
    let gamma_min = numerator / denominator - 1.0;
    if gamma_min <= 0.0 {
        return Ok(SnrWall::NoWall);
    }
    Ok(SnrWall::Db(10.0 * libm::log10(gamma_min)))
}

/// Threshold test: H1 iff Lambda > lambda; exact ties decide H0.
pub fn ed_detect(
    frame: &IQFrame,
    noise: &NoiseModel,
    threshold: f64,
) -> Result<Hypothesis, EndetError> {
    let stat = energy_statistic(frame, noise.sigma2_hat)?;
    Ok(if stat > threshold {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    })
}
