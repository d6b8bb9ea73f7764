//! Channel application, CSCG noise, and energy normalization.

use super::{ChannelDraw, IQFrame, SigmodError};
use crate::rng::RngStream;
use num_complex::Complex64;

/// Pass a frame through a constant-gain channel and add CSCG noise sized so
/// the received SNR (signal power over noise power, per complex sample)
/// equals `draw.snr_db`: total noise variance 2*sigma_w^2 = |h|^2 P_s / gamma.
///
/// An infinite `snr_db` disables the noise entirely. A zero gain blocks the
/// signal and leaves pure noise, referenced to unit gain (2*sigma_w^2 =
/// P_s / gamma) since the received-SNR recipe is degenerate there.
pub fn apply_channel(
    frame: &IQFrame,
    draw: &ChannelDraw,
    rng: &mut RngStream,
) -> Result<IQFrame, SigmodError> {
    let p_s = frame.power();
    if !(p_s > 0.0) || !p_s.is_finite() {
        return Err(SigmodError::ZeroPowerFrame);
    }
    if draw.snr_db == f64::INFINITY {
        return Ok(IQFrame::new(
            frame.samples().iter().map(|s| s * draw.gain).collect(),
        ));
    }
    let gamma = libm::pow(10.0, draw.snr_db / 10.0);
    let gain_sq = draw.gain.norm_sqr();
    let noise_power = if gain_sq > 0.0 {
        gain_sq * p_s / gamma // 2 sigma_w^2
    } else {
        p_s / gamma
    };
    let sigma_per_dim = libm::sqrt(noise_power / 2.0);
    Ok(apply_gain_and_noise(frame, draw.gain, sigma_per_dim, rng))
}

/// Channel application with an explicitly chosen per-dimension noise standard
/// deviation, for callers that size noise against a nominal (pre-fading)
/// signal power rather than the realized one.
pub fn apply_channel_with_noise(
    frame: &IQFrame,
    gain: Complex64,
    sigma2_per_dim: f64,
    rng: &mut RngStream,
) -> IQFrame {
    apply_gain_and_noise(frame, gain, libm::sqrt(sigma2_per_dim), rng)
}

fn apply_gain_and_noise(
    frame: &IQFrame,
    gain: Complex64,
    sigma_per_dim: f64,
    rng: &mut RngStream,
) -> IQFrame {
    IQFrame::new(
        frame
            .samples()
            .iter()
            .map(|s| {
                let (g1, g2) = rng.next_gaussian_pair();
                s * gain + Complex64::new(sigma_per_dim * g1, sigma_per_dim * g2)
            })
            .collect(),
    )
}

/// Pure CSCG noise frame with per-dimension variance `sigma2_per_dim`
/// (total per-sample variance 2*sigma2_per_dim).
pub fn cscg_frame(n: usize, sigma2_per_dim: f64, rng: &mut RngStream) -> IQFrame {
    let sigma = libm::sqrt(sigma2_per_dim);
    IQFrame::new(
        (0..n)
            .map(|_| {
                let (g1, g2) = rng.next_gaussian_pair();
                Complex64::new(sigma * g1, sigma * g2)
            })
            .collect(),
    )
}

/// Scale a frame to exactly unit average power, preserving every sample's
/// phase. Idempotent on already-normalized frames.
pub fn energy_normalize(frame: &IQFrame) -> Result<IQFrame, SigmodError> {
    let p = frame.power();
    if !(p > 0.0) || !p.is_finite() {
        return Err(SigmodError::ZeroPowerFrame);
    }
    let scale = 1.0 / libm::sqrt(p);
    Ok(IQFrame::new(
        frame.samples().iter().map(|s| s * scale).collect(),
    ))
}
