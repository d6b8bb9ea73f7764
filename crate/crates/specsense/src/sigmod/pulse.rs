//! Root-raised-cosine interpolation of linear modulations.

use super::{IQFrame, SigmodError};
use num_complex::Complex64;

/// Root-raised-cosine filter taps at `sps` samples per symbol, spanning
/// `span_symbols` symbols each side of the peak (length span*sps*... the
/// returned vector has `2 * half + 1` taps with `half = span_symbols * sps / 2`
/// rounded so the full span covers `span_symbols` symbols total).
///
/// Taps are energy-normalized so that interpolating an i.i.d. unit-energy
/// symbol stream yields unit average power: sum of squared taps equals `sps`.
pub fn rrc_taps(sps: usize, rolloff: f64, span_symbols: usize) -> Vec<f64> {
    let half = span_symbols * sps / 2;
    let len = 2 * half + 1;
    let beta = rolloff;
    let mut taps = Vec::with_capacity(len);
    for i in 0..len {
        let t = (i as f64 - half as f64) / sps as f64;
        taps.push(rrc_impulse(t, beta));
    }
    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let scale = libm::sqrt(sps as f64 / energy);
    for h in &mut taps {
        *h *= scale;
    }
    taps
}

/// Unnormalized RRC impulse response at time `t` in symbol units.
fn rrc_impulse(t: f64, beta: f64) -> f64 {
    use std::f64::consts::PI;
    if t == 0.0 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    let quarter = 1.0 / (4.0 * beta);
    if (t.abs() - quarter).abs() < 1e-9 {
        let a = (1.0 + 2.0 / PI) * libm::sin(PI / (4.0 * beta));
        let b = (1.0 - 2.0 / PI) * libm::cos(PI / (4.0 * beta));
        return beta / libm::sqrt(2.0) * (a + b);
    }
    let num = libm::sin(PI * t * (1.0 - beta)) + 4.0 * beta * t * libm::cos(PI * t * (1.0 + beta));
    let den = PI * t * (1.0 - (4.0 * beta * t) * (4.0 * beta * t));
    num / den
}

/// Minimum symbol count `pulse_shape` accepts for a given frame length:
/// enough to fill the frame plus a `span_symbols` transient margin each side.
pub fn symbols_needed(sample_length: usize, sps: usize, span_symbols: usize) -> usize {
    sample_length.div_ceil(sps) + 2 * span_symbols
}

/// Interpolate `symbols` at `sps` samples per symbol through an RRC filter
/// and center-crop the steady-state region to `sample_length` samples.
pub fn pulse_shape(
    symbols: &[Complex64],
    sps: usize,
    rolloff: f64,
    span_symbols: usize,
    sample_length: usize,
) -> Result<IQFrame, SigmodError> {
    if sps == 0 {
        return Err(SigmodError::InvalidParameter("sps must be >= 1".into()));
    }
    if !(rolloff > 0.0 && rolloff <= 1.0) {
        return Err(SigmodError::InvalidParameter(format!(
            "rolloff {rolloff} outside (0, 1]"
        )));
    }
    if span_symbols < 2 {
        return Err(SigmodError::InvalidParameter("span must be >= 2".into()));
    }
    if sample_length == 0 {
        return Err(SigmodError::InvalidParameter("sample_length = 0".into()));
    }
    let needed = symbols_needed(sample_length, sps, span_symbols);
    if symbols.len() < needed {
        return Err(SigmodError::TooFewSymbols {
            needed,
            got: symbols.len(),
        });
    }

    let taps = rrc_taps(sps, rolloff, span_symbols);
    let half = (taps.len() - 1) / 2;
    let upsampled_len = symbols.len() * sps;

    // Same-length convolution of the zero-stuffed symbol stream, exploiting
    // sparsity: only every sps-th input sample is nonzero.
    let mut out = vec![Complex64::new(0.0, 0.0); upsampled_len];
    for (m, &a) in symbols.iter().enumerate() {
        let center = m * sps;
        for (k, &h) in taps.iter().enumerate() {
            let i = center as isize + k as isize - half as isize;
            if i >= 0 && (i as usize) < upsampled_len {
                out[i as usize] += a * h;
            }
        }
    }

    // Crop past the left transient (span_symbols worth of samples).
    let start = span_symbols * sps;
    Ok(IQFrame::new(
        out[start..start + sample_length].to_vec(),
    ))
}
