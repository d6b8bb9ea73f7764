//! Constant-envelope CPFSK and GFSK synthesis.

use super::{IQFrame, ModScheme, SigmodError};
use num_complex::Complex64;

/// Unit-sum Gaussian frequency-smoothing kernel for GFSK, sampled at `sps`
/// samples per symbol and truncated at two symbols each side.
///
/// The time constant follows the standard Gaussian filter relation
/// sigma = sqrt(ln 2) / (2 pi BT) symbols.
pub fn gaussian_freq_kernel(bt: f64, sps: usize) -> Vec<f64> {
    let sigma_samples = libm::sqrt(2.0_f64.ln()) / (std::f64::consts::TAU * bt) * sps as f64;
    let half = 2 * sps;
    let mut kernel: Vec<f64> = (0..=2 * half)
        .map(|k| {
            let t = k as f64 - half as f64;
            libm::exp(-0.5 * (t / sigma_samples) * (t / sigma_samples))
        })
        .collect();
    let sum: f64 = kernel.iter().sum();
    for g in &mut kernel {
        *g /= sum;
    }
    kernel
}

/// Modulate a binary symbol sequence as CPFSK or GFSK.
///
/// Bit 0 maps to the low tone at -(mod_index/2) of the symbol rate, bit 1 to
/// the high tone. The output has exactly `bits.len() * sps` samples, unit
/// envelope everywhere, and continuous phase. For GFSK the per-sample
/// instantaneous frequency is the CPFSK rectangular frequency convolved with
/// [`gaussian_freq_kernel`]; `bt` is ignored for CPFSK.
pub fn fsk_modulate(
    scheme: ModScheme,
    bits: &[usize],
    sps: usize,
    mod_index: f64,
    bt: f64,
) -> Result<IQFrame, SigmodError> {
    if !scheme.is_fsk() {
        return Err(SigmodError::LinearScheme(scheme));
    }
    if sps == 0 {
        return Err(SigmodError::InvalidParameter("sps must be >= 1".into()));
    }
    if !(mod_index > 0.0) {
        return Err(SigmodError::InvalidParameter(format!(
            "mod_index {mod_index} must be positive"
        )));
    }
    if bits.is_empty() {
        return Err(SigmodError::InvalidParameter("empty bit sequence".into()));
    }
    if let Some(&bad) = bits.iter().find(|&&b| b > 1) {
        return Err(SigmodError::NonBinarySymbol(bad));
    }

    // Per-sample phase increment of the rectangular frequency pulse.
    let step = std::f64::consts::PI * mod_index / sps as f64;
    let mut freq: Vec<f64> = Vec::with_capacity(bits.len() * sps);
    for &b in bits {
        let dir = if b == 0 { -1.0 } else { 1.0 };
        freq.extend(std::iter::repeat_n(dir * step, sps));
    }

    if scheme == ModScheme::Gfsk {
        if !(bt > 0.0) {
            return Err(SigmodError::InvalidParameter(format!(
                "bt {bt} must be positive"
            )));
        }
        freq = smooth_same(&freq, &gaussian_freq_kernel(bt, sps));
    }

    let mut phase = 0.0;
    let samples = freq
        .iter()
        .map(|&df| {
            let s = Complex64::new(libm::cos(phase), libm::sin(phase));
            phase += df;
            s
        })
        .collect();
    Ok(IQFrame::new(samples))
}

/// Same-length convolution with zero-padded edges.
fn smooth_same(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let half = (kernel.len() - 1) / 2;
    let mut out = vec![0.0; x.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, &g) in kernel.iter().enumerate() {
            let j = i as isize + half as isize - k as isize;
            if j >= 0 && (j as usize) < x.len() {
                acc += x[j as usize] * g;
            }
        }
        *o = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::sigmod::{DEFAULT_BT, DEFAULT_MOD_INDEX};

    fn random_bits(n: usize, seed: u64) -> Vec<usize> {
        let mut rng = RngStream::new(seed);
        (0..n).map(|_| rng.next_below(2) as usize).collect()
    }

    #[test]
    fn envelope_is_exactly_unit() {
        for scheme in [ModScheme::Cpfsk, ModScheme::Gfsk] {
            let bits = random_bits(40, 5);
            let frame =
                fsk_modulate(scheme, &bits, 8, DEFAULT_MOD_INDEX, DEFAULT_BT).unwrap();
            for s in frame.samples() {
                assert!((s.norm() - 1.0).abs() < 1e-12, "{scheme:?} envelope {}", s.norm());
            }
        }
    }

    #[test]
    fn cpfsk_all_zeros_is_low_tone() {
        // Analytic phase-ramp oracle: constant increment -pi*h/sps per sample.
        let sps = 8;
        let h = 0.5;
        let bits = vec![0usize; 16];
        let frame = fsk_modulate(ModScheme::Cpfsk, &bits, sps, h, 0.0).unwrap();
        let expect_step = -std::f64::consts::PI * h / sps as f64;
        let samples = frame.samples();
        for w in samples.windows(2) {
            let inc = (w[1] * w[0].conj()).arg();
            assert!((inc - expect_step).abs() < 1e-12, "increment {inc}");
        }
        // Tone frequency = -(h/2) * symbol rate = expect_step/(2 pi) * fs.
        let freq_cycles_per_sample = expect_step / std::f64::consts::TAU;
        assert!((freq_cycles_per_sample - (-h / 2.0 / sps as f64)).abs() < 1e-15);
    }

    #[test]
    fn gfsk_frequency_is_convolved_cpfsk_frequency() {
        // Oracle: build the rectangular CPFSK frequency from the bits, filter
        // it with the published kernel, and compare against the instantaneous
        // frequency measured on the GFSK waveform.
        let sps = 8;
        let bits = random_bits(32, 9);
        let cp = fsk_modulate(ModScheme::Cpfsk, &bits, sps, DEFAULT_MOD_INDEX, 0.0).unwrap();
        let gf = fsk_modulate(ModScheme::Gfsk, &bits, sps, DEFAULT_MOD_INDEX, DEFAULT_BT).unwrap();

        let inst_freq = |frame: &IQFrame| -> Vec<f64> {
            frame
                .samples()
                .windows(2)
                .map(|w| (w[1] * w[0].conj()).arg())
                .collect()
        };

        let step = std::f64::consts::PI * DEFAULT_MOD_INDEX / sps as f64;
        let rect: Vec<f64> = bits
            .iter()
            .flat_map(|&b| {
                std::iter::repeat_n(if b == 0 { -step } else { step }, sps)
            })
            .collect();

        // The measured CPFSK frequency equals the rectangular pulse exactly.
        for (a, b) in inst_freq(&cp).iter().zip(&rect) {
            assert!((a - b).abs() < 1e-12);
        }

        let kernel = gaussian_freq_kernel(DEFAULT_BT, sps);
        let expected = smooth_same(&rect, &kernel);
        for (a, b) in inst_freq(&gf).iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "gfsk freq {a} vs oracle {b}");
        }
    }

    #[test]
    fn non_binary_symbol_rejected() {
        let err = fsk_modulate(ModScheme::Cpfsk, &[0, 2], 8, 0.5, 0.3).unwrap_err();
        assert!(matches!(err, SigmodError::NonBinarySymbol(2)));
    }

    #[test]
    fn linear_scheme_rejected() {
        let err = fsk_modulate(ModScheme::Qpsk, &[0, 1], 8, 0.5, 0.3).unwrap_err();
        assert!(matches!(err, SigmodError::LinearScheme(ModScheme::Qpsk)));
    }

    #[test]
    fn kernel_sums_to_one() {
        let k = gaussian_freq_kernel(0.3, 8);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(k.len(), 4 * 8 + 1);
    }
}
