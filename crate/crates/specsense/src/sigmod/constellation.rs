//! Constellation tables with unit average energy.

use super::{ModScheme, SigmodError};
use num_complex::Complex64;

/// Full constellation of a linear scheme, indexed by symbol id.
///
/// Every table has unit average energy: E|a|^2 over all points is exactly 1
/// by construction of the scale factor.
pub fn constellation(scheme: ModScheme) -> Result<Vec<Complex64>, SigmodError> {
    match scheme {
        ModScheme::Bpsk => Ok(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]),
        ModScheme::Qpsk => Ok(square_qam(2)),
        ModScheme::Psk8 => Ok((0..8)
            .map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 8.0))
            .collect()),
        ModScheme::Qam16 => Ok(square_qam(4)),
        ModScheme::Qam64 => Ok(square_qam(8)),
        ModScheme::Pam4 => {
            // Levels -3,-1,+1,+3 on the real axis; mean energy 5.
            let scale = 1.0 / libm::sqrt(5.0);
            Ok((0..4)
                .map(|d| Complex64::new((2.0 * d as f64 - 3.0) * scale, 0.0))
                .collect())
        }
        ModScheme::Cpfsk | ModScheme::Gfsk => Err(SigmodError::FskScheme(scheme)),
    }
}

/// Square QAM with `levels` amplitudes per axis, Gray-free row-major index
/// mapping: I level = index % levels, Q level = index / levels.
fn square_qam(levels: usize) -> Vec<Complex64> {
    let l = levels as f64;
    // Per-axis mean energy of {±1, ±3, ..., ±(L-1)} is (L^2 - 1) / 3.
    let mean_energy = 2.0 * (l * l - 1.0) / 3.0;
    let scale = 1.0 / libm::sqrt(mean_energy);
    let amp = |d: usize| (2.0 * d as f64 - (l - 1.0)) * scale;
    (0..levels * levels)
        .map(|idx| Complex64::new(amp(idx % levels), amp(idx / levels)))
        .collect()
}

/// Map symbol indices onto constellation points.
pub fn map_symbols(
    scheme: ModScheme,
    symbol_indices: &[usize],
) -> Result<Vec<Complex64>, SigmodError> {
    let table = constellation(scheme)?;
    symbol_indices
        .iter()
        .map(|&index| {
            table
                .get(index)
                .copied()
                .ok_or(SigmodError::SymbolIndexOutOfRange {
                    scheme,
                    index,
                    size: table.len(),
                })
        })
        .collect()
}
