//! Baseband signal synthesis and labeled dataset assembly.
//!
//! This module produces the sensing frames everything else consumes: it maps
//! symbols onto the eight supported constellations, pulse-shapes linear
//! modulations with a root-raised-cosine interpolator, synthesizes
//! constant-envelope CPFSK/GFSK, applies a single-tap channel with CSCG
//! noise at a prescribed SNR, energy-normalizes frames, and assembles
//! deterministic train/validation/test splits.

mod channel;
mod constellation;
mod dataset;
mod file;
mod fsk;
mod pulse;

pub use channel::{apply_channel, apply_channel_with_noise, cscg_frame, energy_normalize};
pub use constellation::{constellation, map_symbols};
pub use dataset::{synth_dataset, synth_frame_parts, DatasetBundle, FrameParts, Split};
pub use file::{read_dataset, write_dataset, DatasetHeader, SPSD_MAGIC, SPSD_VERSION};
pub use fsk::{fsk_modulate, gaussian_freq_kernel};
pub use pulse::{pulse_shape, rrc_taps, symbols_needed};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Root-raised-cosine rolloff used for the full-scale dataset profile.
pub const DEFAULT_ROLLOFF: f64 = 0.35;
/// RRC span in symbols on each side of the peak.
pub const DEFAULT_SPAN_SYMBOLS: usize = 8;
/// CPFSK/GFSK modulation index.
pub const DEFAULT_MOD_INDEX: f64 = 0.5;
/// GFSK Gaussian filter bandwidth-time product.
pub const DEFAULT_BT: f64 = 0.3;

#[derive(Debug, Error)]
pub enum SigmodError {
    #[error("{0:?} is a continuous-phase scheme; use fsk_modulate")]
    FskScheme(ModScheme),
    #[error("symbol index {index} out of range for {scheme:?} (constellation size {size})")]
    SymbolIndexOutOfRange {
        scheme: ModScheme,
        index: usize,
        size: usize,
    },
    #[error("{0:?} is a linear scheme; use map_symbols and pulse_shape")]
    LinearScheme(ModScheme),
    #[error("FSK symbols must be 0 or 1, found {0}")]
    NonBinarySymbol(usize),
    #[error("too few symbols to fill the frame: need {needed}, got {got}")]
    TooFewSymbols { needed: usize, got: usize },
    #[error("frame has zero (or non-finite) power")]
    ZeroPowerFrame,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed dataset file: {0}")]
    MalformedFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The eight digital modulation schemes of the dataset profile.
///
/// Ids are stable and used verbatim in the on-disk record format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModScheme {
    Bpsk = 0,
    Qpsk = 1,
    Psk8 = 2,
    Cpfsk = 3,
    Qam16 = 4,
    Qam64 = 5,
    Gfsk = 6,
    Pam4 = 7,
}

impl ModScheme {
    pub const ALL: [ModScheme; 8] = [
        ModScheme::Bpsk,
        ModScheme::Qpsk,
        ModScheme::Psk8,
        ModScheme::Cpfsk,
        ModScheme::Qam16,
        ModScheme::Qam64,
        ModScheme::Gfsk,
        ModScheme::Pam4,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<ModScheme> {
        ModScheme::ALL.get(id as usize).copied()
    }

    /// Continuous-phase schemes take binary symbols and bypass pulse shaping.
    pub fn is_fsk(self) -> bool {
        matches!(self, ModScheme::Cpfsk | ModScheme::Gfsk)
    }

    /// Number of constellation points (2 for the FSK schemes' binary input).
    pub fn order(self) -> usize {
        match self {
            ModScheme::Bpsk | ModScheme::Cpfsk | ModScheme::Gfsk => 2,
            ModScheme::Qpsk | ModScheme::Pam4 => 4,
            ModScheme::Psk8 => 8,
            ModScheme::Qam16 => 16,
            ModScheme::Qam64 => 64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModScheme::Bpsk => "bpsk",
            ModScheme::Qpsk => "qpsk",
            ModScheme::Psk8 => "8psk",
            ModScheme::Cpfsk => "cpfsk",
            ModScheme::Qam16 => "qam16",
            ModScheme::Qam64 => "qam64",
            ModScheme::Gfsk => "gfsk",
            ModScheme::Pam4 => "pam4",
        }
    }

    pub fn from_name(name: &str) -> Option<ModScheme> {
        ModScheme::ALL
            .iter()
            .copied()
            .find(|s| s.name() == name.to_ascii_lowercase())
    }
}

/// Binary sensing hypothesis: noise only, or primary signal plus noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0 = 0,
    H1 = 1,
}

impl Hypothesis {
    pub fn class(self) -> usize {
        self as usize
    }
}

/// One sensing window of complex baseband samples.
///
/// Synthesis and detector arithmetic run in f64; frames are rounded to
/// paired f32 only when stored into a [`LabeledFrame`] or dataset file.
#[derive(Debug, Clone, PartialEq)]
pub struct IQFrame {
    samples: Vec<Complex64>,
}

impl IQFrame {
    pub fn new(samples: Vec<Complex64>) -> Self {
        IQFrame { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// Average power (1/N) * sum |y(n)|^2.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Round to the paired-f32 storage precision.
    pub fn to_f32_pairs(&self) -> Vec<(f32, f32)> {
        self.samples
            .iter()
            .map(|s| (s.re as f32, s.im as f32))
            .collect()
    }

    pub fn from_f32_pairs(pairs: &[(f32, f32)]) -> Self {
        IQFrame {
            samples: pairs
                .iter()
                .map(|&(i, q)| Complex64::new(i as f64, q as f64))
                .collect(),
        }
    }
}

/// Per-frame channel realization: a gain held constant over the sensing
/// window and the nominal SNR in dB that sets the noise level.
#[derive(Debug, Clone, Copy)]
pub struct ChannelDraw {
    pub gain: Complex64,
    pub snr_db: f64,
}

/// A stored dataset frame: post-normalization samples plus labels.
///
/// `snr_db` on H0 frames is bookkeeping only (drawn from the grid so noise
/// frames pair with signal frames in reports); it does not affect synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub label: Hypothesis,
    pub scheme: Option<ModScheme>,
    pub snr_db: f64,
    pub samples: Vec<(f32, f32)>,
}

impl LabeledFrame {
    pub fn frame(&self) -> IQFrame {
        IQFrame::from_f32_pairs(&self.samples)
    }

    /// Integer-dB bucket key used by metrics and reports.
    pub fn snr_key(&self) -> i32 {
        self.snr_db.round() as i32
    }
}

/// Parameters of one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub schemes: Vec<ModScheme>,
    pub sample_length: usize,
    pub samples_per_symbol: usize,
    pub snr_grid_db: Vec<f64>,
    /// (train, val, test) frame counts; the full-scale profile is 48000/16000/16000.
    pub counts: (usize, usize, usize),
    pub positive_fraction: f64,
    pub seed: u64,
}

impl DatasetSpec {
    /// Full-scale defaults: sps 8, grid -20..=20 dB in 1 dB steps,
    /// 48000/16000/16000 split, half the frames positive.
    pub fn new(schemes: Vec<ModScheme>, sample_length: usize, seed: u64) -> Self {
        DatasetSpec {
            schemes,
            sample_length,
            samples_per_symbol: 8,
            snr_grid_db: (-20..=20).map(f64::from).collect(),
            counts: (48_000, 16_000, 16_000),
            positive_fraction: 0.5,
            seed,
        }
    }

    pub fn with_counts(mut self, train: usize, val: usize, test: usize) -> Self {
        self.counts = (train, val, test);
        self
    }

    pub fn with_snr_grid(mut self, grid: Vec<f64>) -> Self {
        self.snr_grid_db = grid;
        self
    }

    pub fn validate(&self) -> Result<(), SigmodError> {
        if self.schemes.is_empty() {
            return Err(SigmodError::InvalidParameter("no schemes".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if !self.schemes.iter().all(|s| seen.insert(*s)) {
            return Err(SigmodError::InvalidParameter("duplicate scheme".into()));
        }
        if self.sample_length == 0 {
            return Err(SigmodError::InvalidParameter("sample_length = 0".into()));
        }
        if self.samples_per_symbol == 0 {
            return Err(SigmodError::InvalidParameter(
                "samples_per_symbol = 0".into(),
            ));
        }
        if self.snr_grid_db.is_empty() {
            return Err(SigmodError::InvalidParameter("empty SNR grid".into()));
        }
        if !self.snr_grid_db.windows(2).all(|w| w[0] < w[1]) {
            return Err(SigmodError::InvalidParameter(
                "SNR grid must be strictly increasing".into(),
            ));
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return Err(SigmodError::InvalidParameter(format!(
                "positive_fraction {} outside (0, 1)",
                self.positive_fraction
            )));
        }
        if self.counts.0 == 0 || self.counts.1 == 0 || self.counts.2 == 0 {
            return Err(SigmodError::InvalidParameter("zero split count".into()));
        }
        Ok(())
    }
}
