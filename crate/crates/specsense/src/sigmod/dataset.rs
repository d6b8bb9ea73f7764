//! Deterministic labeled-dataset assembly.
//!
//! Frame `i` of a split derives every random draw from the substream
//! `(seed, global index of i)`, so generation is reproducible byte-for-byte
//! regardless of threading or generation order.

use super::{
    apply_channel, cscg_frame, energy_normalize, fsk_modulate, map_symbols, pulse_shape,
    symbols_needed, ChannelDraw, DatasetSpec, Hypothesis, IQFrame, LabeledFrame, ModScheme,
    SigmodError, DEFAULT_BT, DEFAULT_MOD_INDEX, DEFAULT_ROLLOFF, DEFAULT_SPAN_SYMBOLS,
};
use crate::rng::RngStream;
use num_complex::Complex64;
use rayon::prelude::*;

/// Substream roles within one frame's stream.
const SUB_SYMBOLS: u64 = 0;
const SUB_CHANNEL: u64 = 1;
const SUB_NOISE: u64 = 2;
const SUB_BOOKKEEPING: u64 = 3;

/// Dataset split identifiers, in on-disk and substream order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train = 0,
    Val = 1,
    Test = 2,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// The three generated splits.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub spec: DatasetSpec,
    pub train: Vec<LabeledFrame>,
    pub val: Vec<LabeledFrame>,
    pub test: Vec<LabeledFrame>,
}

impl DatasetBundle {
    pub fn split(&self, split: Split) -> &[LabeledFrame] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Intermediate products of one frame's synthesis, exposed so tests and the
/// energy-detector baseline can work with pre-normalization physics.
#[derive(Debug, Clone)]
pub struct FrameParts {
    pub label: Hypothesis,
    pub scheme: Option<ModScheme>,
    pub snr_db: f64,
    /// Transmitted signal s(n) before the channel; empty under H0.
    pub clean: IQFrame,
    /// Channel gain applied to the clean signal (1 under H0).
    pub gain: Complex64,
    /// Per-dimension noise variance sigma_w^2 used for this frame.
    pub noise_sigma2: f64,
    /// Received frame y(n) before energy normalization.
    pub received: IQFrame,
    /// Energy-normalized received frame (what the dataset stores).
    pub normalized: IQFrame,
}

fn split_sizes(spec: &DatasetSpec) -> [usize; 3] {
    [spec.counts.0, spec.counts.1, spec.counts.2]
}

fn positives_in(count: usize, positive_fraction: f64) -> usize {
    (count as f64 * positive_fraction).round() as usize
}

/// Draw a transmitted signal of `sample_length` samples for `scheme`, with
/// transient margins generated and cropped away.
fn synth_clean_signal(
    scheme: ModScheme,
    sample_length: usize,
    sps: usize,
    stream: &mut RngStream,
) -> Result<IQFrame, SigmodError> {
    if scheme.is_fsk() {
        // Two extra symbols each side cover the Gaussian smoothing tails.
        let margin = 2;
        let n_bits = sample_length.div_ceil(sps) + 2 * margin;
        let bits: Vec<usize> = (0..n_bits).map(|_| stream.next_below(2) as usize).collect();
        let full = fsk_modulate(scheme, &bits, sps, DEFAULT_MOD_INDEX, DEFAULT_BT)?;
        let start = margin * sps;
        Ok(IQFrame::new(
            full.samples()[start..start + sample_length].to_vec(),
        ))
    } else {
        let order = scheme.order() as u64;
        let count = symbols_needed(sample_length, sps, DEFAULT_SPAN_SYMBOLS);
        let indices: Vec<usize> = (0..count).map(|_| stream.next_below(order) as usize).collect();
        let symbols = map_symbols(scheme, &indices)?;
        pulse_shape(
            &symbols,
            sps,
            DEFAULT_ROLLOFF,
            DEFAULT_SPAN_SYMBOLS,
            sample_length,
        )
    }
}

/// Regenerate every synthesis product of one frame from `(spec.seed, index)`.
///
/// `index` is the frame's position within `split`; the substream key also
/// covers the split so the three splits never share draws.
pub fn synth_frame_parts(
    spec: &DatasetSpec,
    split: Split,
    index: usize,
) -> Result<FrameParts, SigmodError> {
    spec.validate()?;
    let sizes = split_sizes(spec);
    let count = sizes[split as usize];
    if index >= count {
        return Err(SigmodError::InvalidParameter(format!(
            "frame index {index} beyond split size {count}"
        )));
    }
    let base: usize = sizes[..split as usize].iter().sum();
    let global = base + index;
    let stream = RngStream::new(spec.seed).substream(global as u64);

    let n_pos = positives_in(count, spec.positive_fraction);
    let cells = spec.schemes.len() * spec.snr_grid_db.len();

    if index < n_pos {
        // Positive frames round-robin over (scheme, snr) cells so every cell
        // holds floor or ceil of n_pos/cells frames.
        let cell = index % cells;
        let scheme = spec.schemes[cell / spec.snr_grid_db.len()];
        let snr_db = spec.snr_grid_db[cell % spec.snr_grid_db.len()];

        let clean = synth_clean_signal(
            scheme,
            spec.sample_length,
            spec.samples_per_symbol,
            &mut stream.substream(SUB_SYMBOLS),
        )?;
        // Unit-magnitude gain with uniform phase: nominal SNR equals the
        // received SNR for single-node datasets.
        let theta = std::f64::consts::TAU * stream.substream(SUB_CHANNEL).next_f64();
        let gain = Complex64::from_polar(1.0, theta);
        let draw = ChannelDraw { gain, snr_db };
        let received = apply_channel(&clean, &draw, &mut stream.substream(SUB_NOISE))?;
        let gamma = libm::pow(10.0, snr_db / 10.0);
        let noise_sigma2 = gain.norm_sqr() * clean.power() / gamma / 2.0;
        let normalized = energy_normalize(&received)?;
        Ok(FrameParts {
            label: Hypothesis::H1,
            scheme: Some(scheme),
            snr_db,
            clean,
            gain,
            noise_sigma2,
            received,
            normalized,
        })
    } else {
        // Noise-only frame at unit per-sample variance (normalized away).
        let noise_sigma2 = 0.5;
        let received = cscg_frame(
            spec.sample_length,
            noise_sigma2,
            &mut stream.substream(SUB_NOISE),
        );
        let normalized = energy_normalize(&received)?;
        let pick = stream
            .substream(SUB_BOOKKEEPING)
            .next_below(spec.snr_grid_db.len() as u64) as usize;
        Ok(FrameParts {
            label: Hypothesis::H0,
            scheme: None,
            snr_db: spec.snr_grid_db[pick],
            clean: IQFrame::new(Vec::new()),
            gain: Complex64::new(1.0, 0.0),
            noise_sigma2,
            received,
            normalized,
        })
    }
}

fn synth_split(spec: &DatasetSpec, split: Split) -> Result<Vec<LabeledFrame>, SigmodError> {
    let count = split_sizes(spec)[split as usize];
    (0..count)
        .into_par_iter()
        .map(|i| {
            let parts = synth_frame_parts(spec, split, i)?;
            Ok(LabeledFrame {
                label: parts.label,
                scheme: parts.scheme,
                snr_db: parts.snr_db,
                samples: parts.normalized.to_f32_pairs(),
            })
        })
        .collect()
}

/// Generate the train/validation/test splits of `spec`.
pub fn synth_dataset(spec: &DatasetSpec) -> Result<DatasetBundle, SigmodError> {
    spec.validate()?;
    Ok(DatasetBundle {
        spec: spec.clone(),
        train: synth_split(spec, Split::Train)?,
        val: synth_split(spec, Split::Val)?,
        test: synth_split(spec, Split::Test)?,
    })
}
