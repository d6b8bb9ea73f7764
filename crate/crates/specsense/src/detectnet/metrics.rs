//! Detection metrics: false-alarm rate over noise frames and per-SNR
//! detection rates over signal frames.

use super::train::{EpochMetrics, TrainItem};
use super::DetectError;
use crate::tensornet::{Chain, ParamSet, Scalar};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// One point of a detection curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub snr_db: f64,
    pub pd: f64,
    pub n_pos: usize,
}

/// Pf plus Pd per SNR for one detector on one dataset. The false-alarm
/// rate is a single aggregate over all noise frames (noise has no SNR of
/// its own).
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionCurve {
    pub detector_id: String,
    pub pf: f64,
    pub n_neg: usize,
    pub points: Vec<CurvePoint>,
}

impl DetectionCurve {
    /// Detection rate at an exact grid SNR, if present.
    pub fn pd_at(&self, snr_db: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.snr_db == snr_db)
            .map(|p| p.pd)
    }
}

/// Raw evaluation tallies, convertible to metrics or a curve.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub metrics: EpochMetrics,
    /// snr -> (positives, detected positives)
    pub buckets: BTreeMap<i32, (usize, usize)>,
    pub n_neg: usize,
    pub false_alarms: usize,
}

impl EvalOutcome {
    pub fn curve(&self, detector_id: String) -> DetectionCurve {
        DetectionCurve {
            detector_id,
            pf: self.metrics.pf,
            n_neg: self.n_neg,
            points: self
                .buckets
                .iter()
                .map(|(&snr, &(n_pos, hit))| CurvePoint {
                    snr_db: snr as f64,
                    pd: hit as f64 / n_pos as f64,
                    n_pos,
                })
                .collect(),
        }
    }
}

/// Evaluate a chain over labeled items in eval mode: mean cross-entropy,
/// plain accuracy, aggregate Pf over class-0 items, and Pd bucketed by the
/// items' SNR key. Buckets with no positives are omitted.
pub fn evaluate_items<T: Scalar, I: TrainItem>(
    chain: &Chain,
    params: &[ParamSet<T>],
    items: &[I],
    epoch: u32,
) -> Result<EvalOutcome, DetectError> {
    if items.is_empty()
        || !items.iter().any(|i| i.class() == 0)
        || !items.iter().any(|i| i.class() == 1)
    {
        return Err(DetectError::MissingClass);
    }
    // Per-item results in input order; the fold below stays sequential so
    // the loss sum is identical no matter how many threads evaluated.
    let per_item: Vec<(f64, usize, bool, i32)> = items
        .par_iter()
        .map(|item| {
            let input = item.input_tensor::<T>();
            let (loss, probs) = chain.loss_eval(params, &input, item.class())?;
            let decided_h1 = probs.data()[1].to_f64() > probs.data()[0].to_f64();
            Ok((loss, item.class(), decided_h1, item.snr_key()))
        })
        .collect::<Result<_, DetectError>>()?;

    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let mut n_neg = 0usize;
    let mut false_alarms = 0usize;
    let mut buckets: BTreeMap<i32, (usize, usize)> = BTreeMap::new();
    for &(loss, class, decided_h1, snr) in &per_item {
        loss_sum += loss;
        if (class == 1) == decided_h1 {
            correct += 1;
        }
        if class == 0 {
            n_neg += 1;
            if decided_h1 {
                false_alarms += 1;
            }
        } else {
            let entry = buckets.entry(snr).or_insert((0, 0));
            entry.0 += 1;
            if decided_h1 {
                entry.1 += 1;
            }
        }
    }

    let pd_by_snr = buckets
        .iter()
        .map(|(&snr, &(n, hit))| (snr, hit as f64 / n as f64))
        .collect();
    Ok(EvalOutcome {
        metrics: EpochMetrics {
            epoch,
            val_loss: loss_sum / items.len() as f64,
            val_acc: correct as f64 / items.len() as f64,
            pf: false_alarms as f64 / n_neg as f64,
            pd_by_snr,
        },
        buckets,
        n_neg,
        false_alarms,
    })
}
