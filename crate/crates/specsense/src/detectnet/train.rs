//! Two-stage training: converge under early stopping, then continue until
//! the validation false-alarm rate falls into a preset interval.

use super::metrics::evaluate_items;
use super::DetectError;
use crate::rng::RngStream;
use crate::tensornet::{
    adam_step, AdamConfig, AdamState, Chain, Mode, ParamSet, Scalar, Tensor,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Gradient accumulation splits each batch into this many fixed chunks;
/// chunk boundaries (not thread count) define the reduction order, so the
/// result is identical however rayon schedules them.
const GRAD_CHUNKS: usize = 8;

/// Anything the trainer can learn from: a class label, an SNR bucket key,
/// and an input tensor.
pub trait TrainItem: Send + Sync {
    /// 0 for noise-only, 1 for signal-present.
    fn class(&self) -> usize;
    /// Integer-dB bucket for detection-rate reporting.
    fn snr_key(&self) -> i32;
    fn input_tensor<T: Scalar>(&self) -> Tensor<T>;
}

/// Validation metrics recorded after every epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: u32,
    pub val_loss: f64,
    pub val_acc: f64,
    /// Aggregate false-alarm rate over all H0 validation frames.
    pub pf: f64,
    /// Detection rate per nominal SNR (dB).
    pub pd_by_snr: BTreeMap<i32, f64>,
}

/// Stopping rules for the two stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopPolicy {
    /// Stage 1 stops once validation loss has not improved for this many
    /// epochs; zero means exactly one epoch runs.
    pub stage1_patience: u32,
    pub stage1_max_epochs: u32,
    /// Closed Pf stop interval for stage 2.
    pub pf_low: f64,
    pub pf_high: f64,
    pub stage2_max_epochs: u32,
}

impl Default for StopPolicy {
    fn default() -> Self {
        StopPolicy {
            stage1_patience: 6,
            stage1_max_epochs: 100,
            pf_low: 0.07,
            pf_high: 0.09,
            stage2_max_epochs: 50,
        }
    }
}

impl StopPolicy {
    pub fn validate(&self) -> Result<(), DetectError> {
        // The closed interval [0, 1] is allowed and accepts any checkpoint.
        if !(0.0 <= self.pf_low && self.pf_low < self.pf_high && self.pf_high <= 1.0) {
            return Err(DetectError::InvalidConfig(format!(
                "pf interval [{}, {}] must satisfy 0 <= low < high <= 1",
                self.pf_low, self.pf_high
            )));
        }
        if self.stage1_max_epochs == 0 {
            return Err(DetectError::InvalidConfig(
                "stage1_max_epochs must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn pf_in_interval(&self, pf: f64) -> bool {
        (self.pf_low..=self.pf_high).contains(&pf)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

/// Parameters plus the validation metrics they were selected on.
#[derive(Debug, Clone)]
pub struct Snapshot<T> {
    pub params: Vec<ParamSet<T>>,
    pub metrics: EpochMetrics,
}

#[derive(Debug, Clone)]
pub struct Stage1Result<T> {
    /// Checkpoint with the lowest validation loss seen.
    pub best: Snapshot<T>,
    pub epochs_run: u32,
    pub history: Vec<EpochMetrics>,
}

#[derive(Debug, Clone)]
pub struct Stage2Result<T> {
    /// First checkpoint whose Pf fell inside the interval, or the closest
    /// one if the epoch budget ran out.
    pub chosen: Snapshot<T>,
    pub in_interval: bool,
    pub epochs_run: u32,
    pub history: Vec<EpochMetrics>,
}

/// One epoch of minibatch Adam over a seeded shuffle of `train`.
fn run_epoch<T: Scalar, I: TrainItem>(
    chain: &Chain,
    params: &mut [ParamSet<T>],
    adam: &mut AdamState<T>,
    adam_cfg: &AdamConfig,
    train: &[I],
    batch_size: usize,
    epoch_stream: &RngStream,
    epoch: u32,
) -> Result<(), DetectError> {
    let mut order: Vec<usize> = (0..train.len()).collect();
    epoch_stream.substream(0).shuffle(&mut order);
    let dropout_root = epoch_stream.substream(1);

    let mut position = 0u64;
    for batch in order.chunks(batch_size) {
        let chunk_size = batch.len().div_ceil(GRAD_CHUNKS);
        let base = position;
        let pieces: Vec<(f64, Vec<ParamSet<T>>)> = batch
            .par_chunks(chunk_size)
            .enumerate()
            .map(|(chunk_idx, chunk)| {
                let mut loss_sum = 0.0;
                let mut acc: Option<Vec<ParamSet<T>>> = None;
                for (j, &item_idx) in chunk.iter().enumerate() {
                    let slot = base + (chunk_idx * chunk_size + j) as u64;
                    let mut rng = dropout_root.substream(slot);
                    let input = train[item_idx].input_tensor::<T>();
                    let (loss, grads) = chain.loss_and_gradients(
                        params,
                        &input,
                        train[item_idx].class(),
                        Mode::Train,
                        &mut rng,
                    )?;
                    loss_sum += loss;
                    match acc.as_mut() {
                        None => acc = Some(grads),
                        Some(acc) => {
                            for (a, g) in acc.iter_mut().zip(&grads) {
                                a.add_assign(g);
                            }
                        }
                    }
                }
                Ok((loss_sum, acc.expect("non-empty chunk")))
            })
            .collect::<Result<_, DetectError>>()?;
        position += batch.len() as u64;

        let mut iter = pieces.into_iter();
        let (mut loss_sum, mut grads) = iter.next().expect("non-empty batch");
        for (l, g) in iter {
            loss_sum += l;
            for (a, b) in grads.iter_mut().zip(&g) {
                a.add_assign(b);
            }
        }
        if !loss_sum.is_finite() {
            return Err(DetectError::Diverged { epoch });
        }
        let scale = T::from_f64(1.0 / batch.len() as f64);
        for g in grads.iter_mut() {
            g.scale(scale);
        }
        adam_step(params, &grads, adam, adam_cfg)?;
    }
    Ok(())
}

/// Stage 1: minibatch Adam to convergence under early stopping on
/// validation loss. Returns the best checkpoint by validation loss.
pub fn train_stage1<T: Scalar, I: TrainItem>(
    chain: &Chain,
    params: Vec<ParamSet<T>>,
    cfg: &TrainConfig,
    train: &[I],
    val: &[I],
    policy: &StopPolicy,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Stage1Result<T>, DetectError> {
    policy.validate()?;
    let mut params = params;
    let mut adam = AdamState::new(&params);
    let adam_cfg = AdamConfig::new(cfg.lr);
    let train_root = RngStream::new(cfg.seed);
    let mut history = Vec::new();
    let mut best: Option<Snapshot<T>> = None;
    let mut best_epoch = 0u32;
    let mut epochs_run = 0u32;

    for epoch in 1..=policy.stage1_max_epochs {
        run_epoch(
            chain,
            params.as_mut_slice(),
            &mut adam,
            &adam_cfg,
            train,
            cfg.batch,
            &train_root.substream(epoch as u64),
            epoch,
        )?;
        let metrics = evaluate_items(chain, &params, val, epoch)?.metrics;
        on_epoch(&metrics);
        history.push(metrics.clone());
        epochs_run = epoch;
        let improved = best
            .as_ref()
            .is_none_or(|b| metrics.val_loss < b.metrics.val_loss);
        if improved {
            best = Some(Snapshot {
                params: params.clone(),
                metrics,
            });
            best_epoch = epoch;
        }
        if epoch - best_epoch >= policy.stage1_patience {
            break;
        }
    }

    Ok(Stage1Result {
        best: best.expect("at least one epoch ran"),
        epochs_run,
        history,
    })
}

/// Stage 2: continue from a stage-1 checkpoint and stop at the first epoch
/// whose validation Pf lies in the closed interval. The incoming checkpoint
/// is evaluated first (epoch 0 of this stage) and returned untouched if it
/// already qualifies. Budget exhaustion returns the closest-Pf checkpoint
/// with `in_interval` unset; it is a flagged result, not an error.
pub fn train_stage2<T: Scalar, I: TrainItem>(
    chain: &Chain,
    start: Snapshot<T>,
    cfg: &TrainConfig,
    train: &[I],
    val: &[I],
    policy: &StopPolicy,
    epoch_offset: u32,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Stage2Result<T>, DetectError> {
    policy.validate()?;
    let interval_distance = |pf: f64| {
        if pf < policy.pf_low {
            policy.pf_low - pf
        } else if pf > policy.pf_high {
            pf - policy.pf_high
        } else {
            0.0
        }
    };

    let mut history = Vec::new();
    let first = evaluate_items(chain, &start.params, val, epoch_offset)?.metrics;
    on_epoch(&first);
    history.push(first.clone());
    if policy.pf_in_interval(first.pf) {
        return Ok(Stage2Result {
            chosen: Snapshot {
                params: start.params,
                metrics: first,
            },
            in_interval: true,
            epochs_run: 0,
            history,
        });
    }

    let mut params = start.params;
    let mut adam = AdamState::new(&params);
    let adam_cfg = AdamConfig::new(cfg.lr);
    let train_root = RngStream::new(cfg.seed);
    let mut closest = Snapshot {
        params: params.clone(),
        metrics: first.clone(),
    };
    let mut closest_distance = interval_distance(first.pf);

    for step in 1..=policy.stage2_max_epochs {
        let epoch = epoch_offset + step;
        run_epoch(
            chain,
            params.as_mut_slice(),
            &mut adam,
            &adam_cfg,
            train,
            cfg.batch,
            &train_root.substream(epoch as u64),
            epoch,
        )?;
        let metrics = evaluate_items(chain, &params, val, epoch)?.metrics;
        on_epoch(&metrics);
        history.push(metrics.clone());
        let distance = interval_distance(metrics.pf);
        if policy.pf_in_interval(metrics.pf) {
            return Ok(Stage2Result {
                chosen: Snapshot { params, metrics },
                in_interval: true,
                epochs_run: step,
                history,
            });
        }
        if distance < closest_distance {
            closest = Snapshot {
                params: params.clone(),
                metrics,
            };
            closest_distance = distance;
        }
    }

    Ok(Stage2Result {
        chosen: closest,
        in_interval: false,
        epochs_run: policy.stage2_max_epochs,
        history,
    })
}
