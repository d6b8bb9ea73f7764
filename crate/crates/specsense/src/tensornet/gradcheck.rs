//! Finite-difference verification of the backward passes.

use super::chain::Chain;
use super::layer::{Mode, ParamSet};
use super::tensor::Tensor;
use super::TensorError;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Number of parameter coordinates to probe (all of them if the model
    /// is smaller).
    pub samples: usize,
    /// Central-difference step.
    pub step: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            samples: 200,
            step: 1e-5,
            seed: 0,
        }
    }
}

/// One probed coordinate.
#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub layer: usize,
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// Report of a finite-difference sweep.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Entries sorted worst-first, capped at ten.
    pub worst: Vec<GradCheckEntry>,
}

fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Compare the chain's backward pass against central finite differences on
/// a random subsample of parameter coordinates. Runs the loss in eval mode
/// (64-bit), so dropout layers are identity maps.
pub fn grad_check(
    chain: &Chain,
    params: &[ParamSet<f64>],
    input: &Tensor<f64>,
    label: usize,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, TensorError> {
    let mut rng = RngStream::new(cfg.seed);
    let (_, analytic) =
        chain.loss_and_gradients(params, input, label, Mode::Eval, &mut rng)?;
    grad_check_against(chain, params, input, label, cfg, &analytic)
}

/// Same sweep, but against caller-supplied analytic gradients. This is the
/// hook negative-control tests use to verify the checker flags corrupted
/// backward passes.
pub fn grad_check_against(
    chain: &Chain,
    params: &[ParamSet<f64>],
    input: &Tensor<f64>,
    label: usize,
    cfg: &GradCheckConfig,
    analytic: &[ParamSet<f64>],
) -> Result<GradCheckReport, TensorError> {
    // Enumerate every parameter coordinate as (layer, entry, offset).
    let mut coords: Vec<(usize, String, usize)> = Vec::new();
    for (l, layer_params) in params.iter().enumerate() {
        for (name, tensor) in layer_params.iter() {
            for i in 0..tensor.len() {
                coords.push((l, name.to_string(), i));
            }
        }
    }
    let total = coords.len();
    let mut picked: Vec<usize> = if total <= cfg.samples {
        (0..total).collect()
    } else {
        let mut rng = RngStream::new(cfg.seed ^ 0x6772_6164);
        let mut seen = std::collections::HashSet::with_capacity(cfg.samples * 2);
        let mut out = Vec::with_capacity(cfg.samples);
        while out.len() < cfg.samples {
            let idx = rng.next_below(total as u64) as usize;
            if seen.insert(idx) {
                out.push(idx);
            }
        }
        out
    };
    picked.sort_unstable();

    let mut work = params.to_vec();
    let mut entries: Vec<GradCheckEntry> = Vec::with_capacity(picked.len());
    let loss_at = |ps: &[ParamSet<f64>]| -> Result<f64, TensorError> {
        let (loss, _) = chain.loss_eval(ps, input, label)?;
        Ok(loss)
    };

    for idx in picked {
        let (l, name, i) = coords[idx].clone();
        let original = work[l].get(&name).unwrap().data()[i];

        work[l].get_mut(&name).unwrap().data_mut()[i] = original + cfg.step;
        let loss_plus = loss_at(&work)?;
        work[l].get_mut(&name).unwrap().data_mut()[i] = original - cfg.step;
        let loss_minus = loss_at(&work)?;
        work[l].get_mut(&name).unwrap().data_mut()[i] = original;

        let numeric = (loss_plus - loss_minus) / (2.0 * cfg.step);
        let a = analytic[l].require(&name)?.data()[i];
        entries.push(GradCheckEntry {
            layer: l,
            param: name,
            index: i,
            analytic: a,
            numeric,
            rel_error: rel_error(a, numeric),
        });
    }

    entries.sort_by(|a, b| b.rel_error.total_cmp(&a.rel_error));
    let max_rel_error = entries.first().map_or(0.0, |e| e.rel_error);
    let checked = entries.len();
    entries.truncate(10);
    Ok(GradCheckReport {
        checked,
        max_rel_error,
        worst: entries,
    })
}
