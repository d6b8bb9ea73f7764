//! Cooperative detection: k sensing nodes with i.i.d. Rayleigh channels,
//! per-node detectors, hard-decision fusion baselines, and the learned
//! soft-combination fusion network.

mod file;

pub use file::{read_coop_dataset, write_coop_dataset, CoopHeader, SPCE_MAGIC, SPCE_VERSION};

use crate::detectnet::{
    decide, evaluate_items, train_stage1, train_stage2, DetectError, DetectNet, DetectionCurve,
    EpochMetrics, ProbPair, Snapshot, StopPolicy, TrainConfig, TrainItem,
};
use crate::rng::RngStream;
use crate::sigmod::{
    apply_channel_with_noise, cscg_frame, energy_normalize, DatasetSpec, Hypothesis, IQFrame,
    ModScheme, SigmodError, Split,
};
use crate::tensornet::{Chain, LayerSpec, Mode, ParamSet, Scalar, Tensor, TensorError};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

/// Keeps cooperative substreams disjoint from single-node dataset streams
/// derived from the same seed.
const COOP_DOMAIN: u64 = 0x434F_4F50_0000_0000;

#[derive(Debug, Error)]
pub enum CoopError {
    #[error("the learned rule has no hard-decision form; use scn_infer")]
    ScnIsNotHard,
    #[error("need at least one node decision")]
    NoDecisions,
    #[error("need at least one sensing node")]
    NoNodes,
    #[error("expected {expected} node models, got {got}")]
    NodeModelCount { expected: usize, got: usize },
    #[error("node model {index} expects frames of length {model}, dataset uses {dataset}")]
    NodeModelMismatch {
        index: usize,
        model: usize,
        dataset: usize,
    },
    #[error("example has {got} nodes, the fusion model expects {expected}")]
    NodeCountMismatch { expected: usize, got: usize },
    #[error("evaluating the learned rule requires a trained fusion model")]
    MissingScn,
    #[error("malformed cooperative dataset file: {0}")]
    MalformedFile(String),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Sigmod(#[from] SigmodError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Train/val/test cooperative splits.
pub type CoopSplits = (Vec<CoopExample>, Vec<CoopExample>, Vec<CoopExample>);

/// One cooperative observation: every node's softmax pair plus the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct CoopExample {
    pub node_probs: Vec<ProbPair>,
    pub label: Hypothesis,
    pub snr_db: f64,
}

impl CoopExample {
    pub fn nodes(&self) -> usize {
        self.node_probs.len()
    }
}

impl TrainItem for CoopExample {
    fn class(&self) -> usize {
        self.label.class()
    }

    fn snr_key(&self) -> i32 {
        self.snr_db.round() as i32
    }

    fn input_tensor<T: Scalar>(&self) -> Tensor<T> {
        let mut data = Vec::with_capacity(2 * self.node_probs.len());
        for p in &self.node_probs {
            data.push(T::from_f64(p.p0));
            data.push(T::from_f64(p.p1));
        }
        Tensor::from_vec(&[data.len()], data).expect("coop input shape")
    }
}

/// Decision combination rules at the fusion center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FusionRule {
    LogicalOr,
    LogicalAnd,
    Majority,
    Scn,
}

impl FusionRule {
    pub fn name(self) -> &'static str {
        match self {
            FusionRule::LogicalOr => "logical_or",
            FusionRule::LogicalAnd => "logical_and",
            FusionRule::Majority => "majority",
            FusionRule::Scn => "scn",
        }
    }
}

/// Combine hard per-node decisions. Majority requires a strict majority;
/// exactly half the nodes saying H1 decides H0.
pub fn fuse_hard(rule: FusionRule, decisions: &[Hypothesis]) -> Result<Hypothesis, CoopError> {
    if rule == FusionRule::Scn {
        return Err(CoopError::ScnIsNotHard);
    }
    if decisions.is_empty() {
        return Err(CoopError::NoDecisions);
    }
    let h1_votes = decisions.iter().filter(|&&d| d == Hypothesis::H1).count();
    let fused = match rule {
        FusionRule::LogicalOr => h1_votes >= 1,
        FusionRule::LogicalAnd => h1_votes == decisions.len(),
        FusionRule::Majority => 2 * h1_votes > decisions.len(),
        FusionRule::Scn => unreachable!(),
    };
    Ok(if fused { Hypothesis::H1 } else { Hypothesis::H0 })
}

/// Intermediate products of one cooperative example's synthesis.
#[derive(Debug, Clone)]
pub struct CoopParts {
    pub label: Hypothesis,
    pub scheme: Option<ModScheme>,
    pub snr_db: f64,
    pub gains: Vec<Complex64>,
    /// Per-node received frames before energy normalization.
    pub node_frames: Vec<IQFrame>,
}

/// Regenerate the physics of cooperative example `index` in `split`.
///
/// Under H1 a single transmitted frame is shared by all nodes; node `k`
/// receives it through an independent Rayleigh gain (unit mean square,
/// uniform phase) plus independent CSCG noise sized against the nominal
/// pre-fading SNR, so realized per-node SNR varies with |h_k|^2. Under H0
/// every node receives independent noise.
pub fn synth_coop_parts(
    base: &DatasetSpec,
    nodes: usize,
    split: Split,
    index: usize,
) -> Result<CoopParts, CoopError> {
    if nodes == 0 {
        return Err(CoopError::NoNodes);
    }
    base.validate()?;
    let sizes = [base.counts.0, base.counts.1, base.counts.2];
    let base_offset: usize = sizes[..split as usize].iter().sum();
    let global = (base_offset + index) as u64;
    let stream = RngStream::new(base.seed)
        .substream(COOP_DOMAIN)
        .substream(global);

    let count = sizes[split as usize];
    let n_pos = (count as f64 * base.positive_fraction).round() as usize;
    let cells = base.schemes.len() * base.snr_grid_db.len();

    if index < n_pos {
        let cell = index % cells;
        let scheme = base.schemes[cell / base.snr_grid_db.len()];
        let snr_db = base.snr_grid_db[cell % base.snr_grid_db.len()];
        let clean = synth_shared_signal(base, scheme, &mut stream.substream(0))?;
        let p_s = clean.power();
        let gamma = libm::pow(10.0, snr_db / 10.0);
        // Pre-fading noise sizing: E|h|^2 = 1, so sigma_w^2 = P_s / (2 gamma).
        let sigma2 = p_s / gamma / 2.0;
        let mut gains = Vec::with_capacity(nodes);
        let mut node_frames = Vec::with_capacity(nodes);
        for k in 0..nodes {
            let mut node_stream = stream.substream(16 + k as u64);
            let (g1, g2) = node_stream.next_gaussian_pair();
            let gain = Complex64::new(g1, g2) / libm::sqrt(2.0);
            let received = apply_channel_with_noise(&clean, gain, sigma2, &mut node_stream);
            gains.push(gain);
            node_frames.push(received);
        }
        Ok(CoopParts {
            label: Hypothesis::H1,
            scheme: Some(scheme),
            snr_db,
            gains,
            node_frames,
        })
    } else {
        let mut node_frames = Vec::with_capacity(nodes);
        for k in 0..nodes {
            let mut node_stream = stream.substream(16 + k as u64);
            node_frames.push(cscg_frame(base.sample_length, 0.5, &mut node_stream));
        }
        let pick = stream
            .substream(3)
            .next_below(base.snr_grid_db.len() as u64) as usize;
        Ok(CoopParts {
            label: Hypothesis::H0,
            scheme: None,
            snr_db: base.snr_grid_db[pick],
            gains: vec![Complex64::new(1.0, 0.0); nodes],
            node_frames,
        })
    }
}

/// Transmitted signal shared by all nodes of one H1 example.
fn synth_shared_signal(
    base: &DatasetSpec,
    scheme: ModScheme,
    stream: &mut RngStream,
) -> Result<IQFrame, CoopError> {
    use crate::sigmod::{
        fsk_modulate, map_symbols, pulse_shape, symbols_needed, DEFAULT_BT, DEFAULT_MOD_INDEX,
        DEFAULT_ROLLOFF, DEFAULT_SPAN_SYMBOLS,
    };
    let n = base.sample_length;
    let sps = base.samples_per_symbol;
    if scheme.is_fsk() {
        let margin = 2;
        let n_bits = n.div_ceil(sps) + 2 * margin;
        let bits: Vec<usize> = (0..n_bits).map(|_| stream.next_below(2) as usize).collect();
        let full = fsk_modulate(scheme, &bits, sps, DEFAULT_MOD_INDEX, DEFAULT_BT)?;
        let start = margin * sps;
        Ok(IQFrame::new(full.samples()[start..start + n].to_vec()))
    } else {
        let order = scheme.order() as u64;
        let count = symbols_needed(n, sps, DEFAULT_SPAN_SYMBOLS);
        let indices: Vec<usize> = (0..count).map(|_| stream.next_below(order) as usize).collect();
        let symbols = map_symbols(scheme, &indices)?;
        Ok(pulse_shape(&symbols, sps, DEFAULT_ROLLOFF, DEFAULT_SPAN_SYMBOLS, n)?)
    }
}

/// Generate cooperative train/val/test splits: synthesize per-node frames,
/// energy-normalize each, and run every node's detector to its softmax pair.
pub fn synth_coop_dataset<T: Scalar>(
    base: &DatasetSpec,
    nodes: usize,
    node_models: &[&DetectNet<T>],
) -> Result<CoopSplits, CoopError> {
    if nodes == 0 {
        return Err(CoopError::NoNodes);
    }
    if node_models.len() != nodes {
        return Err(CoopError::NodeModelCount {
            expected: nodes,
            got: node_models.len(),
        });
    }
    for (index, model) in node_models.iter().enumerate() {
        if model.config.sample_length != base.sample_length {
            return Err(CoopError::NodeModelMismatch {
                index,
                model: model.config.sample_length,
                dataset: base.sample_length,
            });
        }
    }
    base.validate()?;

    let synth_split = |split: Split, count: usize| -> Result<Vec<CoopExample>, CoopError> {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let parts = synth_coop_parts(base, nodes, split, i)?;
                let node_probs = parts
                    .node_frames
                    .iter()
                    .zip(node_models)
                    .map(|(frame, model)| {
                        let normalized = energy_normalize(frame)?;
                        Ok(model.infer(&normalized)?)
                    })
                    .collect::<Result<Vec<_>, CoopError>>()?;
                Ok(CoopExample {
                    node_probs,
                    label: parts.label,
                    snr_db: parts.snr_db,
                })
            })
            .collect()
    };

    Ok((
        synth_split(Split::Train, base.counts.0)?,
        synth_split(Split::Val, base.counts.1)?,
        synth_split(Split::Test, base.counts.2)?,
    ))
}

/// Fusion network hyperparameters: three dense layers of 32, 8, and 2
/// neurons consuming the flattened 2k node probabilities.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScnConfig {
    pub nodes: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub dropout: f64,
    pub lr: f64,
    pub batch: usize,
}

impl ScnConfig {
    pub fn new(nodes: usize) -> Self {
        ScnConfig {
            nodes,
            hidden1: 32,
            hidden2: 8,
            dropout: 0.2,
            lr: 3e-4,
            batch: 200,
        }
    }

    pub fn chain(&self) -> Result<Chain, CoopError> {
        if self.nodes == 0 {
            return Err(CoopError::NoNodes);
        }
        let p = self.dropout;
        Ok(Chain::new(
            vec![2 * self.nodes],
            vec![
                LayerSpec::Dense { units: self.hidden1 },
                LayerSpec::Relu,
                LayerSpec::Dropout { ratio: p },
                LayerSpec::Dense { units: self.hidden2 },
                LayerSpec::Relu,
                LayerSpec::Dropout { ratio: p },
                LayerSpec::Dense { units: 2 },
                LayerSpec::Softmax,
            ],
        )?)
    }
}

/// A trained (or freshly initialized) soft-combination fusion model.
#[derive(Debug, Clone)]
pub struct Scn<T> {
    pub config: ScnConfig,
    pub chain: Chain,
    pub params: Vec<ParamSet<T>>,
    pub seed: u64,
}

pub fn scn_build<T: Scalar>(config: &ScnConfig, seed: u64) -> Result<Scn<T>, CoopError> {
    let chain = config.chain()?;
    let params = chain.init_params(&RngStream::new(seed));
    Ok(Scn {
        config: config.clone(),
        chain,
        params,
        seed,
    })
}

/// Outcome of the two-stage fusion training.
#[derive(Debug, Clone)]
pub struct ScnTrainReport {
    pub stage1_epochs: u32,
    pub stage2_epochs: u32,
    pub pf_in_interval: bool,
    pub final_metrics: EpochMetrics,
    pub history: Vec<EpochMetrics>,
}

/// Build and train the fusion network with the same two-stage strategy as
/// the local detector.
pub fn scn_build_train<T: Scalar>(
    config: &ScnConfig,
    train: &[CoopExample],
    val: &[CoopExample],
    policy: &StopPolicy,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(Scn<T>, ScnTrainReport), CoopError> {
    if let Some(bad) = train.iter().chain(val).find(|e| e.nodes() != config.nodes) {
        return Err(CoopError::NodeCountMismatch {
            expected: config.nodes,
            got: bad.nodes(),
        });
    }
    let mut scn = scn_build::<T>(config, seed)?;
    let train_cfg = TrainConfig {
        lr: config.lr,
        batch: config.batch,
        seed,
    };
    let stage1 = train_stage1(
        &scn.chain,
        scn.params.clone(),
        &train_cfg,
        train,
        val,
        policy,
        &mut on_epoch,
    )?;
    let stage2 = train_stage2(
        &scn.chain,
        Snapshot {
            params: stage1.best.params,
            metrics: stage1.best.metrics,
        },
        &train_cfg,
        train,
        val,
        policy,
        stage1.epochs_run,
        &mut on_epoch,
    )?;
    scn.params = stage2.chosen.params;
    let mut history = stage1.history;
    history.extend(stage2.history.iter().cloned());
    Ok((
        scn,
        ScnTrainReport {
            stage1_epochs: stage1.epochs_run,
            stage2_epochs: stage2.epochs_run,
            pf_in_interval: stage2.in_interval,
            final_metrics: stage2.chosen.metrics,
            history,
        },
    ))
}

/// Deterministic eval-mode fusion inference.
pub fn scn_infer<T: Scalar>(scn: &Scn<T>, example: &CoopExample) -> Result<ProbPair, CoopError> {
    if example.nodes() != scn.config.nodes {
        return Err(CoopError::NodeCountMismatch {
            expected: scn.config.nodes,
            got: example.nodes(),
        });
    }
    let input = example.input_tensor::<T>();
    let mut rng = RngStream::new(0);
    let (out, _) = scn.chain.forward(&scn.params, &input, Mode::Eval, &mut rng)?;
    Ok(ProbPair::new(out.data()[0].to_f64(), out.data()[1].to_f64()))
}

/// Detection curve of a fusion rule over cooperative examples. The learned
/// rule needs its trained model; hard rules fuse per-node argmax decisions.
pub fn coop_curve<T: Scalar>(
    rule: FusionRule,
    scn: Option<&Scn<T>>,
    examples: &[CoopExample],
) -> Result<DetectionCurve, CoopError> {
    if examples.is_empty() {
        return Err(CoopError::NoDecisions);
    }
    let k = examples[0].nodes();
    let decisions: Vec<Hypothesis> = match rule {
        FusionRule::Scn => {
            let scn = scn.ok_or(CoopError::MissingScn)?;
            examples
                .iter()
                .map(|e| Ok(decide(&scn_infer(scn, e)?)))
                .collect::<Result<_, CoopError>>()?
        }
        _ => examples
            .iter()
            .map(|e| {
                let node_decisions: Vec<Hypothesis> =
                    e.node_probs.iter().map(decide).collect();
                fuse_hard(rule, &node_decisions)
            })
            .collect::<Result<_, CoopError>>()?,
    };

    let mut n_neg = 0usize;
    let mut false_alarms = 0usize;
    let mut buckets: std::collections::BTreeMap<i32, (usize, usize)> = Default::default();
    for (example, decision) in examples.iter().zip(&decisions) {
        let says_h1 = *decision == Hypothesis::H1;
        match example.label {
            Hypothesis::H0 => {
                n_neg += 1;
                if says_h1 {
                    false_alarms += 1;
                }
            }
            Hypothesis::H1 => {
                let e = buckets.entry(example.snr_key()).or_insert((0, 0));
                e.0 += 1;
                if says_h1 {
                    e.1 += 1;
                }
            }
        }
    }
    Ok(DetectionCurve {
        detector_id: format!("{}_k{}", rule.name(), k),
        pf: false_alarms as f64 / n_neg.max(1) as f64,
        n_neg,
        points: buckets
            .iter()
            .map(|(&snr, &(n_pos, hit))| crate::detectnet::CurvePoint {
                snr_db: snr as f64,
                pd: hit as f64 / n_pos as f64,
                n_pos,
            })
            .collect(),
    })
}

/// Validation metrics of the fusion model over cooperative examples.
pub fn scn_metrics<T: Scalar>(
    scn: &Scn<T>,
    val: &[CoopExample],
    epoch: u32,
) -> Result<EpochMetrics, CoopError> {
    Ok(evaluate_items(&scn.chain, &scn.params, val, epoch)?.metrics)
}
