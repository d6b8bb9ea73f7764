//! The CLDNN signal detector and its false-alarm-aware training loop.
//!
//! The network takes one energy-normalized I/Q frame as a 2 x N tensor
//! (in-phase and quadrature channels over time) and emits softmax
//! probabilities for the noise-only and signal-present hypotheses. Training
//! runs in two stages: convergence under early stopping, then continued
//! epochs until the validation false-alarm rate lands in a preset interval.

mod metrics;
mod train;

pub use metrics::{evaluate_items, CurvePoint, DetectionCurve, EvalOutcome};
pub use train::{
    train_stage1, train_stage2, EpochMetrics, Snapshot, Stage1Result, Stage2Result, StopPolicy,
    TrainConfig, TrainItem,
};

use crate::sigmod::{energy_normalize, Hypothesis, IQFrame, LabeledFrame, SigmodError};
use crate::tensornet::{Chain, LayerSpec, Mode, ParamSet, Scalar, Tensor, TensorError};
use crate::rng::RngStream;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: u32 },
    #[error("validation set must contain both hypotheses")]
    MissingClass,
    #[error("frame length {got} does not match the model's sample length {expected}")]
    FrameLength { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Sigmod(#[from] SigmodError),
}

/// Softmax output of a detector for one frame; index 0 is H0, 1 is H1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbPair {
    pub p0: f64,
    pub p1: f64,
}

impl ProbPair {
    pub fn new(p0: f64, p1: f64) -> Self {
        ProbPair { p0, p1 }
    }
}

/// Argmax decision with ties resolved toward H0.
pub fn decide(p: &ProbPair) -> Hypothesis {
    if p.p1 > p.p0 {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    }
}

/// Hyperparameters of the detector network.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DetectNetConfig {
    pub sample_length: usize,
    pub conv_filters: usize,
    pub kernel: usize,
    pub lstm_cells: usize,
    pub fc1_units: usize,
    pub dropout: f64,
    pub lr: f64,
    pub batch: usize,
}

impl DetectNetConfig {
    /// Full-scale hyperparameters: 60 filters of width 10, two
    /// 128-cell LSTM layers, FC widths 128 / sample length / 2, dropout
    /// 0.2, Adam at 3e-4, batch 200.
    pub fn full_scale(sample_length: usize) -> Self {
        DetectNetConfig {
            sample_length,
            conv_filters: 60,
            kernel: 10,
            lstm_cells: 128,
            fc1_units: 128,
            dropout: 0.2,
            lr: 3e-4,
            batch: 200,
        }
    }

    /// Desk-scale variant that trains in minutes on one CPU core.
    pub fn reduced(sample_length: usize) -> Self {
        DetectNetConfig {
            sample_length,
            conv_filters: 16,
            kernel: 10,
            lstm_cells: 32,
            fc1_units: 64,
            dropout: 0.2,
            lr: 3e-4,
            batch: 200,
        }
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        let positive = [
            self.sample_length,
            self.conv_filters,
            self.kernel,
            self.lstm_cells,
            self.fc1_units,
            self.batch,
        ];
        if positive.contains(&0) {
            return Err(DetectError::InvalidConfig(
                "all size hyperparameters must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(DetectError::InvalidConfig(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if !(self.lr > 0.0) {
            return Err(DetectError::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }

    /// Layer stack: two conv blocks, a time-distributed dense bridge, two
    /// LSTM layers (full sequence, then final state), and two dense layers
    /// with a softmax head. Dropout follows every weighted layer.
    pub fn chain(&self) -> Result<Chain, DetectError> {
        self.validate()?;
        let p = self.dropout;
        Ok(Chain::new(
            vec![2, self.sample_length],
            vec![
                LayerSpec::Conv1d {
                    filters: self.conv_filters,
                    kernel: self.kernel,
                },
                LayerSpec::Relu,
                LayerSpec::Dropout { ratio: p },
                LayerSpec::Conv1d {
                    filters: self.conv_filters,
                    kernel: self.kernel,
                },
                LayerSpec::Relu,
                LayerSpec::Dropout { ratio: p },
                LayerSpec::TimeDense {
                    units: self.fc1_units,
                },
                LayerSpec::Relu,
                LayerSpec::Dropout { ratio: p },
                LayerSpec::Lstm {
                    cells: self.lstm_cells,
                    return_sequences: true,
                },
                LayerSpec::Dropout { ratio: p },
                LayerSpec::Lstm {
                    cells: self.lstm_cells,
                    return_sequences: false,
                },
                LayerSpec::Dropout { ratio: p },
                LayerSpec::Dense {
                    units: self.sample_length,
                },
                LayerSpec::Relu,
                LayerSpec::Dropout { ratio: p },
                LayerSpec::Dense { units: 2 },
                LayerSpec::Softmax,
            ],
        )?)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            batch: self.batch,
            seed,
        }
    }
}

/// A detector: configuration, validated chain, and parameters.
#[derive(Debug, Clone)]
pub struct DetectNet<T> {
    pub config: DetectNetConfig,
    pub chain: Chain,
    pub params: Vec<ParamSet<T>>,
    pub seed: u64,
}

/// Build a detector with freshly initialized parameters.
pub fn build<T: Scalar>(config: &DetectNetConfig, seed: u64) -> Result<DetectNet<T>, DetectError> {
    let chain = config.chain()?;
    let params = chain.init_params(&RngStream::new(seed));
    Ok(DetectNet {
        config: config.clone(),
        chain,
        params,
        seed,
    })
}

impl<T: Scalar> DetectNet<T> {
    pub fn param_count(&self) -> usize {
        self.chain.param_count(&self.params)
    }

    /// Frame to input tensor: row 0 carries I, row 1 carries Q.
    pub fn input_from_frame(&self, frame: &IQFrame) -> Result<Tensor<T>, DetectError> {
        let n = self.config.sample_length;
        if frame.len() != n {
            return Err(DetectError::FrameLength {
                expected: n,
                got: frame.len(),
            });
        }
        let mut data = vec![T::ZERO; 2 * n];
        for (i, s) in frame.samples().iter().enumerate() {
            data[i] = T::from_f64(s.re);
            data[n + i] = T::from_f64(s.im);
        }
        Ok(Tensor::from_vec(&[2, n], data)?)
    }

    /// Hypothesis probabilities for one frame. The frame is energy
    /// normalized on entry (a no-op for already-normalized frames), which
    /// makes inference invariant to any positive rescaling of the input;
    /// all-zero frames skip normalization and pass through as zeros.
    pub fn infer(&self, frame: &IQFrame) -> Result<ProbPair, DetectError> {
        let normalized = match energy_normalize(frame) {
            Ok(f) => f,
            Err(SigmodError::ZeroPowerFrame) => frame.clone(),
            Err(e) => return Err(e.into()),
        };
        let input = self.input_from_frame(&normalized)?;
        let mut rng = RngStream::new(0);
        let (out, _) = self
            .chain
            .forward(&self.params, &input, Mode::Eval, &mut rng)?;
        Ok(ProbPair::new(out.data()[0].to_f64(), out.data()[1].to_f64()))
    }

    /// Per-epoch validation metrics (false-alarm rate and per-SNR detection
    /// rates) for this model.
    pub fn epoch_metrics(
        &self,
        val: &[LabeledFrame],
        epoch: u32,
    ) -> Result<EpochMetrics, DetectError> {
        evaluate_items(&self.chain, &self.params, val, epoch).map(|o| o.metrics)
    }

    /// Detection curve over a held-out split.
    pub fn dl_curve(&self, test: &[LabeledFrame]) -> Result<DetectionCurve, DetectError> {
        let outcome = evaluate_items(&self.chain, &self.params, test, 0)?;
        Ok(outcome.curve(format!(
            "detectnet_n{}",
            self.config.sample_length
        )))
    }
}

impl TrainItem for LabeledFrame {
    fn class(&self) -> usize {
        self.label.class()
    }

    fn snr_key(&self) -> i32 {
        LabeledFrame::snr_key(self)
    }

    fn input_tensor<T: Scalar>(&self) -> Tensor<T> {
        let n = self.samples.len();
        let mut data = vec![T::ZERO; 2 * n];
        for (i, &(re, im)) in self.samples.iter().enumerate() {
            data[i] = T::from_f64(re as f64);
            data[n + i] = T::from_f64(im as f64);
        }
        Tensor::from_vec(&[2, n], data).expect("frame tensor shape")
    }
}
