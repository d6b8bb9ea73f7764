//! Experiment configuration: a flat UTF-8 `key = value` document covering
//! dataset, detector, training, and output settings, with a canonical
//! serialization whose SHA-256 stamps every artifact the experiment emits.

use super::HarnessError;
use crate::detectnet::{DetectNetConfig, StopPolicy};
use crate::sigmod::{DatasetSpec, ModScheme};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub scheme: ModScheme,
    pub sample_length: usize,
    pub samples_per_symbol: usize,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub snr_step_db: f64,
    pub train_count: usize,
    pub val_count: usize,
    pub test_count: usize,
    pub positive_fraction: f64,
    pub conv_filters: usize,
    pub kernel: usize,
    pub lstm_cells: usize,
    pub fc1_units: usize,
    pub dropout: f64,
    pub lr: f64,
    pub batch: usize,
    pub stage1_patience: u32,
    pub stage1_max_epochs: u32,
    pub stage2_max_epochs: u32,
    pub pf_low: f64,
    pub pf_high: f64,
    pub pd_target: f64,
    pub ed_pf_target: f64,
    pub coop_nodes: usize,
    pub reference_precision: bool,
}

impl ExperimentConfig {
    /// Desk-scale defaults; `seed` has no default and must be set.
    pub fn with_seed(seed: u64) -> Self {
        ExperimentConfig {
            seed,
            out_dir: PathBuf::from("out"),
            scheme: ModScheme::Gfsk,
            sample_length: 64,
            samples_per_symbol: 8,
            snr_min_db: -12.0,
            snr_max_db: 0.0,
            snr_step_db: 1.0,
            train_count: 8000,
            val_count: 2666,
            test_count: 2666,
            positive_fraction: 0.5,
            conv_filters: 16,
            kernel: 10,
            lstm_cells: 32,
            fc1_units: 64,
            dropout: 0.2,
            lr: 3e-4,
            batch: 200,
            stage1_patience: 6,
            stage1_max_epochs: 20,
            stage2_max_epochs: 10,
            pf_low: 0.07,
            pf_high: 0.09,
            pd_target: 0.9,
            ed_pf_target: 0.08,
            coop_nodes: 2,
            reference_precision: false,
        }
    }

    pub fn snr_grid(&self) -> Vec<f64> {
        let steps = ((self.snr_max_db - self.snr_min_db) / self.snr_step_db).round() as i64;
        (0..=steps)
            .map(|i| self.snr_min_db + i as f64 * self.snr_step_db)
            .collect()
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            schemes: vec![self.scheme],
            sample_length: self.sample_length,
            samples_per_symbol: self.samples_per_symbol,
            snr_grid_db: self.snr_grid(),
            counts: (self.train_count, self.val_count, self.test_count),
            positive_fraction: self.positive_fraction,
            seed: self.seed,
        }
    }

    pub fn detect_config(&self) -> DetectNetConfig {
        DetectNetConfig {
            sample_length: self.sample_length,
            conv_filters: self.conv_filters,
            kernel: self.kernel,
            lstm_cells: self.lstm_cells,
            fc1_units: self.fc1_units,
            dropout: self.dropout,
            lr: self.lr,
            batch: self.batch,
        }
    }

    pub fn stop_policy(&self) -> StopPolicy {
        StopPolicy {
            stage1_patience: self.stage1_patience,
            stage1_max_epochs: self.stage1_max_epochs,
            pf_low: self.pf_low,
            pf_high: self.pf_high,
            stage2_max_epochs: self.stage2_max_epochs,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.dataset_spec()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.detect_config()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.stop_policy()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if !(self.snr_step_db > 0.0) || self.snr_max_db < self.snr_min_db {
            return Err(HarnessError::Config("bad SNR grid bounds".into()));
        }
        for (name, p) in [
            ("pd_target", self.pd_target),
            ("ed_pf_target", self.ed_pf_target),
        ] {
            if !(p > 0.0 && p < 1.0) {
                return Err(HarnessError::Config(format!("{name} {p} outside (0, 1)")));
            }
        }
        if self.coop_nodes == 0 {
            return Err(HarnessError::Config("coop_nodes must be >= 1".into()));
        }
        Ok(())
    }

    /// Canonical emission: fixed key order, one `key = value` per line.
    /// Parsing this text reproduces the config exactly.
    pub fn to_canonical_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        put("seed", self.seed.to_string());
        put("out_dir", self.out_dir.display().to_string());
        put("scheme", self.scheme.name().to_string());
        put("sample_length", self.sample_length.to_string());
        put("samples_per_symbol", self.samples_per_symbol.to_string());
        put("snr_min_db", self.snr_min_db.to_string());
        put("snr_max_db", self.snr_max_db.to_string());
        put("snr_step_db", self.snr_step_db.to_string());
        put("train_count", self.train_count.to_string());
        put("val_count", self.val_count.to_string());
        put("test_count", self.test_count.to_string());
        put("positive_fraction", self.positive_fraction.to_string());
        put("conv_filters", self.conv_filters.to_string());
        put("kernel", self.kernel.to_string());
        put("lstm_cells", self.lstm_cells.to_string());
        put("fc1_units", self.fc1_units.to_string());
        put("dropout", self.dropout.to_string());
        put("lr", self.lr.to_string());
        put("batch", self.batch.to_string());
        put("stage1_patience", self.stage1_patience.to_string());
        put("stage1_max_epochs", self.stage1_max_epochs.to_string());
        put("stage2_max_epochs", self.stage2_max_epochs.to_string());
        put("pf_low", self.pf_low.to_string());
        put("pf_high", self.pf_high.to_string());
        put("pd_target", self.pd_target.to_string());
        put("ed_pf_target", self.ed_pf_target.to_string());
        put("coop_nodes", self.coop_nodes.to_string());
        put("reference_precision", self.reference_precision.to_string());
        s
    }

    /// SHA-256 of the canonical emission, hex-encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical_string().as_bytes()))
    }

    /// Parse a flat key-value document. Every key is optional except
    /// `seed`; unknown keys are errors. Lines starting with `#` and blank
    /// lines are skipped.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut config = ExperimentConfig::with_seed(0);
        let mut saw_seed = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                HarnessError::Config(format!("line {}: bad {what} value {value:?}", lineno + 1))
            };
            match key {
                "seed" => {
                    config.seed = value.parse().map_err(|_| bad("seed"))?;
                    saw_seed = true;
                }
                "out_dir" => config.out_dir = PathBuf::from(value),
                "scheme" => {
                    config.scheme = ModScheme::from_name(value).ok_or_else(|| bad("scheme"))?
                }
                "sample_length" => config.sample_length = value.parse().map_err(|_| bad(key))?,
                "samples_per_symbol" => {
                    config.samples_per_symbol = value.parse().map_err(|_| bad(key))?
                }
                "snr_min_db" => config.snr_min_db = value.parse().map_err(|_| bad(key))?,
                "snr_max_db" => config.snr_max_db = value.parse().map_err(|_| bad(key))?,
                "snr_step_db" => config.snr_step_db = value.parse().map_err(|_| bad(key))?,
                "train_count" => config.train_count = value.parse().map_err(|_| bad(key))?,
                "val_count" => config.val_count = value.parse().map_err(|_| bad(key))?,
                "test_count" => config.test_count = value.parse().map_err(|_| bad(key))?,
                "positive_fraction" => {
                    config.positive_fraction = value.parse().map_err(|_| bad(key))?
                }
                "conv_filters" => config.conv_filters = value.parse().map_err(|_| bad(key))?,
                "kernel" => config.kernel = value.parse().map_err(|_| bad(key))?,
                "lstm_cells" => config.lstm_cells = value.parse().map_err(|_| bad(key))?,
                "fc1_units" => config.fc1_units = value.parse().map_err(|_| bad(key))?,
                "dropout" => config.dropout = value.parse().map_err(|_| bad(key))?,
                "lr" => config.lr = value.parse().map_err(|_| bad(key))?,
                "batch" => config.batch = value.parse().map_err(|_| bad(key))?,
                "stage1_patience" => {
                    config.stage1_patience = value.parse().map_err(|_| bad(key))?
                }
                "stage1_max_epochs" => {
                    config.stage1_max_epochs = value.parse().map_err(|_| bad(key))?
                }
                "stage2_max_epochs" => {
                    config.stage2_max_epochs = value.parse().map_err(|_| bad(key))?
                }
                "pf_low" => config.pf_low = value.parse().map_err(|_| bad(key))?,
                "pf_high" => config.pf_high = value.parse().map_err(|_| bad(key))?,
                "pd_target" => config.pd_target = value.parse().map_err(|_| bad(key))?,
                "ed_pf_target" => config.ed_pf_target = value.parse().map_err(|_| bad(key))?,
                "coop_nodes" => config.coop_nodes = value.parse().map_err(|_| bad(key))?,
                "reference_precision" => {
                    config.reference_precision = value.parse().map_err(|_| bad(key))?
                }
                other => {
                    return Err(HarnessError::Config(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        if !saw_seed {
            return Err(HarnessError::Config("seed is mandatory".into()));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    // Artifact paths under out_dir.

    pub fn dataset_path(&self, split: &str) -> PathBuf {
        self.out_dir.join(format!("{split}.spsd"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.out_dir.join("detectnet.ckpt")
    }

    pub fn scn_checkpoint_path(&self) -> PathBuf {
        self.out_dir.join("scn.ckpt")
    }

    pub fn epoch_log_path(&self) -> PathBuf {
        self.out_dir.join("epochs.jsonl")
    }

    pub fn curve_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(format!("{name}.csv"))
    }

    pub fn summary_path(&self) -> PathBuf {
        self.out_dir.join("summary.json")
    }
}
