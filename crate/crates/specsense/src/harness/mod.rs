//! Experiment harness: configuration, detection-curve CSV, SNR-wall
//! reports, and the reproducible generate/train/evaluate pipeline.

mod config;
mod curve;
mod experiment;
mod wall_report;

pub use config::ExperimentConfig;
pub use curve::{
    emit_csv, estimate_snr_wall, parse_csv, read_csv, write_csv, CSV_HEADER,
};
pub use experiment::{
    ed_baseline_curve, generate_datasets, load_detectnet, load_scn, run_experiment,
    save_detectnet, save_scn, sha256_file, ExperimentArtifacts, ExperimentError,
};
pub use wall_report::{format_wall_table, wall_report, WallEntry, WallRow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("CSV error: {0}")]
    Csv(String),
    #[error(transparent)]
    Endet(#[from] crate::endet::EndetError),
    #[error(transparent)]
    Sigmod(#[from] crate::sigmod::SigmodError),
    #[error(transparent)]
    Detect(#[from] crate::detectnet::DetectError),
    #[error(transparent)]
    Coop(#[from] crate::coopfuse::CoopError),
    #[error(transparent)]
    Tensor(#[from] crate::tensornet::TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
