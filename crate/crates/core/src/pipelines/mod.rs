//! On-demand pipelines: synthetic generation, augmentation, rule and ML
//! training, and batch prediction.

pub mod augment;
pub mod batch;
pub mod detector;
pub mod eval;
pub mod features;
pub mod ml;
pub mod rules;
pub mod synth;
pub mod train;

use thiserror::Error;

pub use augment::{augment, AugmentOps};
pub use batch::{batch_predict, BatchInput, BatchReport};
pub use detector::{anomaly_id, Detector, WindowScore};
pub use eval::{ml_false_positive_rate, precision, recall_by_kind, KindRecall};
pub use features::{windows, WINDOW_LEN, WINDOW_STRIDE};
pub use ml::MlModel;
pub use rules::{Rule, RuleModel};
pub use synth::{synth_generate, AnomalyRates, SynthOutput, SynthParams};
pub use train::{train_ml, train_rule, Hyperparams, TrainOptions, TrainOutcome, ML_MODEL_NAME, RULE_MODEL_NAME};

use crate::contract::Violation;
use crate::ingestion::IngestError;
use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("window too short: {0} fix(es), need at least 2")]
    InsufficientWindow(usize),
    #[error(transparent)]
    Store(StoreError),
    #[error("{} contract violation(s): {}", .0.len(), .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Contract(Vec<Violation>),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("model error: {0}")]
    Model(String),
}

impl From<StoreError> for PipelineError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(what) => PipelineError::NotFound(what),
            StoreError::Contract(v) => PipelineError::Contract(v),
            other => PipelineError::Store(other),
        }
    }
}

impl From<serde_json::Error> for PipelineError {
    fn from(e: serde_json::Error) -> Self {
        PipelineError::Store(StoreError::Json(e.to_string()))
    }
}
