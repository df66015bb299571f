use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::StoreError;
use crate::domain::MarineObject;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    Rule,
    Ml,
}

impl PipelineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PipelineKind::Rule => "rule",
            PipelineKind::Ml => "ml",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRunRecord {
    pub run_id: String,
    pub pipeline: PipelineKind,
    pub hyperparameters: Value,
    pub data_snapshot_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    pub metrics: BTreeMap<String, Value>,
    pub started_ts: i64,
    pub ended_ts: i64,
}

impl TrainingRunRecord {
    pub fn validate(&self) -> Result<(), StoreError> {
        if self.run_id.is_empty() {
            return Err(StoreError::Invalid("run_id is empty".into()));
        }
        if self.ended_ts < self.started_ts {
            return Err(StoreError::Invalid(format!(
                "run {} ends ({}) before it starts ({})",
                self.run_id, self.ended_ts, self.started_ts
            )));
        }
        Ok(())
    }
}

/// One line of the metadata store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record_type", rename_all = "snake_case")]
pub enum MetadataRecord {
    Object(MarineObject),
    TrainingRun(TrainingRunRecord),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::{builtin, validate_value};
    use crate::domain::ObjectType;
    use serde_json::json;

    #[test]
    fn both_variants_satisfy_contract() {
        let object = MetadataRecord::Object(MarineObject {
            object_id: "v1".into(),
            object_type: ObjectType::Vessel,
            metadata: [("name".to_string(), "Aurora".to_string())].into(),
        });
        let run = MetadataRecord::TrainingRun(TrainingRunRecord {
            run_id: "run-1".into(),
            pipeline: PipelineKind::Ml,
            hyperparameters: json!({"quantile_q": 0.99}),
            data_snapshot_id: "synth-1".into(),
            model_id: Some("ml-detector:1".into()),
            metrics: [("train_precision".to_string(), json!(1.0))].into(),
            started_ts: 10,
            ended_ts: 12,
        });
        for record in [object, run] {
            let value = serde_json::to_value(&record).unwrap();
            assert!(validate_value(&builtin::metadata_record(), &value).unwrap().is_empty(), "{value}");
            let back: MetadataRecord = serde_json::from_value(value).unwrap();
            assert_eq!(back, record);
        }
    }

    #[test]
    fn run_must_not_end_before_start() {
        let run = TrainingRunRecord {
            run_id: "r".into(),
            pipeline: PipelineKind::Rule,
            hyperparameters: json!({}),
            data_snapshot_id: "s".into(),
            model_id: None,
            metrics: BTreeMap::new(),
            started_ts: 10,
            ended_ts: 9,
        };
        assert!(run.validate().is_err());
    }
}
