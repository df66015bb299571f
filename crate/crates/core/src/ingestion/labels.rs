use serde_json::Value;

use super::IngestError;
use crate::contract::{builtin, validate_value, Violation, ViolationKind};
use crate::domain::{DomainError, Label};

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedEntry {
    pub index: usize,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelBatch {
    pub labels: Vec<Label>,
    pub rejected: Vec<RejectedEntry>,
}

static NO_ENTRIES: Vec<Value> = Vec::new();

/// Entries of a provider label document: a JSON array, or an object with a
/// `labels` array. Entries without an annotator are attributed to the
/// provider.
pub fn label_entries(payload: &Value) -> Result<&Vec<Value>, IngestError> {
    match payload {
        Value::Array(items) => Ok(items),
        Value::Object(map) => match map.get("labels") {
            Some(Value::Array(items)) => Ok(items),
            None => Ok(&NO_ENTRIES),
            Some(_) => Err(IngestError::Format("`labels` is not an array".into())),
        },
        _ => Err(IngestError::Format("label document must be an array or an object".into())),
    }
}

pub fn check_labels(entries: &[Value]) -> LabelBatch {
    let contract = builtin::label();
    let mut batch = LabelBatch::default();
    for (index, entry) in entries.iter().enumerate() {
        let mut entry = entry.clone();
        if let Value::Object(map) = &mut entry {
            map.entry("annotator").or_insert_with(|| Value::from("provider"));
        }
        let at = |loc: &str| format!("label[{index}].{loc}");
        let mut violations: Vec<Violation> = validate_value(&contract, &entry)
            .expect("builtin label contract is well formed")
            .into_iter()
            .map(|v| v.prefixed(&format!("label[{index}]")))
            .collect();
        if violations.is_empty() {
            match serde_json::from_value::<Label>(entry) {
                Ok(label) => match label.validate() {
                    Ok(()) => batch.labels.push(label),
                    Err(e) => {
                        let (loc, kind) = match &e {
                            DomainError::Invalid { field: "window", .. } => ("end_ts", ViolationKind::Bounds),
                            DomainError::Invalid { field: "kind", .. } => ("kind", ViolationKind::MissingField),
                            DomainError::Invalid { field, .. } => (*field, ViolationKind::Bounds),
                            _ => ("entry", ViolationKind::Bounds),
                        };
                        violations.push(Violation::new(contract.reference(), at(loc), kind, e.to_string()));
                    }
                },
                Err(e) => violations.push(Violation::new(contract.reference(), at("entry"), ViolationKind::TypeMismatch, e.to_string())),
            }
        }
        if !violations.is_empty() {
            batch.rejected.push(RejectedEntry { index, violations });
        }
    }
    batch
}

/// Parse and validate a provider label document. Invalid entries are
/// rejected individually; only an unparseable document is an error.
pub fn ingest_provider_labels(payload: &str) -> Result<LabelBatch, IngestError> {
    let value: Value = serde_json::from_str(payload).map_err(|e| IngestError::Format(e.to_string()))?;
    Ok(check_labels(label_entries(&value)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Annotator, Verdict};
    use serde_json::json;

    #[test]
    fn two_valid() {
        let doc = json!([
            {"object_id": "v1", "start_ts": 10, "end_ts": 20, "verdict": "anomalous", "kind": "ais_gap"},
            {"object_id": "v2", "start_ts": 10, "end_ts": 10, "verdict": "normal"}
        ]);
        let batch = ingest_provider_labels(&doc.to_string()).unwrap();
        assert_eq!(batch.labels.len(), 2);
        assert!(batch.rejected.is_empty());
        assert_eq!(batch.labels[0].annotator, Annotator::Provider);
        assert_eq!(batch.labels[1].verdict, Verdict::Normal);
    }

    #[test]
    fn anomalous_without_kind_rejected() {
        let doc = json!({"labels": [{"object_id": "v1", "start_ts": 10, "end_ts": 20, "verdict": "anomalous"}]});
        let batch = ingest_provider_labels(&doc.to_string()).unwrap();
        assert!(batch.labels.is_empty());
        assert_eq!(batch.rejected[0].violations[0].location, "label[0].kind");
    }

    #[test]
    fn inverted_window_rejected() {
        let doc = json!([{"object_id": "v1", "start_ts": 30, "end_ts": 20, "verdict": "normal"}]);
        let batch = ingest_provider_labels(&doc.to_string()).unwrap();
        assert_eq!(batch.rejected.len(), 1);
        assert_eq!(batch.rejected[0].violations[0].kind, ViolationKind::Bounds);
    }

    #[test]
    fn unparseable_payload_is_format_error() {
        assert!(matches!(ingest_provider_labels("[{"), Err(IngestError::Format(_))));
        assert!(matches!(ingest_provider_labels("42"), Err(IngestError::Format(_))));
    }

    #[test]
    fn contract_violations_located_per_entry() {
        let doc = json!([{"object_id": "v1", "start_ts": "soon", "end_ts": 20, "verdict": "normal"}]);
        let batch = ingest_provider_labels(&doc.to_string()).unwrap();
        assert_eq!(batch.rejected[0].violations[0].location, "label[0].start_ts");
    }
}
