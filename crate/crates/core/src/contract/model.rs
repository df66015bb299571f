use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::checksum::fnv1a64_hex;
use super::violation::{contract_ref, Violation, ViolationKind};
use super::ContractError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFileFormat {
    ManifestJsonV1,
}

impl ModelFileFormat {
    pub fn tag(&self) -> &'static str {
        match self {
            ModelFileFormat::ManifestJsonV1 => "manifest_json_v1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

impl FeatureSpec {
    pub fn float(name: &str) -> Self {
        Self { name: name.into(), ty: "float".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    Required,
    Optional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSpec {
    #[serde(rename = "type")]
    pub ty: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSchema {
    pub score: ScoreSpec,
    pub explanation: Requirement,
}

/// Input/output and serialization contract for a detector stored in the
/// model registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelContract {
    pub name: String,
    pub version: u32,
    pub input_features: Vec<FeatureSpec>,
    pub output_schema: OutputSchema,
    pub file_format: ModelFileFormat,
    /// Declared hyperparameter keys with their defaults.
    pub hyperparameters: BTreeMap<String, Value>,
}

impl ModelContract {
    pub fn reference(&self) -> String {
        contract_ref(&self.name, self.version)
    }

    pub fn check_well_formed(&self) -> Result<(), ContractError> {
        if self.input_features.is_empty() {
            return Err(ContractError::Malformed(format!("{}: no input features", self.reference())));
        }
        if self.output_schema.explanation != Requirement::Required {
            return Err(ContractError::Malformed(format!(
                "{}: explanation output must be required",
                self.reference()
            )));
        }
        if self.output_schema.score.min > self.output_schema.score.max {
            return Err(ContractError::Malformed(format!("{}: empty score range", self.reference())));
        }
        Ok(())
    }

    /// Check one model output (severity score plus explanation payload).
    pub fn validate_output(&self, score: f64, explanation: &Value) -> Vec<Violation> {
        let mut out = Vec::new();
        let range = &self.output_schema.score;
        if !(range.min..=range.max).contains(&score) {
            out.push(Violation::new(
                self.reference(),
                "output.score",
                ViolationKind::Bounds,
                format!("{score} outside [{}, {}]", range.min, range.max),
            ));
        }
        let has_steps = explanation
            .get("steps")
            .and_then(Value::as_array)
            .is_some_and(|s| !s.is_empty());
        if !has_steps {
            out.push(Violation::new(
                self.reference(),
                "output.explanation",
                ViolationKind::MissingField,
                "explanation with at least one step is required",
            ));
        }
        out
    }
}

/// Check a registry entry directory against its model contract: manifest
/// presence and format tag, feature list (names and order), declared
/// hyperparameter keys, and the parameter-file checksum.
pub fn validate_model_dir(contract: &ModelContract, dir: &Path) -> Result<Vec<Violation>, ContractError> {
    contract.check_well_formed()?;
    let reference = contract.reference();
    let mut out = Vec::new();
    // Surfaces an unreadable or missing directory as an I/O error.
    fs::read_dir(dir).map_err(|e| ContractError::Io(format!("{}: {e}", dir.display())))?;

    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        out.push(Violation::new(&reference, "manifest", ViolationKind::MissingField, "manifest.json not found"));
        return Ok(out);
    }
    let raw = fs::read(&manifest_path).map_err(|e| ContractError::Io(format!("{}: {e}", manifest_path.display())))?;
    let manifest: Value = match serde_json::from_slice(&raw) {
        Ok(Value::Object(m)) => Value::Object(m),
        _ => {
            out.push(Violation::new(&reference, "manifest", ViolationKind::Protocol, "manifest.json is not a JSON object"));
            return Ok(out);
        }
    };

    match manifest.get("format").and_then(Value::as_str) {
        Some(tag) if tag == contract.file_format.tag() => {}
        Some(tag) => out.push(Violation::new(
            &reference,
            "manifest.format",
            ViolationKind::Protocol,
            format!("format `{tag}`, expected `{}`", contract.file_format.tag()),
        )),
        None => out.push(Violation::new(&reference, "manifest.format", ViolationKind::MissingField, "format tag missing")),
    }

    let declared = manifest.get("contract");
    let declared_name = declared.and_then(|c| c.get("name")).and_then(Value::as_str);
    let declared_version = declared.and_then(|c| c.get("version")).and_then(Value::as_u64);
    if declared_name != Some(contract.name.as_str()) || declared_version != Some(u64::from(contract.version)) {
        out.push(Violation::new(
            &reference,
            "manifest.contract",
            ViolationKind::Protocol,
            format!(
                "manifest declares contract {}@{}, validating against {reference}",
                declared_name.unwrap_or("?"),
                declared_version.map_or("?".to_string(), |v| v.to_string())
            ),
        ));
    }

    match manifest.get("features").cloned().map(serde_json::from_value::<Vec<FeatureSpec>>) {
        Some(Ok(features)) if features == contract.input_features => {}
        Some(Ok(features)) => out.push(Violation::new(
            &reference,
            "input_features",
            ViolationKind::TypeMismatch,
            format!(
                "features [{}] differ from contract [{}]",
                features.iter().map(|f| f.name.as_str()).collect::<Vec<_>>().join(", "),
                contract.input_features.iter().map(|f| f.name.as_str()).collect::<Vec<_>>().join(", ")
            ),
        )),
        Some(Err(_)) => out.push(Violation::new(
            &reference,
            "input_features",
            ViolationKind::TypeMismatch,
            "features is not a list of {name, type}",
        )),
        None => out.push(Violation::new(&reference, "input_features", ViolationKind::MissingField, "features missing")),
    }

    let hyper = manifest.get("hyperparameters").and_then(Value::as_object);
    for key in contract.hyperparameters.keys() {
        if !hyper.is_some_and(|h| h.contains_key(key)) {
            out.push(Violation::new(
                &reference,
                format!("hyperparameters.{key}"),
                ViolationKind::MissingField,
                format!("declared hyperparameter `{key}` missing"),
            ));
        }
    }

    let params_path = dir.join(PARAMS_FILE);
    match fs::read(&params_path) {
        Ok(bytes) => {
            let actual = fnv1a64_hex(&bytes);
            match manifest.get("params_checksum").and_then(Value::as_str) {
                Some(recorded) if recorded == actual => {}
                Some(recorded) => out.push(Violation::new(
                    &reference,
                    "params_checksum",
                    ViolationKind::Protocol,
                    format!("checksum mismatch: manifest {recorded}, params.json {actual}"),
                )),
                None => out.push(Violation::new(
                    &reference,
                    "params_checksum",
                    ViolationKind::MissingField,
                    "params_checksum missing",
                )),
            }
        }
        Err(_) => out.push(Violation::new(&reference, "params", ViolationKind::MissingField, "params.json not found")),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn contract() -> ModelContract {
        ModelContract {
            name: "ml-detector-model".into(),
            version: 1,
            input_features: vec![FeatureSpec::float("a"), FeatureSpec::float("b")],
            output_schema: OutputSchema {
                score: ScoreSpec { ty: "float".into(), min: 0.0, max: 1.0 },
                explanation: Requirement::Required,
            },
            file_format: ModelFileFormat::ManifestJsonV1,
            hyperparameters: [("quantile_q".to_string(), json!(0.99))].into(),
        }
    }

    fn write_entry(dir: &Path, features: Value, params: &[u8]) {
        fs::write(dir.join(PARAMS_FILE), params).unwrap();
        let manifest = json!({
            "format": "manifest_json_v1",
            "contract": {"name": "ml-detector-model", "version": 1},
            "features": features,
            "hyperparameters": {"quantile_q": 0.99},
            "params_checksum": fnv1a64_hex(params),
        });
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec(&manifest).unwrap()).unwrap();
    }

    fn good_features() -> Value {
        json!([{"name": "a", "type": "float"}, {"name": "b", "type": "float"}])
    }

    #[test]
    fn conforming_dir() {
        let tmp = tempfile::tempdir().unwrap();
        write_entry(tmp.path(), good_features(), b"{\"x\":1}");
        assert!(validate_model_dir(&contract(), tmp.path()).unwrap().is_empty());
    }

    #[test]
    fn permuted_features() {
        let tmp = tempfile::tempdir().unwrap();
        write_entry(tmp.path(), json!([{"name": "b", "type": "float"}, {"name": "a", "type": "float"}]), b"{}");
        let v = validate_model_dir(&contract(), tmp.path()).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].kind, v[0].location.as_str()), (ViolationKind::TypeMismatch, "input_features"));
    }

    #[test]
    fn edited_params_break_checksum() {
        let tmp = tempfile::tempdir().unwrap();
        write_entry(tmp.path(), good_features(), b"{\"x\":1}");
        fs::write(tmp.path().join(PARAMS_FILE), b"{\"x\":2}").unwrap();
        // recomputed checksum of the edited file differs from the recorded one
        assert_ne!(fnv1a64_hex(b"{\"x\":1}"), fnv1a64_hex(b"{\"x\":2}"));
        let v = validate_model_dir(&contract(), tmp.path()).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Protocol);
        assert!(v[0].message.contains("checksum"));
    }

    #[test]
    fn missing_manifest_and_unreadable_dir() {
        let tmp = tempfile::tempdir().unwrap();
        let v = validate_model_dir(&contract(), tmp.path()).unwrap();
        assert_eq!(v[0].kind, ViolationKind::MissingField);
        let gone = tmp.path().join("nope");
        assert!(matches!(validate_model_dir(&contract(), &gone), Err(ContractError::Io(_))));
    }

    #[test]
    fn missing_hyperparameter_key() {
        let tmp = tempfile::tempdir().unwrap();
        write_entry(tmp.path(), good_features(), b"{}");
        let mut c = contract();
        c.hyperparameters.insert("window".into(), json!(10));
        let v = validate_model_dir(&c, tmp.path()).unwrap();
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].location, "hyperparameters.window");
    }

    #[test]
    fn ill_formed_contract() {
        let mut c = contract();
        c.input_features.clear();
        assert!(c.check_well_formed().is_err());
        let mut c = contract();
        c.output_schema.explanation = Requirement::Optional;
        assert!(c.check_well_formed().is_err());
    }

    #[test]
    fn output_checks() {
        let c = contract();
        assert!(c.validate_output(0.5, &json!({"steps": [{}]})).is_empty());
        assert_eq!(c.validate_output(1.5, &json!({"steps": []})).len(), 2);
    }
}
