use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::violation::{contract_ref, Violation, ViolationKind};
use super::ContractError;

/// Field types a data contract can declare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FieldType {
    String,
    Int,
    Float,
    /// Positive integer UTC seconds.
    Timestamp,
    Enum { values: Vec<String> },
    /// Object with string values.
    Map,
    /// Any non-null JSON value; used for nested payloads such as explanations.
    Json,
}

impl FieldType {
    fn is_numeric(&self) -> bool {
        matches!(self, FieldType::Int | FieldType::Float | FieldType::Timestamp)
    }

    fn describe(&self) -> String {
        match self {
            FieldType::String => "string".into(),
            FieldType::Int => "int".into(),
            FieldType::Float => "float".into(),
            FieldType::Timestamp => "timestamp".into(),
            FieldType::Enum { values } => format!("enum({})", values.join("|")),
            FieldType::Map => "map".into(),
            FieldType::Json => "json".into(),
        }
    }

    pub(crate) fn accepts(&self, value: &Value) -> bool {
        match self {
            FieldType::String => value.is_string(),
            FieldType::Int => value.is_i64() || value.is_u64(),
            FieldType::Float => value.as_f64().is_some_and(f64::is_finite),
            FieldType::Timestamp => value.as_i64().is_some_and(|t| t > 0),
            FieldType::Enum { values } => value.as_str().is_some_and(|s| values.iter().any(|v| v == s)),
            FieldType::Map => value.as_object().is_some_and(|m| m.values().all(Value::is_string)),
            FieldType::Json => !value.is_null(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    #[serde(flatten)]
    pub ty: FieldType,
    #[serde(default = "default_true")]
    pub required: bool,
}

fn default_true() -> bool {
    true
}

impl FieldSpec {
    pub fn new(name: &str, ty: FieldType, required: bool) -> Self {
        Self { name: name.into(), ty, required }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionBound {
    pub field: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadProtocol {
    JsonlScan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WriteProtocol {
    JsonlAppend,
}

/// Record format of a store: field names, types, value bounds and the
/// read/write protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataContract {
    pub name: String,
    pub version: u32,
    pub fields: Vec<FieldSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distribution_bounds: Vec<DistributionBound>,
    pub read_protocol: ReadProtocol,
    pub write_protocol: WriteProtocol,
}

impl DataContract {
    pub fn reference(&self) -> String {
        contract_ref(&self.name, self.version)
    }

    /// Field names unique; bounds only on declared numeric fields.
    pub fn check_well_formed(&self) -> Result<(), ContractError> {
        let mut seen = BTreeSet::new();
        for field in &self.fields {
            if !seen.insert(field.name.as_str()) {
                return Err(ContractError::Malformed(format!(
                    "{}: duplicate field `{}`",
                    self.reference(),
                    field.name
                )));
            }
        }
        for bound in &self.distribution_bounds {
            match self.fields.iter().find(|f| f.name == bound.field) {
                Some(f) if f.ty.is_numeric() => {}
                Some(_) => {
                    return Err(ContractError::Malformed(format!(
                        "{}: bound on non-numeric field `{}`",
                        self.reference(),
                        bound.field
                    )))
                }
                None => {
                    return Err(ContractError::Malformed(format!(
                        "{}: bound on undeclared field `{}`",
                        self.reference(),
                        bound.field
                    )))
                }
            }
            if let (Some(min), Some(max)) = (bound.min, bound.max) {
                if min > max {
                    return Err(ContractError::Malformed(format!(
                        "{}: bound on `{}` has min > max",
                        self.reference(),
                        bound.field
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Check one record. Violations follow field declaration order; undeclared
/// fields are ignored.
pub fn validate_record(
    contract: &DataContract,
    record: &Map<String, Value>,
) -> Result<Vec<Violation>, ContractError> {
    contract.check_well_formed()?;
    let reference = contract.reference();
    let mut out = Vec::new();
    for field in &contract.fields {
        let value = record.get(&field.name).filter(|v| !v.is_null());
        let Some(value) = value else {
            if field.required {
                out.push(Violation::new(
                    &reference,
                    &field.name,
                    ViolationKind::MissingField,
                    format!("required field `{}` is missing", field.name),
                ));
            }
            continue;
        };
        if !field.ty.accepts(value) {
            out.push(Violation::new(
                &reference,
                &field.name,
                ViolationKind::TypeMismatch,
                format!("expected {}, found {}", field.ty.describe(), value),
            ));
            continue;
        }
        for bound in contract.distribution_bounds.iter().filter(|b| b.field == field.name) {
            let Some(x) = value.as_f64() else { continue };
            let below = bound.min.is_some_and(|min| x < min);
            let above = bound.max.is_some_and(|max| x > max);
            if below || above {
                out.push(Violation::new(
                    &reference,
                    &field.name,
                    ViolationKind::Bounds,
                    format!(
                        "{x} outside [{}, {}]",
                        bound.min.map_or("-inf".to_string(), |v| v.to_string()),
                        bound.max.map_or("inf".to_string(), |v| v.to_string())
                    ),
                ));
            }
        }
    }
    Ok(out)
}

/// Validate an arbitrary JSON value; non-objects yield one protocol violation.
pub fn validate_value(contract: &DataContract, value: &Value) -> Result<Vec<Violation>, ContractError> {
    match value.as_object() {
        Some(map) => validate_record(contract, map),
        None => {
            contract.check_well_formed()?;
            Ok(vec![Violation::new(
                contract.reference(),
                "",
                ViolationKind::Protocol,
                "record is not a JSON object",
            )])
        }
    }
}

/// Validate a batch, prefixing locations with `record[i]`.
pub fn validate_records<'a>(
    contract: &DataContract,
    records: impl IntoIterator<Item = &'a Value>,
) -> Result<Vec<Violation>, ContractError> {
    let mut out = Vec::new();
    for (i, record) in records.into_iter().enumerate() {
        let prefix = format!("record[{i}]");
        out.extend(validate_value(contract, record)?.into_iter().map(|v| v.prefixed(&prefix)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn fix_contract() -> DataContract {
        DataContract {
            name: "raw-fix".into(),
            version: 1,
            fields: vec![
                FieldSpec::new("object_id", FieldType::String, true),
                FieldSpec::new("lat", FieldType::Float, true),
                FieldSpec::new("lon", FieldType::Float, true),
                FieldSpec::new("timestamp", FieldType::Timestamp, true),
                FieldSpec::new("sog", FieldType::Float, false),
                FieldSpec::new(
                    "source",
                    FieldType::Enum { values: vec!["sensor".into(), "crawler".into()] },
                    true,
                ),
            ],
            distribution_bounds: vec![
                DistributionBound { field: "lat".into(), min: Some(-90.0), max: Some(90.0) },
                DistributionBound { field: "sog".into(), min: Some(0.0), max: None },
            ],
            read_protocol: ReadProtocol::JsonlScan,
            write_protocol: WriteProtocol::JsonlAppend,
        }
    }

    fn record(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn valid_record_has_no_violations() {
        let r = record(json!({"object_id": "a", "lat": 1.0, "lon": 2, "timestamp": 5, "source": "sensor", "extra": true}));
        assert!(validate_record(&fix_contract(), &r).unwrap().is_empty());
    }

    #[test]
    fn missing_required_lat() {
        let r = record(json!({"object_id": "a", "lon": 2.0, "timestamp": 5, "source": "sensor"}));
        let v = validate_record(&fix_contract(), &r).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::MissingField);
        assert_eq!(v[0].location, "lat");
    }

    #[test]
    fn lat_out_of_bounds() {
        let r = record(json!({"object_id": "a", "lat": 95.0, "lon": 2.0, "timestamp": 5, "source": "sensor"}));
        let v = validate_record(&fix_contract(), &r).unwrap();
        // direct interval check: 95 > 90
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].kind, v[0].location.as_str()), (ViolationKind::Bounds, "lat"));
    }

    #[test]
    fn violations_follow_declaration_order() {
        let r = record(json!({"lat": "x", "lon": 2.0, "timestamp": -1, "source": "radar", "sog": -3.0}));
        let v = validate_record(&fix_contract(), &r).unwrap();
        let got: Vec<_> = v.iter().map(|v| (v.location.as_str(), v.kind)).collect();
        assert_eq!(
            got,
            vec![
                ("object_id", ViolationKind::MissingField),
                ("lat", ViolationKind::TypeMismatch),
                ("timestamp", ViolationKind::TypeMismatch),
                ("sog", ViolationKind::Bounds),
                ("source", ViolationKind::TypeMismatch),
            ]
        );
    }

    #[test]
    fn malformed_contracts_are_definition_errors() {
        let mut c = fix_contract();
        c.fields.push(FieldSpec::new("lat", FieldType::Float, true));
        assert!(matches!(validate_record(&c, &Map::new()), Err(ContractError::Malformed(_))));
        let mut c = fix_contract();
        c.distribution_bounds.push(DistributionBound { field: "source".into(), min: None, max: Some(1.0) });
        assert!(matches!(validate_record(&c, &Map::new()), Err(ContractError::Malformed(_))));
        let mut c = fix_contract();
        c.distribution_bounds.push(DistributionBound { field: "nope".into(), min: None, max: Some(1.0) });
        assert!(c.check_well_formed().is_err());
    }

    #[test]
    fn batch_prefixes_record_index() {
        let records = vec![
            json!({"object_id": "a", "lat": 1.0, "lon": 2.0, "timestamp": 5, "source": "sensor"}),
            json!({"object_id": "a", "lon": 2.0, "timestamp": 5, "source": "sensor"}),
            json!([1, 2]),
        ];
        let v = validate_records(&fix_contract(), &records).unwrap();
        assert_eq!(v[0].location, "record[1].lat");
        assert_eq!(v[1].location, "record[2]");
        assert_eq!(v[1].kind, ViolationKind::Protocol);
    }

    #[test]
    fn field_type_wire_form() {
        let spec = FieldSpec::new("kind", FieldType::Enum { values: vec!["a".into()] }, false);
        let v = serde_json::to_value(&spec).unwrap();
        assert_eq!(v, json!({"name": "kind", "type": "enum", "values": ["a"], "required": false}));
        let back: FieldSpec = serde_json::from_value(json!({"name": "lat", "type": "float"})).unwrap();
        assert!(back.required);
    }
}
