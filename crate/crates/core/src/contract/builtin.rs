//! The installation's contract catalogue. `contracts/` at the repository
//! root holds the same documents in file form.

use std::collections::BTreeMap;

use serde_json::json;

use super::code::{CodeContract, Endpoint, ParamSpec, ParamType, Property, Schema};
use super::data::{DataContract, DistributionBound, FieldSpec, FieldType, ReadProtocol, WriteProtocol};
use super::file::Contract;
use super::http::Method;
use super::model::{FeatureSpec, ModelContract, ModelFileFormat, OutputSchema, Requirement, ScoreSpec};

pub const RAW_FIX: &str = "raw-fix";
pub const SNAPSHOT_FIX: &str = "snapshot-fix";
pub const LABEL: &str = "label";
pub const PREDICTION: &str = "prediction";
pub const TELEMETRY_EVENT: &str = "telemetry-event";
pub const METADATA_RECORD: &str = "metadata-record";
pub const CRAWLER_RECORD: &str = "crawler-provider-record";
pub const RULE_MODEL: &str = "rule-detector-model";
pub const ML_MODEL: &str = "ml-detector-model";
pub const API_SERVICE: &str = "api-prediction-service";

pub const SOURCES: [&str; 4] = ["provider", "sensor", "crawler", "synthetic"];
pub const OBJECT_TYPES: [&str; 3] = ["vessel", "structure", "unidentified"];
pub const ANOMALY_KINDS: [&str; 5] = ["excessive_speed", "ais_gap", "impossible_jump", "zone_violation", "kinematic_outlier"];
pub const PROVIDER_VESSEL_TYPES: [&str; 6] = ["cargo", "tanker", "fishing", "buoy", "platform", "unknown"];

fn strings(values: &[&str]) -> Vec<String> {
    values.iter().map(|s| s.to_string()).collect()
}

fn enum_of(values: &[&str]) -> FieldType {
    FieldType::Enum { values: strings(values) }
}

fn bound(field: &str, min: Option<f64>, max: Option<f64>) -> DistributionBound {
    DistributionBound { field: field.into(), min, max }
}

fn jsonl(name: &str, fields: Vec<FieldSpec>, bounds: Vec<DistributionBound>) -> DataContract {
    DataContract {
        name: name.into(),
        version: 1,
        fields,
        distribution_bounds: bounds,
        read_protocol: ReadProtocol::JsonlScan,
        write_protocol: WriteProtocol::JsonlAppend,
    }
}

fn fix_contract(name: &str) -> DataContract {
    jsonl(
        name,
        vec![
            FieldSpec::new("object_id", FieldType::String, true),
            FieldSpec::new("lat", FieldType::Float, true),
            FieldSpec::new("lon", FieldType::Float, true),
            FieldSpec::new("timestamp", FieldType::Timestamp, true),
            FieldSpec::new("sog", FieldType::Float, false),
            FieldSpec::new("cog", FieldType::Float, false),
            FieldSpec::new("source", enum_of(&SOURCES), true),
            FieldSpec::new("object_type", enum_of(&OBJECT_TYPES), true),
        ],
        vec![
            bound("lat", Some(-90.0), Some(90.0)),
            bound("lon", Some(-180.0), Some(180.0)),
            bound("sog", Some(0.0), None),
            bound("cog", Some(0.0), Some(360.0)),
        ],
    )
}

pub fn raw_fix() -> DataContract {
    fix_contract(RAW_FIX)
}

pub fn snapshot_fix() -> DataContract {
    fix_contract(SNAPSHOT_FIX)
}

pub fn label() -> DataContract {
    jsonl(
        LABEL,
        vec![
            FieldSpec::new("label_id", FieldType::String, false),
            FieldSpec::new("object_id", FieldType::String, true),
            FieldSpec::new("start_ts", FieldType::Timestamp, true),
            FieldSpec::new("end_ts", FieldType::Timestamp, true),
            FieldSpec::new("verdict", enum_of(&["anomalous", "normal"]), true),
            FieldSpec::new("kind", enum_of(&ANOMALY_KINDS), false),
            FieldSpec::new("annotator", enum_of(&["provider", "investigator"]), true),
            FieldSpec::new("note", FieldType::String, false),
        ],
        vec![],
    )
}

pub fn prediction() -> DataContract {
    jsonl(
        PREDICTION,
        vec![
            FieldSpec::new("anomaly_id", FieldType::String, true),
            FieldSpec::new("object_id", FieldType::String, true),
            FieldSpec::new("kind", enum_of(&ANOMALY_KINDS), true),
            FieldSpec::new("severity", FieldType::Float, true),
            FieldSpec::new("score", FieldType::Float, true),
            FieldSpec::new("start_ts", FieldType::Timestamp, true),
            FieldSpec::new("end_ts", FieldType::Timestamp, true),
            FieldSpec::new("lat", FieldType::Float, true),
            FieldSpec::new("lon", FieldType::Float, true),
            FieldSpec::new("model_id", FieldType::String, true),
            FieldSpec::new("explanation", FieldType::Json, true),
        ],
        vec![
            bound("severity", Some(0.0), Some(1.0)),
            bound("score", Some(0.0), None),
            bound("lat", Some(-90.0), Some(90.0)),
            bound("lon", Some(-180.0), Some(180.0)),
        ],
    )
}

pub fn telemetry_event() -> DataContract {
    jsonl(
        TELEMETRY_EVENT,
        vec![
            FieldSpec::new("ts", FieldType::Timestamp, true),
            FieldSpec::new("endpoint", FieldType::String, true),
            FieldSpec::new("latency_ms", FieldType::Float, true),
            FieldSpec::new("status", FieldType::Int, true),
        ],
        vec![bound("latency_ms", Some(0.0), None), bound("status", Some(100.0), Some(599.0))],
    )
}

pub fn metadata_record() -> DataContract {
    jsonl(
        METADATA_RECORD,
        vec![
            FieldSpec::new("record_type", enum_of(&["object", "training_run"]), true),
            FieldSpec::new("object_id", FieldType::String, false),
            FieldSpec::new("object_type", enum_of(&OBJECT_TYPES), false),
            FieldSpec::new("metadata", FieldType::Map, false),
            FieldSpec::new("run_id", FieldType::String, false),
            FieldSpec::new("pipeline", enum_of(&["rule", "ml"]), false),
            FieldSpec::new("hyperparameters", FieldType::Json, false),
            FieldSpec::new("data_snapshot_id", FieldType::String, false),
            FieldSpec::new("model_id", FieldType::String, false),
            FieldSpec::new("metrics", FieldType::Json, false),
            FieldSpec::new("started_ts", FieldType::Timestamp, false),
            FieldSpec::new("ended_ts", FieldType::Timestamp, false),
        ],
        vec![],
    )
}

/// Upstream provider record format, as seen by the crawler before
/// translation into the domain model.
pub fn crawler_record() -> DataContract {
    jsonl(
        CRAWLER_RECORD,
        vec![
            FieldSpec::new("mmsi", FieldType::String, true),
            FieldSpec::new("latitude", FieldType::Float, true),
            FieldSpec::new("longitude", FieldType::Float, true),
            FieldSpec::new("epoch", FieldType::Float, true),
            FieldSpec::new("speed", FieldType::Float, false),
            FieldSpec::new("course", FieldType::Float, false),
            FieldSpec::new("vessel_type", enum_of(&PROVIDER_VESSEL_TYPES), false),
            FieldSpec::new("name", FieldType::String, false),
            FieldSpec::new("flag", FieldType::String, false),
            FieldSpec::new("callsign", FieldType::String, false),
        ],
        vec![
            bound("latitude", Some(-90.0), Some(90.0)),
            bound("longitude", Some(-180.0), Some(180.0)),
            bound("epoch", Some(1.0), None),
            bound("speed", Some(0.0), None),
            bound("course", Some(0.0), Some(360.0)),
        ],
    )
}

fn model_contract(name: &str, features: &[&str], hyper: BTreeMap<String, serde_json::Value>) -> ModelContract {
    ModelContract {
        name: name.into(),
        version: 1,
        input_features: features.iter().map(|f| FeatureSpec::float(f)).collect(),
        output_schema: OutputSchema {
            score: ScoreSpec { ty: "float".into(), min: 0.0, max: 1.0 },
            explanation: Requirement::Required,
        },
        file_format: ModelFileFormat::ManifestJsonV1,
        hyperparameters: hyper,
    }
}

pub fn rule_model() -> ModelContract {
    model_contract(
        RULE_MODEL,
        &["implied_speed_kn", "interval_s", "lat", "lon"],
        [
            ("max_speed_kn".to_string(), json!(30.0)),
            ("gap_threshold_s".to_string(), json!(21600.0)),
            ("jump_speed_kn".to_string(), json!(100.0)),
            ("min_zone_fixes".to_string(), json!(1.0)),
            ("calibration_margin".to_string(), json!(1.25)),
            ("zones".to_string(), json!([])),
        ]
        .into(),
    )
}

pub fn ml_model() -> ModelContract {
    model_contract(
        ML_MODEL,
        &["implied_speed_kn", "turn_rate_deg_per_min", "reported_sog_kn"],
        [("quantile_q".to_string(), json!(0.99))].into(),
    )
}

fn obj(properties: Vec<Property>) -> Schema {
    Schema::Object { properties }
}

fn reference(name: &str) -> Schema {
    Schema::Ref { name: name.into() }
}

fn array(items: Schema) -> Schema {
    Schema::Array { items: Box::new(items) }
}

fn string_enum(values: &[&str]) -> Schema {
    Schema::Enum { values: strings(values) }
}

fn number() -> Schema {
    Schema::Number { min: None, max: None }
}

fn number_in(min: f64, max: f64) -> Schema {
    Schema::Number { min: Some(min), max: Some(max) }
}

fn param(name: &str, ty: ParamType) -> ParamSpec {
    ParamSpec { name: name.into(), ty, required: false }
}

fn responses(ok: (u16, Schema), errors: &[u16]) -> BTreeMap<u16, Schema> {
    let mut map = BTreeMap::new();
    map.insert(ok.0, ok.1);
    for code in errors {
        map.insert(*code, reference("error"));
    }
    map
}

fn definitions() -> BTreeMap<String, Schema> {
    let mut defs = BTreeMap::new();
    defs.insert(
        "error".into(),
        obj(vec![Property::required(
            "error",
            obj(vec![
                Property::required("kind", Schema::String),
                Property::required("message", Schema::String),
                Property::optional("violations", array(Schema::Any)),
            ]),
        )]),
    );
    defs.insert(
        "geofix".into(),
        obj(vec![
            Property::required("object_id", Schema::String),
            Property::required("lat", number_in(-90.0, 90.0)),
            Property::required("lon", number_in(-180.0, 180.0)),
            Property::required("timestamp", Schema::Timestamp),
            Property::optional("sog", Schema::Number { min: Some(0.0), max: None }),
            Property::optional("cog", number_in(0.0, 360.0)),
            Property::required("source", string_enum(&SOURCES)),
            Property::required("object_type", string_enum(&OBJECT_TYPES)),
        ]),
    );
    defs.insert(
        "object".into(),
        obj(vec![
            Property::required("object_id", Schema::String),
            Property::required("object_type", string_enum(&OBJECT_TYPES)),
            Property::required("metadata", Schema::Map { values: Box::new(Schema::String) }),
        ]),
    );
    defs.insert(
        "trajectory".into(),
        obj(vec![
            Property::required("object_id", Schema::String),
            Property::required("fixes", array(reference("geofix"))),
        ]),
    );
    defs.insert(
        "explanation_step".into(),
        obj(vec![
            Property::required("rule_or_feature", Schema::String),
            Property::required("observed", number()),
            Property::required("threshold_or_baseline", number()),
            Property::required("contribution", number()),
            Property::required("fired", Schema::Boolean),
        ]),
    );
    defs.insert(
        "explanation".into(),
        obj(vec![
            Property::required("steps", array(reference("explanation_step"))),
            Property::required("summary", Schema::String),
        ]),
    );
    defs.insert(
        "anomaly".into(),
        obj(vec![
            Property::required("anomaly_id", Schema::String),
            Property::required("object_id", Schema::String),
            Property::required("kind", string_enum(&ANOMALY_KINDS)),
            Property::required("severity", number_in(0.0, 1.0)),
            Property::required("score", Schema::Number { min: Some(0.0), max: None }),
            Property::required("start_ts", Schema::Timestamp),
            Property::required("end_ts", Schema::Timestamp),
            Property::required("lat", number_in(-90.0, 90.0)),
            Property::required("lon", number_in(-180.0, 180.0)),
            Property::required("model_id", Schema::String),
            Property::required("explanation", reference("explanation")),
        ]),
    );
    defs.insert(
        "label".into(),
        obj(vec![
            Property::optional("label_id", Schema::String),
            Property::required("object_id", Schema::String),
            Property::required("start_ts", Schema::Timestamp),
            Property::required("end_ts", Schema::Timestamp),
            Property::required("verdict", string_enum(&["anomalous", "normal"])),
            Property::optional("kind", string_enum(&ANOMALY_KINDS)),
            Property::required("annotator", string_enum(&["provider", "investigator"])),
            Property::optional("note", Schema::String),
        ]),
    );
    let page = |item: &str| {
        obj(vec![
            Property::required("items", array(reference(item))),
            Property { name: "next_cursor".into(), schema: Schema::String, required: false, nullable: true },
        ])
    };
    defs.insert("geofix_page".into(), page("geofix"));
    defs.insert("anomaly_page".into(), page("anomaly"));
    defs
}

fn area_params() -> Vec<ParamSpec> {
    vec![
        param("bbox", ParamType::Bbox),
        param("wrap", ParamType::Boolean),
        param("from", ParamType::Timestamp),
        param("to", ParamType::Timestamp),
        param("cursor", ParamType::Cursor),
        param("limit", ParamType::Integer { min: Some(1), max: Some(10_000) }),
    ]
}

pub fn api_service() -> CodeContract {
    let mut geo_params = area_params();
    geo_params.push(param("sources", ParamType::CsvEnum { values: strings(&SOURCES) }));
    geo_params.push(param("types", ParamType::CsvEnum { values: strings(&OBJECT_TYPES) }));
    let endpoints = vec![
        Endpoint {
            method: Method::Get,
            path: "/api/v1/geolocations".into(),
            query: geo_params,
            request_body: None,
            responses: responses((200, reference("geofix_page")), &[400, 401, 500]),
        },
        Endpoint {
            method: Method::Get,
            path: "/api/v1/objects/{id}".into(),
            query: vec![],
            request_body: None,
            responses: responses((200, reference("object")), &[400, 401, 404, 500]),
        },
        Endpoint {
            method: Method::Get,
            path: "/api/v1/objects/{id}/trajectory".into(),
            query: vec![param("from", ParamType::Timestamp), param("to", ParamType::Timestamp)],
            request_body: None,
            responses: responses((200, reference("trajectory")), &[400, 401, 404, 500]),
        },
        Endpoint {
            method: Method::Get,
            path: "/api/v1/anomalies".into(),
            query: area_params(),
            request_body: None,
            responses: responses((200, reference("anomaly_page")), &[400, 401, 500]),
        },
        Endpoint {
            method: Method::Get,
            path: "/api/v1/anomalies/{id}/explanation".into(),
            query: vec![],
            request_body: None,
            responses: responses((200, reference("explanation")), &[400, 401, 404, 500]),
        },
        Endpoint {
            method: Method::Post,
            path: "/api/v1/detect".into(),
            query: vec![],
            request_body: Some(obj(vec![
                Property::required("object_id", Schema::String),
                Property::required("from", Schema::Timestamp),
                Property::required("to", Schema::Timestamp),
                Property::optional("model", Schema::String),
            ])),
            responses: responses(
                (200, obj(vec![Property::required("anomalies", array(reference("anomaly")))])),
                &[400, 401, 404, 422, 500, 503],
            ),
        },
        Endpoint {
            method: Method::Post,
            path: "/api/v1/labels".into(),
            query: vec![],
            request_body: Some(reference("label")),
            responses: responses(
                (
                    201,
                    obj(vec![
                        Property::required("label_id", Schema::String),
                        Property::required("label", reference("label")),
                    ]),
                ),
                &[400, 401, 500, 503],
            ),
        },
        Endpoint {
            method: Method::Get,
            path: "/api/v1/health".into(),
            query: vec![],
            request_body: None,
            responses: responses(
                (
                    200,
                    obj(vec![
                        Property::required("status", string_enum(&["ok", "degraded"])),
                        Property { name: "model_id".into(), schema: Schema::String, required: true, nullable: true },
                        Property::required("contract", Schema::Any),
                    ]),
                ),
                &[400],
            ),
        },
    ];
    CodeContract { name: API_SERVICE.into(), version: 1, definitions: definitions(), endpoints }
}

pub fn all() -> Vec<Contract> {
    vec![
        Contract::Data(raw_fix()),
        Contract::Data(snapshot_fix()),
        Contract::Data(label()),
        Contract::Data(prediction()),
        Contract::Data(telemetry_event()),
        Contract::Data(metadata_record()),
        Contract::Data(crawler_record()),
        Contract::Model(rule_model()),
        Contract::Model(ml_model()),
        Contract::Code(api_service()),
    ]
}
