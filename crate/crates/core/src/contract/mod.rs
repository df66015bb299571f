//! Machine-checkable code, data and model contracts used at every boundary:
//! store records, registry entries and HTTP exchanges.

pub mod builtin;
pub mod checksum;
mod code;
mod data;
mod file;
mod http;
mod mock;
mod model;
mod violation;

pub use code::{validate_http_exchange, CodeContract, Endpoint, ParamSpec, ParamType, Property, Schema};
pub use data::{
    validate_record, validate_records, validate_value, DataContract, DistributionBound, FieldSpec, FieldType,
    ReadProtocol, WriteProtocol,
};
pub use file::{Contract, ContractKind, ContractSet, ENVELOPE_SCHEMA};
pub use http::{Exchange, HttpRequest, HttpResponse, Method};
pub use mock::{error_body, mock_responder, CannedResponse, MockResponder};
pub use model::{
    validate_model_dir, FeatureSpec, ModelContract, ModelFileFormat, OutputSchema, Requirement, ScoreSpec,
    MANIFEST_FILE, PARAMS_FILE,
};
pub use violation::{Violation, ViolationKind};

use thiserror::Error;

/// Failures of the contracts themselves, as opposed to [`Violation`]s of
/// the things they check.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContractError {
    #[error("malformed contract: {0}")]
    Malformed(String),
    #[error("contract not found: {0}")]
    NotFound(String),
    #[error("canned example for {endpoint} violates the contract: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    CannedExample { endpoint: String, violations: Vec<Violation> },
    #[error("i/o error: {0}")]
    Io(String),
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use proptest::prelude::*;
    use serde_json::{json, Value};

    use super::*;

    #[test]
    fn builtin_contracts_are_well_formed_and_round_trip() {
        for contract in ContractSet::builtin().iter() {
            contract.check_well_formed().unwrap();
            let text = contract.to_file_string();
            let back = Contract::from_file_str(&text).unwrap();
            assert_eq!(&back, contract);
            let envelope: Value = serde_json::from_str(&text).unwrap();
            assert_eq!(envelope["schema"], "og-contract/1");
            assert!(envelope["body"].get("name").is_none());
        }
    }

    #[test]
    fn repository_contract_files_match_builtin() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../contracts");
        if std::env::var_os("OG_REGENERATE_CONTRACTS").is_some() {
            ContractSet::builtin().write_dir(&dir).unwrap();
        }
        let on_disk = ContractSet::load_dir(&dir).unwrap();
        let builtin = ContractSet::builtin();
        let names = |s: &ContractSet| s.iter().map(|c| c.name().to_string()).collect::<Vec<_>>();
        assert_eq!(names(&on_disk), names(&builtin));
        for contract in builtin.iter() {
            let text = std::fs::read_to_string(dir.join(format!("{}.json", contract.name()))).unwrap();
            assert_eq!(text, contract.to_file_string(), "contracts/{}.json is stale", contract.name());
        }
    }

    #[test]
    fn unknown_envelope_schema_rejected() {
        let text = Contract::Data(builtin::label()).to_file_string().replace("og-contract/1", "og-contract/9");
        assert!(Contract::from_file_str(&text).is_err());
    }

    fn canned() -> BTreeMap<String, CannedResponse> {
        [(
            "GET /api/v1/health".to_string(),
            CannedResponse { status: 200, body: json!({"status": "ok", "model_id": null, "contract": {}}) },
        )]
        .into()
    }

    #[test]
    fn mock_serves_canned_health() {
        let respond = mock_responder(builtin::api_service(), canned()).unwrap();
        let resp = respond(&HttpRequest::get("/api/v1/health"));
        assert_eq!(resp.status, 200);
        assert_eq!(resp.body["status"], "ok");
    }

    #[test]
    fn mock_rejects_undeclared_path() {
        let respond = mock_responder(builtin::api_service(), canned()).unwrap();
        let resp = respond(&HttpRequest::get("/api/v1/nowhere"));
        assert_eq!(resp.status, 400);
        let violations: Vec<Violation> = serde_json::from_value(resp.body["error"]["violations"].clone()).unwrap();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].kind, ViolationKind::Protocol);
    }

    #[test]
    fn mock_construction_fails_on_bad_example() {
        let mut bad = canned();
        bad.insert(
            "GET /api/v1/objects/{id}".into(),
            CannedResponse { status: 200, body: json!({"object_id": "x", "object_type": "submarine", "metadata": {}}) },
        );
        assert!(matches!(
            MockResponder::new(builtin::api_service(), bad),
            Err(ContractError::CannedExample { .. })
        ));
        let mut undeclared = canned();
        undeclared.insert("GET /nope".into(), CannedResponse { status: 200, body: json!({}) });
        assert!(MockResponder::new(builtin::api_service(), undeclared).is_err());
    }

    fn full_canned() -> BTreeMap<String, CannedResponse> {
        let fix = json!({"object_id": "v1", "lat": 1.0, "lon": 2.0, "timestamp": 10, "source": "sensor", "object_type": "vessel"});
        let explanation = json!({"steps": [{"rule_or_feature": "max_speed_kn", "observed": 45.0, "threshold_or_baseline": 30.0, "contribution": 1.0, "fired": true}], "summary": "fast"});
        let anomaly = json!({"anomaly_id": "a1", "object_id": "v1", "kind": "excessive_speed", "severity": 1.0, "score": 1.5,
            "start_ts": 10, "end_ts": 20, "lat": 1.0, "lon": 2.0, "model_id": "rule-detector:1", "explanation": explanation});
        let label = json!({"object_id": "v1", "start_ts": 10, "end_ts": 20, "verdict": "normal", "annotator": "investigator"});
        let mut c = canned();
        let mut put = |k: &str, status: u16, body: Value| {
            c.insert(k.to_string(), CannedResponse { status, body });
        };
        put("GET /api/v1/geolocations", 200, json!({"items": [fix.clone()], "next_cursor": null}));
        put("GET /api/v1/objects/{id}", 200, json!({"object_id": "v1", "object_type": "vessel", "metadata": {}}));
        put("GET /api/v1/objects/{id}/trajectory", 200, json!({"object_id": "v1", "fixes": [fix]}));
        put("GET /api/v1/anomalies", 200, json!({"items": [anomaly.clone()]}));
        put("GET /api/v1/anomalies/{id}/explanation", 200, explanation);
        put("POST /api/v1/detect", 200, json!({"anomalies": [anomaly]}));
        put("POST /api/v1/labels", 201, json!({"label_id": "l1", "label": label}));
        c
    }

    fn conforming_request() -> impl Strategy<Value = HttpRequest> {
        let bbox = (-90.0f64..0.0, -180.0f64..0.0, 0.0f64..90.0, 0.0f64..180.0)
            .prop_map(|(a, b, c, d)| format!("{a},{b},{c},{d}"));
        let geo = (proptest::option::of(bbox.clone()), proptest::option::of(0i64..2_000_000_000), proptest::option::of(1i64..=10_000))
            .prop_map(|(bbox, from, limit)| {
                let mut q = Vec::new();
                if let Some(b) = bbox { q.push(("bbox".to_string(), b)); }
                if let Some(f) = from { q.push(("from".to_string(), f.to_string())); }
                if let Some(l) = limit { q.push(("limit".to_string(), l.to_string())); }
                q
            });
        let id = "[a-z0-9-]{1,12}";
        prop_oneof![
            geo.clone().prop_map(|q| HttpRequest { query: q, ..HttpRequest::get("/api/v1/geolocations") }),
            geo.prop_map(|mut q| {
                q.retain(|(k, _)| k != "sources");
                HttpRequest { query: q, ..HttpRequest::get("/api/v1/anomalies") }
            }),
            id.prop_map(|id| HttpRequest::get(&format!("/api/v1/objects/{id}"))),
            (id, proptest::option::of(1i64..1000)).prop_map(|(id, to)| {
                let mut r = HttpRequest::get(&format!("/api/v1/objects/{id}/trajectory"));
                if let Some(to) = to { r.query.push(("to".into(), to.to_string())); }
                r
            }),
            id.prop_map(|id| HttpRequest::get(&format!("/api/v1/anomalies/{id}/explanation"))),
            (id, 0i64..1000, 1000i64..5000).prop_map(|(id, from, to)| HttpRequest::post("/api/v1/detect", json!({"object_id": id, "from": from, "to": to}))),
            (id, prop_oneof![Just("normal"), Just("anomalous")]).prop_map(|(id, verdict)| {
                HttpRequest::post("/api/v1/labels", json!({"object_id": id, "start_ts": 1, "end_ts": 2, "verdict": verdict, "kind": "ais_gap", "annotator": "investigator"}))
            }),
            Just(HttpRequest::get("/api/v1/health")),
        ]
    }

    proptest! {
        #[test]
        fn mock_is_self_consistent(req in conforming_request()) {
            let contract = builtin::api_service();
            prop_assert!(contract.validate_request(&req).is_empty(), "{:?}", contract.validate_request(&req));
            let mock = MockResponder::new(contract.clone(), full_canned()).unwrap();
            let resp = mock.respond(&req);
            prop_assert!(validate_http_exchange(&contract, &req, &resp).is_empty());
        }

        #[test]
        fn mock_rejections_also_conform(path in "/api/v1/(objects|anomalies)/[a-z]{1,4}", q in "[a-z]{1,5}") {
            let contract = builtin::api_service();
            let mock = MockResponder::new(contract.clone(), full_canned()).unwrap();
            let mut req = HttpRequest::get(&path);
            req.query.push((q, "x".into()));
            let resp = mock.respond(&req);
            prop_assert_eq!(resp.status, 400);
        }

        #[test]
        fn reloaded_contract_validates_identically(
            lats in proptest::collection::vec(proptest::option::of(-100.0f64..100.0), 1..20),
        ) {
            let original = builtin::raw_fix();
            let reloaded = match Contract::from_file_str(&Contract::Data(original.clone()).to_file_string()).unwrap() {
                Contract::Data(c) => c,
                _ => unreachable!(),
            };
            let records: Vec<Value> = lats.iter().map(|lat| {
                let mut r = json!({"object_id": "v", "lon": 1.0, "timestamp": 5, "source": "sensor", "object_type": "vessel"});
                if let Some(lat) = lat { r["lat"] = json!(lat); }
                r
            }).collect();
            let a = serde_json::to_vec(&validate_records(&original, &records).unwrap()).unwrap();
            let b = serde_json::to_vec(&validate_records(&reloaded, &records).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
