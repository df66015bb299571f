use std::collections::{BTreeMap, BTreeSet};

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::http::{HttpRequest, HttpResponse, Method};
use super::violation::{contract_ref, Violation, ViolationKind};
use super::ContractError;

/// JSON body schema. Objects are closed: undeclared properties are
/// `extra_field` violations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Schema {
    String,
    Integer {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<f64>,
    },
    Number {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<f64>,
    },
    Boolean,
    Timestamp,
    Enum { values: Vec<String> },
    Array { items: Box<Schema> },
    Object { properties: Vec<Property> },
    /// Object with arbitrary keys whose values follow `values`.
    Map { values: Box<Schema> },
    /// Named entry of the contract's `definitions`.
    Ref { name: String },
    Any,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Property {
    pub name: String,
    pub schema: Schema,
    #[serde(default = "default_true")]
    pub required: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub nullable: bool,
}

fn default_true() -> bool {
    true
}

impl Property {
    pub fn required(name: &str, schema: Schema) -> Self {
        Self { name: name.into(), schema, required: true, nullable: false }
    }

    pub fn optional(name: &str, schema: Schema) -> Self {
        Self { name: name.into(), schema, required: false, nullable: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamType {
    String,
    Integer {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<i64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<i64>,
    },
    Number,
    Boolean,
    /// Non-negative integer UTC seconds.
    Timestamp,
    /// `minLat,minLon,maxLat,maxLon`
    Bbox,
    /// Comma-separated list drawn from `values`.
    CsvEnum { values: Vec<String> },
    /// URL-safe base64 opaque token.
    Cursor,
}

impl ParamType {
    /// Returns a violation kind and message when `raw` does not parse.
    fn check(&self, raw: &str) -> Option<(ViolationKind, String)> {
        let mismatch = |what: &str| Some((ViolationKind::TypeMismatch, format!("`{raw}` is not {what}")));
        match self {
            ParamType::String => None,
            ParamType::Integer { min, max } => match raw.parse::<i64>() {
                Err(_) => mismatch("an integer"),
                Ok(v) if min.is_some_and(|m| v < m) || max.is_some_and(|m| v > m) => Some((
                    ViolationKind::Bounds,
                    format!("{v} outside [{}, {}]", min.unwrap_or(i64::MIN), max.unwrap_or(i64::MAX)),
                )),
                Ok(_) => None,
            },
            ParamType::Number => match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => None,
                _ => mismatch("a number"),
            },
            ParamType::Boolean => match raw {
                "true" | "false" => None,
                _ => mismatch("a boolean"),
            },
            ParamType::Timestamp => match raw.parse::<i64>() {
                Ok(v) if v >= 0 => None,
                _ => mismatch("a UTC epoch-seconds timestamp"),
            },
            ParamType::Bbox => {
                let parts: Vec<_> = raw.split(',').map(|p| p.trim().parse::<f64>()).collect();
                if parts.len() == 4 && parts.iter().all(|p| p.as_ref().is_ok_and(|v| v.is_finite())) {
                    None
                } else {
                    mismatch("a bbox minLat,minLon,maxLat,maxLon")
                }
            }
            ParamType::CsvEnum { values } => {
                let bad: Vec<_> = raw
                    .split(',')
                    .filter(|item| !values.iter().any(|v| v == item))
                    .collect();
                if bad.is_empty() {
                    None
                } else {
                    mismatch(&format!("a list of {}", values.join("|")))
                }
            }
            ParamType::Cursor => {
                if base64::engine::general_purpose::URL_SAFE_NO_PAD.decode(raw).is_ok() {
                    None
                } else {
                    mismatch("a cursor token")
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub ty: ParamType,
    #[serde(default)]
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub method: Method,
    /// Path template; `{name}` segments match any non-empty segment.
    pub path: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub query: Vec<ParamSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_body: Option<Schema>,
    /// Declared status codes and their response body schemas.
    pub responses: BTreeMap<u16, Schema>,
}

impl Endpoint {
    pub fn key(&self) -> String {
        format!("{} {}", self.method, self.path)
    }

    pub fn matches_path(&self, path: &str) -> bool {
        let template: Vec<_> = self.path.trim_end_matches('/').split('/').collect();
        let actual: Vec<_> = path.trim_end_matches('/').split('/').collect();
        template.len() == actual.len()
            && template.iter().zip(&actual).all(|(t, a)| {
                if t.starts_with('{') && t.ends_with('}') {
                    !a.is_empty()
                } else {
                    t == a
                }
            })
    }

    /// Values bound to `{name}` template segments.
    pub fn path_params(&self, path: &str) -> BTreeMap<String, String> {
        self.path
            .split('/')
            .zip(path.split('/'))
            .filter(|(t, _)| t.starts_with('{') && t.ends_with('}'))
            .map(|(t, a)| (t[1..t.len() - 1].to_string(), a.to_string()))
            .collect()
    }
}

/// Endpoint-level contract between the API service and its clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeContract {
    pub name: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub definitions: BTreeMap<String, Schema>,
    pub endpoints: Vec<Endpoint>,
}

impl CodeContract {
    pub fn reference(&self) -> String {
        contract_ref(&self.name, self.version)
    }

    /// Paths unique per method; every `Ref` resolves.
    pub fn check_well_formed(&self) -> Result<(), ContractError> {
        let mut seen = BTreeSet::new();
        for ep in &self.endpoints {
            if !seen.insert(ep.key()) {
                return Err(ContractError::Malformed(format!("{}: duplicate endpoint {}", self.reference(), ep.key())));
            }
            if ep.responses.is_empty() {
                return Err(ContractError::Malformed(format!("{}: {} declares no responses", self.reference(), ep.key())));
            }
            let schemas = ep.request_body.iter().chain(ep.responses.values());
            for schema in schemas {
                self.check_refs(schema)?;
            }
        }
        for schema in self.definitions.values() {
            self.check_refs(schema)?;
        }
        Ok(())
    }

    fn check_refs(&self, schema: &Schema) -> Result<(), ContractError> {
        match schema {
            Schema::Ref { name } if !self.definitions.contains_key(name) => {
                Err(ContractError::Malformed(format!("{}: unresolved ref `{name}`", self.reference())))
            }
            Schema::Array { items } => self.check_refs(items),
            Schema::Map { values } => self.check_refs(values),
            Schema::Object { properties } => properties.iter().try_for_each(|p| self.check_refs(&p.schema)),
            _ => Ok(()),
        }
    }

    pub fn endpoint(&self, method: Method, path: &str) -> Option<&Endpoint> {
        self.endpoints.iter().find(|e| e.method == method && e.matches_path(path))
    }

    pub fn endpoint_by_key(&self, key: &str) -> Option<&Endpoint> {
        self.endpoints.iter().find(|e| e.key() == key)
    }

    fn walk(&self, schema: &Schema, value: &Value, path: &str, out: &mut Vec<(ViolationKind, String, String)>) {
        let mismatch = |out: &mut Vec<_>, what: &str| {
            out.push((ViolationKind::TypeMismatch, path.to_string(), format!("expected {what}, found {}", short(value))));
        };
        let range = |out: &mut Vec<_>, x: f64, min: &Option<f64>, max: &Option<f64>| {
            if min.is_some_and(|m| x < m) || max.is_some_and(|m| x > m) {
                out.push((
                    ViolationKind::Bounds,
                    path.to_string(),
                    format!("{x} outside [{}, {}]", min.unwrap_or(f64::NEG_INFINITY), max.unwrap_or(f64::INFINITY)),
                ));
            }
        };
        match schema {
            Schema::Any => {}
            Schema::String => {
                if !value.is_string() {
                    mismatch(out, "string");
                }
            }
            Schema::Integer { min, max } => match value.as_i64() {
                Some(x) => range(out, x as f64, min, max),
                None => mismatch(out, "integer"),
            },
            Schema::Number { min, max } => match value.as_f64() {
                Some(x) => range(out, x, min, max),
                None => mismatch(out, "number"),
            },
            Schema::Boolean => {
                if !value.is_boolean() {
                    mismatch(out, "boolean");
                }
            }
            Schema::Timestamp => {
                if !value.as_i64().is_some_and(|t| t >= 0) {
                    mismatch(out, "timestamp");
                }
            }
            Schema::Enum { values } => {
                if !value.as_str().is_some_and(|s| values.iter().any(|v| v == s)) {
                    mismatch(out, &format!("one of {}", values.join("|")));
                }
            }
            Schema::Array { items } => match value.as_array() {
                Some(arr) => {
                    for (i, item) in arr.iter().enumerate() {
                        self.walk(items, item, &format!("{path}[{i}]"), out);
                    }
                }
                None => mismatch(out, "array"),
            },
            Schema::Map { values } => match value.as_object() {
                Some(map) => {
                    for (k, v) in map {
                        self.walk(values, v, &format!("{path}.{k}"), out);
                    }
                }
                None => mismatch(out, "object"),
            },
            Schema::Object { properties } => {
                let Some(map) = value.as_object() else {
                    mismatch(out, "object");
                    return;
                };
                for prop in properties {
                    let child = format!("{path}.{}", prop.name);
                    match map.get(&prop.name) {
                        None if prop.required => out.push((
                            ViolationKind::MissingField,
                            child,
                            format!("required property `{}` missing", prop.name),
                        )),
                        None => {}
                        Some(Value::Null) if prop.nullable || !prop.required => {}
                        Some(v) => self.walk(&prop.schema, v, &child, out),
                    }
                }
                for key in map.keys() {
                    if !properties.iter().any(|p| &p.name == key) {
                        out.push((
                            ViolationKind::ExtraField,
                            format!("{path}.{key}"),
                            format!("undocumented property `{key}`"),
                        ));
                    }
                }
            }
            Schema::Ref { name } => match self.definitions.get(name) {
                Some(resolved) => self.walk(resolved, value, path, out),
                None => out.push((ViolationKind::Protocol, path.to_string(), format!("unresolved ref `{name}`"))),
            },
        }
    }

    /// Violations of a body against a schema, locations prefixed by `location`.
    pub fn check_body(&self, schema: &Schema, value: &Value, location: &str) -> Vec<Violation> {
        let mut raw = Vec::new();
        self.walk(schema, value, location, &mut raw);
        raw.into_iter()
            .map(|(kind, loc, msg)| Violation::new(self.reference(), loc, kind, msg))
            .collect()
    }

    /// Request-side checks: route, query parameters and body.
    pub fn validate_request(&self, request: &HttpRequest) -> Vec<Violation> {
        let reference = self.reference();
        let Some(ep) = self.endpoint(request.method, &request.path) else {
            let other_methods: Vec<_> = self
                .endpoints
                .iter()
                .filter(|e| e.matches_path(&request.path))
                .map(|e| e.method.as_str())
                .collect();
            let message = if other_methods.is_empty() {
                format!("no endpoint matches {} {}", request.method, request.path)
            } else {
                format!("{} not allowed on {}; declared: {}", request.method, request.path, other_methods.join(", "))
            };
            return vec![Violation::new(
                reference,
                format!("{} {}:path", request.method, request.path),
                ViolationKind::Protocol,
                message,
            )];
        };
        let at = |part: &str| format!("{}:{part}", ep.key());
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for (name, raw) in &request.query {
            let Some(spec) = ep.query.iter().find(|p| &p.name == name) else {
                out.push(Violation::new(&reference, at(&format!("query.{name}")), ViolationKind::ExtraField, format!("undeclared query parameter `{name}`")));
                continue;
            };
            if !seen.insert(name.as_str()) {
                out.push(Violation::new(&reference, at(&format!("query.{name}")), ViolationKind::Protocol, format!("query parameter `{name}` repeated")));
                continue;
            }
            if let Some((kind, message)) = spec.ty.check(raw) {
                out.push(Violation::new(&reference, at(&format!("query.{name}")), kind, message));
            }
        }
        for spec in ep.query.iter().filter(|p| p.required) {
            if !seen.contains(spec.name.as_str()) {
                out.push(Violation::new(&reference, at(&format!("query.{}", spec.name)), ViolationKind::MissingField, format!("required query parameter `{}` missing", spec.name)));
            }
        }
        match (&ep.request_body, &request.body) {
            (Some(schema), Some(body)) => out.extend(self.check_body(schema, body, &at("body"))),
            (Some(_), None) => out.push(Violation::new(&reference, at("body"), ViolationKind::MissingField, "request body required")),
            (None, Some(body)) if !body.is_null() => {
                out.push(Violation::new(&reference, at("body"), ViolationKind::ExtraField, "endpoint takes no request body"))
            }
            _ => {}
        }
        out
    }

    /// Response-side checks for an already routed request.
    pub fn validate_response(&self, ep: &Endpoint, response: &HttpResponse) -> Vec<Violation> {
        match ep.responses.get(&response.status) {
            Some(schema) => self.check_body(schema, &response.body, &format!("{}:response", ep.key())),
            None => vec![Violation::new(
                self.reference(),
                format!("{}:status", ep.key()),
                ViolationKind::Protocol,
                format!("undeclared status {}", response.status),
            )],
        }
    }
}

fn short(value: &Value) -> String {
    let s = value.to_string();
    if s.len() > 60 {
        format!("{}...", &s[..s.char_indices().nth(57).map_or(s.len(), |(i, _)| i)])
    } else {
        s
    }
}

/// Check a whole exchange. An unmatched route yields exactly one protocol
/// violation; otherwise request params/body, status and response body are
/// all checked.
pub fn validate_http_exchange(contract: &CodeContract, request: &HttpRequest, response: &HttpResponse) -> Vec<Violation> {
    let Some(ep) = contract.endpoint(request.method, &request.path) else {
        return contract.validate_request(request);
    };
    let mut out = contract.validate_request(request);
    out.extend(contract.validate_response(ep, response));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn contract() -> CodeContract {
        let error = Schema::Object {
            properties: vec![Property::required(
                "error",
                Schema::Object {
                    properties: vec![
                        Property::required("kind", Schema::String),
                        Property::required("message", Schema::String),
                        Property::optional("violations", Schema::Array { items: Box::new(Schema::Any) }),
                    ],
                },
            )],
        };
        CodeContract {
            name: "svc".into(),
            version: 1,
            definitions: [("error".to_string(), error)].into(),
            endpoints: vec![
                Endpoint {
                    method: Method::Get,
                    path: "/api/v1/anomalies".into(),
                    query: vec![
                        ParamSpec { name: "from".into(), ty: ParamType::Timestamp, required: false },
                        ParamSpec { name: "bbox".into(), ty: ParamType::Bbox, required: false },
                    ],
                    request_body: None,
                    responses: [
                        (
                            200,
                            Schema::Object {
                                properties: vec![Property::required(
                                    "items",
                                    Schema::Array { items: Box::new(Schema::Object { properties: vec![Property::required("id", Schema::String)] }) },
                                )],
                            },
                        ),
                        (400, Schema::Ref { name: "error".into() }),
                    ]
                    .into(),
                },
                Endpoint {
                    method: Method::Get,
                    path: "/api/v1/objects/{id}".into(),
                    query: vec![],
                    request_body: None,
                    responses: [(200, Schema::Any)].into(),
                },
            ],
        }
    }

    #[test]
    fn conforming_exchange() {
        let req = HttpRequest::get("/api/v1/anomalies?from=10&bbox=0,0,1,1");
        let resp = HttpResponse::new(200, json!({"items": [{"id": "a"}]}));
        assert!(validate_http_exchange(&contract(), &req, &resp).is_empty());
    }

    #[test]
    fn undocumented_response_field() {
        let req = HttpRequest::get("/api/v1/anomalies");
        let resp = HttpResponse::new(200, json!({"items": [{"id": "a", "secret": 1}]}));
        let v = validate_http_exchange(&contract(), &req, &resp);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::ExtraField);
        assert_eq!(v[0].location, "GET /api/v1/anomalies:response.items[0].secret");
    }

    #[test]
    fn non_timestamp_from() {
        // parse oracle: "yesterday".parse::<i64>() fails
        assert!("yesterday".parse::<i64>().is_err());
        let req = HttpRequest::get("/api/v1/anomalies?from=yesterday");
        let resp = HttpResponse::new(200, json!({"items": []}));
        let v = validate_http_exchange(&contract(), &req, &resp);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::TypeMismatch);
        assert!(v[0].location.ends_with("query.from"));
    }

    #[test]
    fn unmatched_path_is_single_protocol_violation() {
        let req = HttpRequest::get("/api/v2/whatever?x=1");
        let v = validate_http_exchange(&contract(), &req, &HttpResponse::new(500, json!(1)));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Protocol);
    }

    #[test]
    fn template_matching_and_params() {
        let c = contract();
        let ep = c.endpoint(Method::Get, "/api/v1/objects/v-17").unwrap();
        assert_eq!(ep.path_params("/api/v1/objects/v-17")["id"], "v-17");
        assert!(c.endpoint(Method::Get, "/api/v1/objects/").is_none());
        assert!(c.endpoint(Method::Post, "/api/v1/objects/x").is_none());
    }

    #[test]
    fn undeclared_status() {
        let req = HttpRequest::get("/api/v1/objects/x");
        let v = validate_http_exchange(&contract(), &req, &HttpResponse::new(418, json!({})));
        assert_eq!(v[0].location, "GET /api/v1/objects/{id}:status");
    }

    #[test]
    fn refs_must_resolve() {
        let mut c = contract();
        c.endpoints[1].responses.insert(404, Schema::Ref { name: "nope".into() });
        assert!(c.check_well_formed().is_err());
        let mut c = contract();
        c.endpoints.push(c.endpoints[0].clone());
        assert!(c.check_well_formed().is_err());
    }

    #[test]
    fn param_type_checks() {
        assert!(ParamType::Bbox.check("1,2,3").is_some());
        assert!(ParamType::Bbox.check("1,2,3,x").is_some());
        assert!(ParamType::Bbox.check("-1.5,2,3,4").is_none());
        let csv = ParamType::CsvEnum { values: vec!["sensor".into(), "crawler".into()] };
        assert!(csv.check("sensor,crawler").is_none());
        assert!(csv.check("sensor,radar").is_some());
        let lim = ParamType::Integer { min: Some(1), max: Some(10) };
        assert_eq!(lim.check("11").unwrap().0, ViolationKind::Bounds);
    }
}
