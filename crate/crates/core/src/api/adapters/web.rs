//! Web adapter: maps transport-neutral HTTP exchanges onto the inbound
//! port. Every request is checked against the served contract and
//! recorded in telemetry, whatever its outcome.

use std::collections::BTreeSet;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::api::core::ports::*;
use crate::contract::{error_body, CodeContract, Exchange, HttpRequest, HttpResponse};
use crate::domain::{AreaOfInterest, Label};

pub type Clock = Arc<dyn Fn() -> i64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(crate::store::now_ts)
}

pub struct WebAdapter {
    api: Arc<dyn InvestigatorApi>,
    telemetry: Arc<dyn TelemetryPort>,
    contract: CodeContract,
    clock: Clock,
    captured: Option<Mutex<Vec<Exchange>>>,
}

fn error_response(e: &ApiError) -> HttpResponse {
    let violations = match e {
        ApiError::BadRequest { violations, .. } if !violations.is_empty() => Some(violations.as_slice()),
        _ => None,
    };
    HttpResponse::new(e.status(), error_body(e.kind(), &e.to_string(), violations))
}

fn ok<T: Serialize>(status: u16, value: &T) -> Result<HttpResponse, ApiError> {
    serde_json::to_value(value).map(|b| HttpResponse::new(status, b)).map_err(|e| ApiError::Internal(e.to_string()))
}

fn parse<T: FromStr>(req: &HttpRequest, name: &str) -> Result<Option<T>, ApiError> {
    req.query_param(name)
        .map(|raw| raw.parse::<T>().map_err(|_| ApiError::bad_request(format!("query parameter {name}: cannot parse `{raw}`"))))
        .transpose()
}

fn csv_set<T: FromStr + Ord>(req: &HttpRequest, name: &str) -> Result<Option<BTreeSet<T>>, ApiError> {
    req.query_param(name)
        .map(|raw| {
            raw.split(',')
                .map(|item| item.parse::<T>().map_err(|_| ApiError::bad_request(format!("query parameter {name}: unknown `{item}`"))))
                .collect()
        })
        .transpose()
}

/// `bbox`, `wrap`, `from` and `to` as an AOI; no bbox means the globe.
pub fn area_from_query(req: &HttpRequest) -> Result<AreaOfInterest, ApiError> {
    let mut aoi = match req.query_param("bbox") {
        None => AreaOfInterest::global(),
        Some(raw) => {
            let v: Vec<f64> = raw
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| ApiError::bad_request(format!("bbox `{raw}` is not minLat,minLon,maxLat,maxLon")))?;
            if v.len() != 4 {
                return Err(ApiError::bad_request(format!("bbox `{raw}` needs four numbers")));
            }
            AreaOfInterest::bbox(v[0], v[1], v[2], v[3])
        }
    };
    aoi.wraps_antimeridian = parse::<bool>(req, "wrap")?.unwrap_or(false);
    Ok(aoi.with_time(parse(req, "from")?, parse(req, "to")?))
}

fn body<T: DeserializeOwned>(req: &HttpRequest) -> Result<T, ApiError> {
    serde_json::from_value(req.body.clone().unwrap_or(Value::Null))
        .map_err(|e| ApiError::bad_request(format!("request body: {e}")))
}

fn bearer(req: &HttpRequest) -> Option<&str> {
    req.headers.get("authorization").and_then(|h| h.strip_prefix("Bearer ")).map(str::trim)
}

impl WebAdapter {
    pub fn new(api: Arc<dyn InvestigatorApi>, telemetry: Arc<dyn TelemetryPort>, contract: CodeContract, clock: Clock) -> Self {
        Self { api, telemetry, contract, clock, captured: None }
    }

    /// Keep every exchange for later contract checks.
    pub fn capturing(mut self) -> Self {
        self.captured = Some(Mutex::new(Vec::new()));
        self
    }

    pub fn captured(&self) -> Vec<Exchange> {
        self.captured.as_ref().map(|c| c.lock().unwrap().clone()).unwrap_or_default()
    }

    pub fn contract(&self) -> &CodeContract {
        &self.contract
    }

    pub fn handle(&self, req: &HttpRequest) -> HttpResponse {
        let started = Instant::now();
        let (endpoint, response) = match self.contract.endpoint(req.method, &req.path) {
            None => (format!("{} {}", req.method, req.path), self.reject(req)),
            Some(ep) => {
                let key = ep.key();
                let response = if self.contract.validate_request(req).is_empty() {
                    let params = ep.path_params(&req.path);
                    let id = params.get("id").map(String::as_str).unwrap_or("");
                    self.dispatch(&ep.path, id, req).unwrap_or_else(|e| error_response(&e))
                } else {
                    self.reject(req)
                };
                (key, response)
            }
        };
        self.finish(req, endpoint, started, response)
    }

    /// Answer a request whose body never made it into an [`HttpRequest`].
    pub fn unreadable(&self, req: &HttpRequest, message: &str) -> HttpResponse {
        let started = Instant::now();
        let endpoint = match self.contract.endpoint(req.method, &req.path) {
            Some(ep) => ep.key(),
            None => format!("{} {}", req.method, req.path),
        };
        let response = HttpResponse::new(400, error_body("bad_request", message, None));
        self.finish(req, endpoint, started, response)
    }

    fn finish(&self, req: &HttpRequest, endpoint: String, started: Instant, response: HttpResponse) -> HttpResponse {
        let latency_ms = started.elapsed().as_secs_f64() * 1000.0;
        self.telemetry.record((self.clock)(), &endpoint, latency_ms, response.status);
        if let Some(c) = &self.captured {
            c.lock().unwrap().push(Exchange { request: req.clone(), response: response.clone() });
        }
        response
    }

    fn reject(&self, req: &HttpRequest) -> HttpResponse {
        let violations = self.contract.validate_request(req);
        HttpResponse::new(
            400,
            error_body("contract_violation", "request does not conform to the contract", Some(&violations)),
        )
    }

    fn dispatch(&self, template: &str, id: &str, req: &HttpRequest) -> Result<HttpResponse, ApiError> {
        if template == "/api/v1/health" {
            return ok(200, &self.api.health());
        }
        self.api.authorize(bearer(req))?;
        match template {
            "/api/v1/geolocations" => {
                let query = GeoQuery {
                    aoi: area_from_query(req)?,
                    sources: csv_set(req, "sources")?,
                    types: csv_set(req, "types")?,
                    cursor: req.query_param("cursor").map(str::to_string),
                    limit: parse(req, "limit")?,
                };
                ok(200, &self.api.geolocations(&query)?)
            }
            "/api/v1/objects/{id}" => ok(200, &self.api.object(id)?),
            "/api/v1/objects/{id}/trajectory" => ok(200, &self.api.trajectory(id, parse(req, "from")?, parse(req, "to")?)?),
            "/api/v1/anomalies" => {
                let query = AnomalyQuery {
                    aoi: area_from_query(req)?,
                    cursor: req.query_param("cursor").map(str::to_string),
                    limit: parse(req, "limit")?,
                };
                ok(200, &self.api.anomalies(&query)?)
            }
            "/api/v1/anomalies/{id}/explanation" => ok(200, &self.api.explanation(id)?),
            "/api/v1/detect" => {
                let anomalies = self.api.detect(&body::<DetectRequest>(req)?)?;
                ok(200, &json!({ "anomalies": anomalies }))
            }
            "/api/v1/labels" => ok(201, &self.api.post_label(body::<Label>(req)?)?),
            other => Err(ApiError::Internal(format!("no handler for {other}"))),
        }
    }
}
