use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::code::CodeContract;
use super::http::{HttpRequest, HttpResponse};
use super::violation::Violation;
use super::ContractError;

/// Canned response for one endpoint, keyed by `METHOD /template`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CannedResponse {
    pub status: u16,
    pub body: Value,
}

/// Uniform error body used across the service and its mock.
pub fn error_body(kind: &str, message: &str, violations: Option<&[Violation]>) -> Value {
    let mut error = json!({ "kind": kind, "message": message });
    if let Some(v) = violations {
        error["violations"] = serde_json::to_value(v).unwrap_or(Value::Null);
    }
    json!({ "error": error })
}

/// Contract-driven fake of the API service. Conforming requests get the
/// canned response of their endpoint; anything else gets 400 with the
/// violations.
#[derive(Debug, Clone)]
pub struct MockResponder {
    contract: CodeContract,
    canned: BTreeMap<String, CannedResponse>,
}

impl MockResponder {
    pub fn new(contract: CodeContract, canned: BTreeMap<String, CannedResponse>) -> Result<Self, ContractError> {
        contract.check_well_formed()?;
        for (key, example) in &canned {
            let ep = contract
                .endpoint_by_key(key)
                .ok_or_else(|| ContractError::Malformed(format!("canned example for undeclared endpoint {key}")))?;
            let violations = contract.validate_response(ep, &HttpResponse::new(example.status, example.body.clone()));
            if !violations.is_empty() {
                return Err(ContractError::CannedExample { endpoint: key.clone(), violations });
            }
        }
        // Rejections are 400s, so every endpoint must accept the error body.
        let sample = error_body("contract_violation", "sample", Some(&[]));
        for ep in &contract.endpoints {
            let violations = contract.validate_response(ep, &HttpResponse::new(400, sample.clone()));
            if !violations.is_empty() {
                return Err(ContractError::CannedExample { endpoint: format!("{} (400)", ep.key()), violations });
            }
        }
        Ok(Self { contract, canned })
    }

    pub fn respond(&self, request: &HttpRequest) -> HttpResponse {
        let violations = self.contract.validate_request(request);
        if !violations.is_empty() {
            return HttpResponse::new(
                400,
                error_body("contract_violation", "request does not conform to the contract", Some(&violations)),
            );
        }
        let ep = self
            .contract
            .endpoint(request.method, &request.path)
            .expect("validated request routes to an endpoint");
        match self.canned.get(&ep.key()) {
            Some(c) => HttpResponse::new(c.status, c.body.clone()),
            None => HttpResponse::new(
                400,
                error_body("no_canned_example", &format!("mock has no example for {}", ep.key()), None),
            ),
        }
    }

    /// The responder as a plain function.
    pub fn into_fn(self) -> impl Fn(&HttpRequest) -> HttpResponse + Send + Sync {
        move |req| self.respond(req)
    }

    pub fn contract(&self) -> &CodeContract {
        &self.contract
    }
}

/// Build a responder closure directly.
pub fn mock_responder(
    contract: CodeContract,
    canned: BTreeMap<String, CannedResponse>,
) -> Result<impl Fn(&HttpRequest) -> HttpResponse + Send + Sync, ContractError> {
    Ok(MockResponder::new(contract, canned)?.into_fn())
}
