use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    MissingField,
    TypeMismatch,
    Bounds,
    ExtraField,
    Protocol,
}

impl ViolationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationKind::MissingField => "missing_field",
            ViolationKind::TypeMismatch => "type_mismatch",
            ViolationKind::Bounds => "bounds",
            ViolationKind::ExtraField => "extra_field",
            ViolationKind::Protocol => "protocol",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single contract breach.
///
/// `location` is a dotted path such as `record[3].lat`,
/// `manifest.input_features` or `GET /api/v1/anomalies:query.from`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub contract: String,
    pub location: String,
    pub kind: ViolationKind,
    pub message: String,
}

impl Violation {
    pub fn new(
        contract: impl Into<String>,
        location: impl Into<String>,
        kind: ViolationKind,
        message: impl Into<String>,
    ) -> Self {
        Self { contract: contract.into(), location: location.into(), kind, message: message.into() }
    }

    /// `KIND<TAB>LOCATION<TAB>MESSAGE`
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}", self.kind, self.location, self.message)
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.location = if self.location.is_empty() {
            prefix.to_string()
        } else {
            format!("{prefix}.{}", self.location)
        };
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {} at {}: {}", self.contract, self.kind, self.location, self.message)
    }
}

/// Render a contract reference as `name@version`.
pub(crate) fn contract_ref(name: &str, version: u32) -> String {
    format!("{name}@{version}")
}
