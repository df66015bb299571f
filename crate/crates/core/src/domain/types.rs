use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::geo::LatLon;
use super::DomainError;

/// Where a position report came from. Declaration order is the tie-break
/// order used when assembling trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Provider,
    Sensor,
    Crawler,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectType {
    Vessel,
    Structure,
    Unidentified,
}

macro_rules! snake_enum_str {
    ($ty:ty, $($variant:ident => $name:literal),+ $(,)?) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$(<$ty>::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $(<$ty>::$variant => $name),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = DomainError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(<$ty>::$variant),)+
                    other => Err(DomainError::Invalid {
                        field: stringify!($ty),
                        message: format!("unknown value `{other}`"),
                    }),
                }
            }
        }
    };
}

snake_enum_str!(Source, Provider => "provider", Sensor => "sensor", Crawler => "crawler", Synthetic => "synthetic");
snake_enum_str!(ObjectType, Vessel => "vessel", Structure => "structure", Unidentified => "unidentified");
snake_enum_str!(
    AnomalyKind,
    ExcessiveSpeed => "excessive_speed",
    AisGap => "ais_gap",
    ImpossibleJump => "impossible_jump",
    ZoneViolation => "zone_violation",
    KinematicOutlier => "kinematic_outlier",
);
snake_enum_str!(Verdict, Anomalous => "anomalous", Normal => "normal");
snake_enum_str!(Annotator, Provider => "provider", Investigator => "investigator");

/// One timestamped position report for a marine object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoFix {
    pub object_id: String,
    pub lat: f64,
    pub lon: f64,
    /// UTC seconds since epoch; sub-second reports are truncated upstream.
    pub timestamp: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sog: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cog: Option<f64>,
    pub source: Source,
    pub object_type: ObjectType,
}

impl GeoFix {
    pub fn position(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.object_id.is_empty() {
            return Err(DomainError::Invalid { field: "object_id", message: "empty".into() });
        }
        self.position().validate()?;
        if self.timestamp <= 0 {
            return Err(DomainError::OutOfRange { field: "timestamp", value: self.timestamp as f64 });
        }
        if let Some(sog) = self.sog {
            if !(sog >= 0.0 && sog.is_finite()) {
                return Err(DomainError::OutOfRange { field: "sog", value: sog });
            }
        }
        if let Some(cog) = self.cog {
            if !(0.0..360.0).contains(&cog) {
                return Err(DomainError::OutOfRange { field: "cog", value: cog });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarineObject {
    pub object_id: String,
    pub object_type: ObjectType,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// Closed interval of UTC seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start_ts: i64,
    pub end_ts: i64,
}

impl TimeWindow {
    pub fn new(start_ts: i64, end_ts: i64) -> Result<Self, DomainError> {
        if start_ts > end_ts {
            return Err(DomainError::Invalid {
                field: "window",
                message: format!("start {start_ts} after end {end_ts}"),
            });
        }
        Ok(Self { start_ts, end_ts })
    }

    pub fn contains(&self, ts: i64) -> bool {
        self.start_ts <= ts && ts <= self.end_ts
    }

    pub fn overlaps(&self, other: &TimeWindow) -> bool {
        self.start_ts <= other.end_ts && other.start_ts <= self.end_ts
    }

    pub fn union(&self, other: &TimeWindow) -> TimeWindow {
        TimeWindow {
            start_ts: self.start_ts.min(other.start_ts),
            end_ts: self.end_ts.max(other.end_ts),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    ExcessiveSpeed,
    AisGap,
    ImpossibleJump,
    ZoneViolation,
    KinematicOutlier,
}

impl AnomalyKind {
    /// Kinds produced by the rule model.
    pub const RULE_KINDS: [AnomalyKind; 4] = [
        AnomalyKind::ExcessiveSpeed,
        AnomalyKind::AisGap,
        AnomalyKind::ImpossibleJump,
        AnomalyKind::ZoneViolation,
    ];
}

/// One evaluated rule or feature in a detection trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationStep {
    pub rule_or_feature: String,
    pub observed: f64,
    pub threshold_or_baseline: f64,
    pub contribution: f64,
    pub fired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub steps: Vec<ExplanationStep>,
    pub summary: String,
}

impl Explanation {
    pub fn has_fired_step(&self) -> bool {
        self.steps.iter().any(|s| s.fired)
    }

    pub fn contribution_sum(&self) -> f64 {
        self.steps.iter().map(|s| s.contribution).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anomaly {
    pub anomaly_id: String,
    pub object_id: String,
    pub kind: AnomalyKind,
    /// Normalized severity in [0, 1].
    pub severity: f64,
    /// Raw detector score; for kinematic outliers it equals the sum of the
    /// explanation contributions.
    pub score: f64,
    #[serde(flatten)]
    pub window: TimeWindow,
    #[serde(flatten)]
    pub location: LatLon,
    pub model_id: String,
    pub explanation: Explanation,
}

impl Anomaly {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.window.start_ts > self.window.end_ts {
            return Err(DomainError::Invalid { field: "window", message: "start after end".into() });
        }
        if !(0.0..=1.0).contains(&self.severity) {
            return Err(DomainError::OutOfRange { field: "severity", value: self.severity });
        }
        if !self.explanation.has_fired_step() {
            return Err(DomainError::Invalid {
                field: "explanation",
                message: "no fired step".into(),
            });
        }
        self.location.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Anomalous,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Annotator {
    Provider,
    Investigator,
}

/// Known verdict about an object over a time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_id: Option<String>,
    pub object_id: String,
    #[serde(flatten)]
    pub window: TimeWindow,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<AnomalyKind>,
    pub annotator: Annotator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Label {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.object_id.is_empty() {
            return Err(DomainError::Invalid { field: "object_id", message: "empty".into() });
        }
        if self.window.start_ts > self.window.end_ts {
            return Err(DomainError::Invalid {
                field: "window",
                message: format!("end_ts {} before start_ts {}", self.window.end_ts, self.window.start_ts),
            });
        }
        if self.verdict == Verdict::Anomalous && self.kind.is_none() {
            return Err(DomainError::Invalid {
                field: "kind",
                message: "anomalous verdict requires a kind".into(),
            });
        }
        Ok(())
    }
}
