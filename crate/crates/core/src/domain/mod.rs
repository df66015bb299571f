//! Maritime domain model: entities, value objects and the pure geodesic and
//! kinematic functions every other module builds on.

mod aoi;
mod geo;
mod trajectory;
mod types;

pub use aoi::{filter_fixes, point_in_aoi, AreaOfInterest};
pub use geo::{bearing_deg, haversine_km, implied_speed_knots, LatLon, EARTH_RADIUS_KM, KM_PER_NM};
pub use trajectory::{assemble_trajectory, Trajectory};
pub use types::{
    Annotator, Anomaly, AnomalyKind, Explanation, ExplanationStep, GeoFix, Label, MarineObject,
    ObjectType, Source, TimeWindow, Verdict,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("{field} out of range: {value}")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("degenerate interval: t1={t1} is not before t2={t2}")]
    DegenerateInterval { t1: i64, t2: i64 },
    #[error("trajectory for {expected} contaminated by foreign ids: {}", .offending.join(", "))]
    Contaminated { expected: String, offending: Vec<String> },
    #[error("invalid area of interest: {0}")]
    InvalidAoi(String),
    #[error("invalid {field}: {message}")]
    Invalid { field: &'static str, message: String },
}
