use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::types::{GeoFix, ObjectType, Source};
use super::DomainError;

/// Lat/lon box with an optional time range. Bounds are inclusive.
///
/// A box whose longitude range crosses the antimeridian must say so with
/// `wraps_antimeridian`; then `min_lon > max_lon` is allowed and membership
/// is `lon >= min_lon || lon <= max_lon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaOfInterest {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_ts: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_ts: Option<i64>,
    #[serde(default)]
    pub wraps_antimeridian: bool,
}

impl AreaOfInterest {
    pub fn global() -> Self {
        Self {
            min_lat: -90.0,
            max_lat: 90.0,
            min_lon: -180.0,
            max_lon: 180.0,
            from_ts: None,
            to_ts: None,
            wraps_antimeridian: false,
        }
    }

    pub fn bbox(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Self {
        Self { min_lat, max_lat, min_lon, max_lon, ..Self::global() }
    }

    pub fn with_time(mut self, from_ts: Option<i64>, to_ts: Option<i64>) -> Self {
        self.from_ts = from_ts;
        self.to_ts = to_ts;
        self
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        for (name, v) in [("min_lat", self.min_lat), ("max_lat", self.max_lat)] {
            if !(-90.0..=90.0).contains(&v) {
                return Err(DomainError::InvalidAoi(format!("{name} {v} outside [-90, 90]")));
            }
        }
        for (name, v) in [("min_lon", self.min_lon), ("max_lon", self.max_lon)] {
            if !(-180.0..=180.0).contains(&v) {
                return Err(DomainError::InvalidAoi(format!("{name} {v} outside [-180, 180]")));
            }
        }
        if self.min_lat > self.max_lat {
            return Err(DomainError::InvalidAoi(format!(
                "min_lat {} greater than max_lat {}",
                self.min_lat, self.max_lat
            )));
        }
        if !self.wraps_antimeridian && self.min_lon > self.max_lon {
            return Err(DomainError::InvalidAoi(format!(
                "min_lon {} greater than max_lon {} without antimeridian wrap",
                self.min_lon, self.max_lon
            )));
        }
        if let (Some(from), Some(to)) = (self.from_ts, self.to_ts) {
            if from > to {
                return Err(DomainError::InvalidAoi(format!("from {from} after to {to}")));
            }
        }
        Ok(())
    }

    pub fn contains_position(&self, lat: f64, lon: f64) -> bool {
        if lat < self.min_lat || lat > self.max_lat {
            return false;
        }
        if self.wraps_antimeridian {
            lon >= self.min_lon || lon <= self.max_lon
        } else {
            self.min_lon <= lon && lon <= self.max_lon
        }
    }

    pub fn contains_time(&self, ts: i64) -> bool {
        self.from_ts.is_none_or(|from| ts >= from) && self.to_ts.is_none_or(|to| ts <= to)
    }

    /// Whether a closed time window intersects the AOI time range.
    pub fn intersects_window(&self, start_ts: i64, end_ts: i64) -> bool {
        self.from_ts.is_none_or(|from| end_ts >= from) && self.to_ts.is_none_or(|to| start_ts <= to)
    }
}

pub fn point_in_aoi(lat: f64, lon: f64, ts: i64, aoi: &AreaOfInterest) -> bool {
    aoi.contains_position(lat, lon) && aoi.contains_time(ts)
}

/// Fixes inside the AOI and matching the optional source/type sets, in input order.
pub fn filter_fixes(
    fixes: &[GeoFix],
    aoi: &AreaOfInterest,
    sources: Option<&BTreeSet<Source>>,
    types: Option<&BTreeSet<ObjectType>>,
) -> Vec<GeoFix> {
    fixes
        .iter()
        .filter(|f| point_in_aoi(f.lat, f.lon, f.timestamp, aoi))
        .filter(|f| sources.is_none_or(|s| s.contains(&f.source)))
        .filter(|f| types.is_none_or(|t| t.contains(&f.object_type)))
        .cloned()
        .collect()
}
