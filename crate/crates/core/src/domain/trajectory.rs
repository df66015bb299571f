use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::types::GeoFix;
use super::DomainError;

/// Time-ordered fixes of a single object.
///
/// Timestamps are non-decreasing; equal timestamps only survive when the
/// fixes report different positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub object_id: String,
    pub fixes: Vec<GeoFix>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.fixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixes.is_empty()
    }
}

fn fix_order(a: &GeoFix, b: &GeoFix) -> Ordering {
    a.timestamp
        .cmp(&b.timestamp)
        .then(a.source.cmp(&b.source))
        .then(a.lat.total_cmp(&b.lat))
        .then(a.lon.total_cmp(&b.lon))
}

/// Sort, dedup on (timestamp, lat, lon) and check every fix belongs to `object_id`.
pub fn assemble_trajectory(fixes: Vec<GeoFix>, object_id: &str) -> Result<Trajectory, DomainError> {
    let offending: BTreeSet<&str> = fixes
        .iter()
        .filter(|f| f.object_id != object_id)
        .map(|f| f.object_id.as_str())
        .collect();
    if !offending.is_empty() {
        return Err(DomainError::Contaminated {
            expected: object_id.to_string(),
            offending: offending.into_iter().map(String::from).collect(),
        });
    }

    let mut fixes = fixes;
    fixes.sort_by(fix_order);
    // Sorting groups equal triples only when their sources match, so track
    // the triples already kept at the current timestamp.
    let mut kept: Vec<GeoFix> = Vec::with_capacity(fixes.len());
    let mut group_start = 0;
    for fix in fixes {
        if kept.last().is_some_and(|last| last.timestamp != fix.timestamp) {
            group_start = kept.len();
        }
        let duplicate = kept[group_start..]
            .iter()
            .any(|k| k.lat == fix.lat && k.lon == fix.lon);
        if !duplicate {
            kept.push(fix);
        }
    }
    Ok(Trajectory { object_id: object_id.to_string(), fixes: kept })
}
