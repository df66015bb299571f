//! Data augmentation: coordinate jitter and regular-grid resampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::PipelineError;
use crate::domain::GeoFix;
use crate::ingestion::normalize_lon;
use crate::store::{DataStore, SnapshotManifest};

/// Jitter draws are truncated at this many standard deviations per axis.
pub const JITTER_TRUNCATION: f64 = 4.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentOps {
    pub jitter_sigma_deg: f64,
    pub resample_period_s: Option<i64>,
}

impl AugmentOps {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.jitter_sigma_deg >= 0.0 && self.jitter_sigma_deg.is_finite()) {
            return Err(PipelineError::Config(format!("jitter_sigma_deg must be >= 0, got {}", self.jitter_sigma_deg)));
        }
        if self.resample_period_s.is_some_and(|p| p < 1) {
            return Err(PipelineError::Config("resample_period_s must be at least 1".into()));
        }
        Ok(())
    }
}

fn lerp_lon(a: f64, b: f64, t: f64) -> f64 {
    let mut d = b - a;
    if d > 180.0 {
        d -= 360.0;
    } else if d < -180.0 {
        d += 360.0;
    }
    normalize_lon(a + d * t)
}

/// Linear interpolation of one object's time-ordered fixes onto
/// `t0, t0 + period, ...` up to the last timestamp.
pub fn resample_track(fixes: &[GeoFix], period_s: i64) -> Vec<GeoFix> {
    let (Some(first), Some(last)) = (fixes.first(), fixes.last()) else {
        return vec![];
    };
    let mut out = Vec::new();
    let mut j = 0;
    let mut t = first.timestamp;
    while t <= last.timestamp {
        while j + 1 < fixes.len() && fixes[j + 1].timestamp <= t {
            j += 1;
        }
        let a = &fixes[j];
        let mut f = a.clone();
        f.timestamp = t;
        if let Some(b) = fixes.get(j + 1).filter(|b| b.timestamp > a.timestamp && t > a.timestamp) {
            let w = (t - a.timestamp) as f64 / (b.timestamp - a.timestamp) as f64;
            f.lat = a.lat + (b.lat - a.lat) * w;
            f.lon = lerp_lon(a.lon, b.lon, w);
            f.sog = match (a.sog, b.sog) {
                (Some(x), Some(y)) => Some(x + (y - x) * w),
                _ => a.sog,
            };
        }
        out.push(f);
        t += period_s;
    }
    out
}

/// Add truncated Gaussian noise to every coordinate. A zero sigma leaves
/// the fixes untouched and draws nothing.
pub fn jitter(fixes: &mut [GeoFix], sigma_deg: f64, rng: &mut ChaCha8Rng) {
    if sigma_deg == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma_deg).expect("finite sigma");
    let mut draw = || loop {
        let x: f64 = normal.sample(rng);
        if x.abs() <= JITTER_TRUNCATION * sigma_deg {
            return x;
        }
    };
    for f in fixes {
        f.lat = (f.lat + draw()).clamp(-90.0, 90.0);
        f.lon = normalize_lon(f.lon + draw());
    }
}

/// Apply `ops` per object (resample, then jitter) preserving object order.
pub fn apply_ops(fixes: &[GeoFix], ops: &AugmentOps, seed: u64) -> Vec<GeoFix> {
    let mut out: Vec<GeoFix> = match ops.resample_period_s {
        Some(period) => {
            let mut grouped: Vec<Vec<GeoFix>> = Vec::new();
            for f in fixes {
                match grouped.last_mut() {
                    Some(g) if g[0].object_id == f.object_id => g.push(f.clone()),
                    _ => grouped.push(vec![f.clone()]),
                }
            }
            grouped
                .into_iter()
                .flat_map(|mut g| {
                    g.sort_by_key(|f| f.timestamp);
                    resample_track(&g, period)
                })
                .collect()
        }
        None => fixes.to_vec(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    jitter(&mut out, ops.jitter_sigma_deg, &mut rng);
    out
}

/// Derive a new snapshot from `snapshot_id`; labels are carried over and
/// the source, ops and seed are recorded as provenance.
pub fn augment(store: &DataStore, snapshot_id: &str, ops: &AugmentOps, seed: u64) -> Result<SnapshotManifest, PipelineError> {
    ops.validate()?;
    let source = store.read(snapshot_id)?;
    let fixes = apply_ops(&source.fixes, ops, seed);
    let params = json!({ "source": snapshot_id, "ops": ops });
    Ok(store.write("augment", Some(seed), params, Some(snapshot_id), &fixes, &source.labels)?)
}
