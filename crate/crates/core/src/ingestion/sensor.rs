//! Deterministic physical-sensor stand-in: waypoint-following vessels
//! reporting once a minute with Gaussian position noise.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::domain::{bearing_deg, GeoFix, LatLon, MarineObject, ObjectType, Source, EARTH_RADIUS_KM, KM_PER_NM};

const METERS_PER_DEG_LAT: f64 = EARTH_RADIUS_KM * 1000.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub start_ts: i64,
    pub interval_s: i64,
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
    pub cruise_min_kn: f64,
    pub cruise_max_kn: f64,
    /// Upper bound on true vessel speed.
    pub max_speed_kn: f64,
    /// Per-axis standard deviation of the position noise.
    pub noise_sigma_m: f64,
    pub sog_noise_kn: f64,
    pub leg_min_s: i64,
    pub leg_max_s: i64,
    pub max_turn_deg: f64,
    pub source: Source,
    pub id_prefix: String,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            start_ts: 1_700_000_000,
            interval_s: 60,
            min_lat: 34.0,
            max_lat: 44.0,
            min_lon: 2.0,
            max_lon: 28.0,
            cruise_min_kn: 8.0,
            cruise_max_kn: 18.0,
            max_speed_kn: 18.0,
            noise_sigma_m: 10.0,
            sog_noise_kn: 0.3,
            leg_min_s: 3_600,
            leg_max_s: 4 * 3_600,
            max_turn_deg: 60.0,
            source: Source::Sensor,
            id_prefix: "sim".into(),
        }
    }
}

impl SimConfig {
    /// Largest implied speed two consecutive noisy fixes can show: true
    /// speed plus both positions displaced by the 3-sigma truncation radius.
    pub fn implied_speed_allowance_kn(&self) -> f64 {
        self.max_speed_kn + 6.0 * self.noise_sigma_m / self.interval_s as f64 * 3600.0 / (KM_PER_NM * 1000.0)
    }

    fn check(&self, n_objects: usize, duration_s: i64) -> Result<(), IngestError> {
        let bad = |m: &str| Err(IngestError::Config(m.to_string()));
        if n_objects == 0 {
            return bad("n_objects must be at least 1");
        }
        if duration_s < 0 {
            return bad("duration_s must be non-negative");
        }
        if self.interval_s < 1 {
            return bad("interval_s must be at least 1");
        }
        if !(self.cruise_min_kn > 0.0 && self.cruise_min_kn <= self.cruise_max_kn && self.cruise_max_kn <= self.max_speed_kn) {
            return bad("cruise speeds must satisfy 0 < min <= max <= max_speed_kn");
        }
        if !(self.noise_sigma_m >= 0.0 && self.sog_noise_kn >= 0.0) {
            return bad("noise must be non-negative");
        }
        if !(-80.0..=80.0).contains(&self.min_lat) || !(-80.0..=80.0).contains(&self.max_lat) || self.min_lat >= self.max_lat {
            return bad("latitude region must be ordered and within [-80, 80]");
        }
        if !(-180.0..180.0).contains(&self.min_lon) || !(-180.0..180.0).contains(&self.max_lon) || self.min_lon >= self.max_lon {
            return bad("longitude region must be ordered and within [-180, 180)");
        }
        if self.leg_min_s < self.interval_s || self.leg_min_s > self.leg_max_s {
            return bad("leg durations must satisfy interval_s <= leg_min_s <= leg_max_s");
        }
        Ok(())
    }
}

/// A simulated track with the noise-free kinematics kept alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrack {
    pub object: MarineObject,
    pub fixes: Vec<GeoFix>,
    /// True speed in knots over the interval ending at each fix (0 for the first).
    pub true_speed_kn: Vec<f64>,
}

/// Great-circle destination from `p` after `dist_km` on `bearing` degrees.
pub fn destination(p: LatLon, bearing: f64, dist_km: f64) -> LatLon {
    let (lat1, lon1) = (p.lat.to_radians(), p.lon.to_radians());
    let d = dist_km / EARTH_RADIUS_KM;
    let b = bearing.to_radians();
    let lat2 = (lat1.sin() * d.cos() + lat1.cos() * d.sin() * b.cos()).asin();
    let lon2 = lon1 + (b.sin() * d.sin() * lat1.cos()).atan2(d.cos() - lat1.sin() * lat2.sin());
    LatLon::new(lat2.to_degrees(), normalize_lon(lon2.to_degrees()))
}

pub fn normalize_lon(lon: f64) -> f64 {
    let l = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if l >= 180.0 {
        -180.0
    } else {
        l
    }
}

fn offset_m(p: LatLon, east_m: f64, north_m: f64) -> LatLon {
    let lat = (p.lat + north_m / METERS_PER_DEG_LAT).clamp(-90.0, 90.0);
    let lon = p.lon + east_m / (METERS_PER_DEG_LAT * p.lat.to_radians().cos().max(1e-6));
    LatLon::new(lat, normalize_lon(lon))
}

/// Radially truncated isotropic Gaussian offset.
fn noise(rng: &mut ChaCha8Rng, sigma: f64) -> (f64, f64) {
    if sigma == 0.0 {
        return (0.0, 0.0);
    }
    let n = Normal::new(0.0, sigma).expect("finite sigma");
    loop {
        let (e, no) = (n.sample(rng), n.sample(rng));
        if e.hypot(no) <= 3.0 * sigma {
            return (e, no);
        }
    }
}

pub fn simulate_tracks(
    config: &SimConfig,
    rng: &mut ChaCha8Rng,
    n_objects: usize,
    duration_s: i64,
) -> Result<Vec<SimTrack>, IngestError> {
    config.check(n_objects, duration_s)?;
    let steps = duration_s / config.interval_s;
    let mut tracks = Vec::with_capacity(n_objects);
    for i in 0..n_objects {
        let object_id = format!("{}-{:03}", config.id_prefix, i);
        let mut pos = LatLon::new(
            rng.gen_range(config.min_lat..config.max_lat),
            rng.gen_range(config.min_lon..config.max_lon),
        );
        let mut heading: f64 = rng.gen_range(0.0..360.0);
        let mut speed = rng.gen_range(config.cruise_min_kn..=config.cruise_max_kn);
        let mut leg_left = rng.gen_range(config.leg_min_s..=config.leg_max_s);
        let mut fixes = Vec::with_capacity(steps as usize + 1);
        let mut true_speed = Vec::with_capacity(steps as usize + 1);
        let sog_noise = Normal::new(0.0, config.sog_noise_kn.max(f64::MIN_POSITIVE)).expect("finite sigma");

        for k in 0..=steps {
            let (reported_heading, reported_speed) = (heading, speed);
            if k > 0 {
                pos = destination(pos, heading, speed * KM_PER_NM * config.interval_s as f64 / 3600.0);
                // Steer back toward the region when drifting out of it.
                if !(config.min_lat..=config.max_lat).contains(&pos.lat) || !(config.min_lon..=config.max_lon).contains(&pos.lon) {
                    let center = LatLon::new((config.min_lat + config.max_lat) / 2.0, (config.min_lon + config.max_lon) / 2.0);
                    heading = bearing_deg(pos, center);
                    leg_left = config.leg_min_s;
                }
                true_speed.push(speed);
                leg_left -= config.interval_s;
                if leg_left <= 0 {
                    heading = (heading + rng.gen_range(-config.max_turn_deg..=config.max_turn_deg)).rem_euclid(360.0);
                    speed = rng.gen_range(config.cruise_min_kn..=config.cruise_max_kn);
                    leg_left = rng.gen_range(config.leg_min_s..=config.leg_max_s);
                }
            } else {
                true_speed.push(0.0);
            }
            let (e, n) = noise(rng, config.noise_sigma_m);
            let observed = offset_m(pos, e, n);
            let sog = if config.sog_noise_kn > 0.0 {
                (reported_speed + sog_noise.sample(rng)).max(0.0)
            } else {
                reported_speed
            };
            fixes.push(GeoFix {
                object_id: object_id.clone(),
                lat: observed.lat,
                lon: observed.lon,
                timestamp: config.start_ts + k * config.interval_s,
                sog: Some(round_to(sog, 1e-2)),
                cog: Some(round_to(reported_heading, 1e-2).rem_euclid(360.0)),
                source: config.source,
                object_type: ObjectType::Vessel,
            });
        }
        let object = MarineObject {
            object_id,
            object_type: ObjectType::Vessel,
            metadata: BTreeMap::from([
                ("name".to_string(), format!("Vessel {}", i + 1)),
                ("callsign".to_string(), format!("SIM{:04}", i)),
            ]),
        };
        tracks.push(SimTrack { object, fixes, true_speed_kn: true_speed });
    }
    Ok(tracks)
}

fn round_to(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

/// Simulated sensor batch for `n_objects` vessels over `duration_s`
/// seconds: `duration_s / interval + 1` fixes per vessel, in object order.
pub fn simulate_sensor_batch(config: &SimConfig, seed: u64, n_objects: usize, duration_s: i64) -> Result<Vec<GeoFix>, IngestError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(simulate_tracks(config, &mut rng, n_objects, duration_s)?.into_iter().flat_map(|t| t.fixes).collect())
}
