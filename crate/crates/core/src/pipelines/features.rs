//! Kinematic quantities derived from consecutive fixes.

use std::ops::Range;

use crate::domain::{bearing_deg, haversine_km, GeoFix, KM_PER_NM};

pub const WINDOW_LEN: usize = 10;
pub const WINDOW_STRIDE: usize = 5;

/// Implied speed between two fixes, `None` when they share a timestamp.
pub fn pair_speed_kn(a: &GeoFix, b: &GeoFix) -> Option<f64> {
    let dt = b.timestamp - a.timestamp;
    if dt <= 0 {
        return None;
    }
    let km = haversine_km(a.position(), b.position()).ok()?;
    Some(km / (dt as f64 / 3600.0) / KM_PER_NM)
}

/// Absolute heading change at `b`, in degrees per minute of the b→c leg.
pub fn turn_rate_deg_per_min(a: &GeoFix, b: &GeoFix, c: &GeoFix) -> Option<f64> {
    let dt = c.timestamp - b.timestamp;
    if dt <= 0 || b.timestamp <= a.timestamp {
        return None;
    }
    let h1 = bearing_deg(a.position(), b.position());
    let h2 = bearing_deg(b.position(), c.position());
    let mut d = (h2 - h1).rem_euclid(360.0);
    if d > 180.0 {
        d = 360.0 - d;
    }
    Some(d / (dt as f64 / 60.0))
}

/// Per-fix features for fix `i` (i >= 1) of a time-ordered slice. Turn rate
/// needs two legs and is absent at `i == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointFeatures {
    pub implied_speed_kn: Option<f64>,
    pub turn_rate_deg_per_min: Option<f64>,
    pub reported_sog_kn: Option<f64>,
}

impl PointFeatures {
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "implied_speed_kn" => self.implied_speed_kn,
            "turn_rate_deg_per_min" => self.turn_rate_deg_per_min,
            "reported_sog_kn" => self.reported_sog_kn,
            _ => None,
        }
    }
}

pub const ML_FEATURES: [&str; 3] = ["implied_speed_kn", "turn_rate_deg_per_min", "reported_sog_kn"];

pub fn point_features(fixes: &[GeoFix], i: usize) -> PointFeatures {
    debug_assert!(i >= 1);
    PointFeatures {
        implied_speed_kn: pair_speed_kn(&fixes[i - 1], &fixes[i]),
        turn_rate_deg_per_min: if i >= 2 { turn_rate_deg_per_min(&fixes[i - 2], &fixes[i - 1], &fixes[i]) } else { None },
        reported_sog_kn: fixes[i].sog,
    }
}

/// Sliding windows of `WINDOW_LEN` fixes with stride `WINDOW_STRIDE`,
/// plus a tail window ending at the last fix. Shorter tracks (at least two
/// fixes) form a single window.
pub fn windows(n: usize) -> Vec<Range<usize>> {
    if n < 2 {
        return vec![];
    }
    if n <= WINDOW_LEN {
        return vec![0..n];
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + WINDOW_LEN <= n {
        out.push(start..start + WINDOW_LEN);
        start += WINDOW_STRIDE;
    }
    if out.last().is_some_and(|w| w.end < n) {
        out.push(n - WINDOW_LEN..n);
    }
    out
}

/// Median of the values, `None` for an empty input.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 })
}

/// Nearest-rank quantile: the ceil(q * N)-th smallest value (rank at least 1).
pub fn nearest_rank(values: &mut [f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    Some(values[rank - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ObjectType, Source};
    use proptest::prelude::*;

    fn fix(ts: i64, lat: f64, lon: f64) -> GeoFix {
        GeoFix {
            object_id: "v".into(),
            lat,
            lon,
            timestamp: ts,
            sog: None,
            cog: None,
            source: Source::Sensor,
            object_type: ObjectType::Vessel,
        }
    }

    #[test]
    fn window_layout() {
        assert!(windows(1).is_empty());
        assert_eq!(windows(4), vec![0..4]);
        assert_eq!(windows(10), vec![0..10]);
        assert_eq!(windows(20), vec![0..10, 5..15, 10..20]);
        assert_eq!(windows(22), vec![0..10, 5..15, 10..20, 12..22]);
    }

    #[test]
    fn right_angle_turn() {
        let (a, b, c) = (fix(0, 0.0, 0.0), fix(60, 0.0, 0.01), fix(120, 0.01, 0.01));
        let t = turn_rate_deg_per_min(&a, &b, &c).unwrap();
        assert!((t - 90.0).abs() < 1e-3, "{t}");
    }

    #[test]
    fn equal_timestamps_have_no_speed() {
        assert_eq!(pair_speed_kn(&fix(5, 0.0, 0.0), &fix(5, 0.0, 1.0)), None);
    }

    #[test]
    fn quantile_examples() {
        let mut v: Vec<f64> = (1..=1000).map(f64::from).collect();
        let t = nearest_rank(&mut v, 0.99).unwrap();
        assert_eq!(t, 990.0);
        assert_eq!(v.iter().filter(|&&x| x > t).count(), 10);
        assert_eq!(nearest_rank(&mut v, 1.0).unwrap(), 1000.0);
        assert_eq!(nearest_rank(&mut v, 0.0).unwrap(), 1.0);
        assert_eq!(median(&mut [3.0, 1.0, 2.0, 10.0]), Some(2.5));
    }

    proptest! {
        #[test]
        fn nearest_rank_bounds_exceedances(mut v in proptest::collection::vec(-1e6f64..1e6, 1..500), q in 0.0f64..=1.0) {
            let n = v.len();
            let t = nearest_rank(&mut v, q).unwrap();
            let above = v.iter().filter(|&&x| x > t).count();
            let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
            prop_assert!(above <= n - rank);
            prop_assert!(v.iter().filter(|&&x| x <= t).count() >= rank);
        }

        #[test]
        fn windows_cover_every_pair(n in 2usize..200) {
            let ws = windows(n);
            for i in 0..n - 1 {
                prop_assert!(ws.iter().any(|w| w.contains(&i) && w.contains(&(i + 1))));
            }
            prop_assert_eq!(ws.last().unwrap().end, n);
        }
    }
}
