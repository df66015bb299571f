use serde::{Deserialize, Serialize};

use super::types::GeoFix;
use super::DomainError;

/// Mean earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;
/// Kilometres per nautical mile.
pub const KM_PER_NM: f64 = 1.852;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    /// Latitude in [-90, 90], longitude in [-180, 180).
    pub fn validate(&self) -> Result<(), DomainError> {
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(DomainError::OutOfRange { field: "lat", value: self.lat });
        }
        if !(-180.0..180.0).contains(&self.lon) {
            return Err(DomainError::OutOfRange { field: "lon", value: self.lon });
        }
        Ok(())
    }
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn haversine_km(a: LatLon, b: LatLon) -> Result<f64, DomainError> {
    a.validate()?;
    b.validate()?;
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin())
}

/// Speed in knots implied by moving between two fixes.
pub fn implied_speed_knots(f1: &GeoFix, f2: &GeoFix) -> Result<f64, DomainError> {
    if f1.timestamp >= f2.timestamp {
        return Err(DomainError::DegenerateInterval { t1: f1.timestamp, t2: f2.timestamp });
    }
    let km = haversine_km(f1.position(), f2.position())?;
    let hours = (f2.timestamp - f1.timestamp) as f64 / 3600.0;
    Ok(km / hours / KM_PER_NM)
}

/// Initial bearing from `a` to `b` in degrees, [0, 360).
pub fn bearing_deg(a: LatLon, b: LatLon) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlambda = (b.lon - a.lon).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    let deg = y.atan2(x).to_degrees();
    let wrapped = deg.rem_euclid(360.0);
    if wrapped >= 360.0 {
        0.0
    } else {
        wrapped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ObjectType, Source};
    use proptest::prelude::*;

    /// Independent great-circle oracle: angle between unit vectors.
    fn vector_oracle_km(a: LatLon, b: LatLon) -> f64 {
        let unit = |p: LatLon| {
            let (phi, lambda) = (p.lat.to_radians(), p.lon.to_radians());
            [phi.cos() * lambda.cos(), phi.cos() * lambda.sin(), phi.sin()]
        };
        let (u, v) = (unit(a), unit(b));
        let cross = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let norm = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
        let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
        norm.atan2(dot) * EARTH_RADIUS_KM
    }

    fn fix_at(lat: f64, lon: f64, ts: i64) -> GeoFix {
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
    fn one_degree_of_longitude_on_equator() {
        let d = haversine_km(LatLon::new(0.0, 0.0), LatLon::new(0.0, 1.0)).unwrap();
        // arc = (pi/180) * 6371.0088
        assert!((d - 111.195).abs() < 1e-3, "{d}");
        assert!((d - std::f64::consts::PI / 180.0 * EARTH_RADIUS_KM).abs() < 1e-9);
        assert_eq!(haversine_km(LatLon::new(0.0, 0.0), LatLon::new(0.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn rejects_out_of_range_naming_field() {
        let err = haversine_km(LatLon::new(91.0, 0.0), LatLon::new(0.0, 0.0)).unwrap_err();
        assert_eq!(err, DomainError::OutOfRange { field: "lat", value: 91.0 });
        let err = haversine_km(LatLon::new(0.0, 0.0), LatLon::new(0.0, -180.5)).unwrap_err();
        assert_eq!(err, DomainError::OutOfRange { field: "lon", value: -180.5 });
    }

    #[test]
    fn implied_speed_examples() {
        let a = fix_at(0.0, 0.0, 1000);
        let b = fix_at(0.0, 1.0, 1000 + 3600);
        let kn = implied_speed_knots(&a, &b).unwrap();
        // 111.195 / 1.852
        assert!((kn - 60.04).abs() < 0.01, "{kn}");
        let c = fix_at(0.0, 0.0, 5000);
        assert_eq!(implied_speed_knots(&a, &c).unwrap(), 0.0);
        assert!(matches!(
            implied_speed_knots(&a, &a),
            Err(DomainError::DegenerateInterval { .. })
        ));
    }

    #[test]
    fn bearings() {
        let o = LatLon::new(0.0, 0.0);
        assert!((bearing_deg(o, LatLon::new(1.0, 0.0)) - 0.0).abs() < 1e-9);
        assert!((bearing_deg(o, LatLon::new(0.0, 1.0)) - 90.0).abs() < 1e-9);
        assert!((bearing_deg(o, LatLon::new(-1.0, 0.0)) - 180.0).abs() < 1e-9);
        assert!((bearing_deg(o, LatLon::new(0.0, -1.0)) - 270.0).abs() < 1e-9);
    }

    fn point() -> impl Strategy<Value = LatLon> {
        (-90.0f64..=90.0, -180.0f64..180.0).prop_map(|(lat, lon)| LatLon::new(lat, lon))
    }

    proptest! {
        #[test]
        fn symmetric_and_matches_oracle(a in point(), b in point()) {
            let d = haversine_km(a, b).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d, haversine_km(b, a).unwrap());
            prop_assert!((d - vector_oracle_km(a, b)).abs() < 1e-3);
        }

        #[test]
        fn triangle_inequality(a in point(), b in point(), c in point()) {
            let ab = haversine_km(a, b).unwrap();
            let bc = haversine_km(b, c).unwrap();
            let ac = haversine_km(a, c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn zero_iff_coincident(a in point(), dlat in -1e-6f64..1e-6, dlon in -1e-6f64..1e-6) {
            prop_assert_eq!(haversine_km(a, a).unwrap(), 0.0);
            let b = LatLon::new((a.lat + dlat).clamp(-90.0, 90.0), a.lon + dlon);
            prop_assume!(b.validate().is_ok());
            prop_assume!((b.lat - a.lat).abs() > 1e-12 || (b.lon - a.lon).abs() > 1e-12);
            prop_assume!(a.lat.abs() < 89.9);
            prop_assert!(haversine_km(a, b).unwrap() > 0.0);
        }
    }
}
