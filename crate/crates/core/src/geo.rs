//! Spherical geodesy for geofences, nearby ordering and the triangulation puzzle.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::LocationSpec;

/// Mean Earth radius used by every distance computation, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Triangulation inputs must lie closer together than this (meters).
pub const MAX_TRIANGULATION_SPREAD_M: f64 = 100_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("coordinate is not a finite number")]
    NotFinite,
    #[error("triangulation points are {0:.1} m apart (limit 100 km)")]
    SpreadTooLarge(f64),
}

impl GeoError {
    pub fn code(&self) -> &'static str {
        match self {
            GeoError::LatitudeOutOfRange(_) | GeoError::NotFinite => "INVALID_COORDINATE",
            GeoError::SpreadTooLarge(_) => "SPREAD_TOO_LARGE",
        }
    }
}

/// A point on the sphere in decimal degrees.
///
/// Latitude is checked on construction, longitude is wrapped into `[-180, 180)`.
/// At the poles longitude carries no information and is pinned to zero so that
/// coincident points compare equal.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub const ORIGIN: GeoPoint = GeoPoint { lat: 0.0, lon: 0.0 };
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = GeoError;

    fn try_from(raw: RawPoint) -> Result<Self, Self::Error> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint {
            lat: p.lat,
            lon: p.lon,
        }
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(GeoError::NotFinite);
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::LatitudeOutOfRange(lat));
        }
        let lon = if lat.abs() == 90.0 {
            0.0
        } else {
            normalize_lon(lon)
        };
        // -0.0 and 0.0 must serialize identically
        Ok(GeoPoint {
            lat: lat + 0.0,
            lon: lon + 0.0,
        })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

impl fmt::Debug for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lat, self.lon)
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}, {:.6}", self.lat, self.lon)
    }
}

fn normalize_lon(lon: f64) -> f64 {
    if (-180.0..180.0).contains(&lon) {
        lon
    } else {
        let wrapped = (lon + 180.0).rem_euclid(360.0) - 180.0;
        // rem_euclid can round up to exactly 360
        if wrapped >= 180.0 {
            wrapped - 360.0
        } else {
            wrapped
        }
    }
}

/// Great-circle distance in meters (haversine).
pub fn geo_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    if a == b {
        return 0.0;
    }
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Geofence membership; the boundary counts as inside.
pub fn within_range(p: GeoPoint, loc: &LocationSpec) -> bool {
    geo_distance(p, loc.center) <= loc.radius_m
}

/// Centroid of three points in the local equirectangular plane anchored at `p1`.
///
/// The projection scales longitude offsets by `cos(lat1)` and both axes by the
/// Earth radius; those factors cancel when mapping the mean back to degrees, so
/// the centroid is the mean of the (wrapped) angular offsets from `p1`.
pub fn triangulate(p1: GeoPoint, p2: GeoPoint, p3: GeoPoint) -> Result<GeoPoint, GeoError> {
    let spread = geo_distance(p1, p2)
        .max(geo_distance(p2, p3))
        .max(geo_distance(p1, p3));
    if spread >= MAX_TRIANGULATION_SPREAD_M {
        return Err(GeoError::SpreadTooLarge(spread));
    }
    let offset = |p: GeoPoint| (p.lat - p1.lat, normalize_lon(p.lon - p1.lon));
    let (dy2, dx2) = offset(p2);
    let (dy3, dx3) = offset(p3);
    GeoPoint::new(p1.lat + (dy2 + dy3) / 3.0, p1.lon + (dx2 + dx3) / 3.0)
}

/// True iff the centroid of `points` lies within `tol_m` meters of `target`.
pub fn check_triangulation(
    points: [GeoPoint; 3],
    target: GeoPoint,
    tol_m: f64,
) -> Result<bool, GeoError> {
    let centroid = triangulate(points[0], points[1], points[2])?;
    Ok(geo_distance(centroid, target) <= tol_m)
}
