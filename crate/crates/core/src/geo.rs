//! Point distances and circular coverage-area geometry.
//!
//! Point-to-point distances use the haversine formula on a sphere. Area
//! computations project both circles onto a local equirectangular plane
//! centred on the midpoint of the two centres and then use planar
//! circle/circle lens geometry.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Largest latitude separation, in degrees, for which two circles may be
/// compared on a shared local plane.
pub const MAX_PROJECTION_LAT_SPAN_DEG: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("radius {0} must be finite and strictly positive")]
    Radius(f64),
    #[error("circle centres {0:.4} degrees of latitude apart exceed the local projection limit of {MAX_PROJECTION_LAT_SPAN_DEG} degrees")]
    ProjectionSpan(f64),
}

/// A WGS-84-style coordinate in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::Latitude(lat));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::Longitude(lon));
        }
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// Circular coverage area: a centroid and a radius in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    center: GeoPoint,
    radius: f64,
}

impl Circle {
    pub fn new(center: GeoPoint, radius: f64) -> Result<Self, GeoError> {
        if !radius.is_finite() || radius <= 0.0 {
            return Err(GeoError::Radius(radius));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> GeoPoint {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }
}

/// Haversine distance in meters.
pub fn great_circle_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();

    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Initial great-circle bearing from `a` to `b`, degrees clockwise from north.
pub fn initial_bearing(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    y.atan2(x).to_degrees().rem_euclid(360.0)
}

/// Point reached by travelling `distance` meters from `start` along the great
/// circle with the given initial bearing.
pub fn destination_point(start: GeoPoint, bearing_deg: f64, distance: f64) -> GeoPoint {
    let delta = distance / EARTH_RADIUS_M;
    let theta = bearing_deg.to_radians();
    let phi1 = start.lat.to_radians();
    let lambda1 = start.lon.to_radians();

    let sin_phi2 = phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos();
    let phi2 = sin_phi2.clamp(-1.0, 1.0).asin();
    let y = theta.sin() * delta.sin() * phi1.cos();
    let x = delta.cos() - phi1.sin() * sin_phi2;
    let lambda2 = lambda1 + y.atan2(x);

    let lon = (lambda2.to_degrees() + 540.0).rem_euclid(360.0) - 180.0;
    GeoPoint {
        lat: phi2.to_degrees().clamp(-90.0, 90.0),
        lon,
    }
}

/// Longitude difference `to - from` wrapped into [-180, 180).
fn lon_delta(from: f64, to: f64) -> f64 {
    let d = to - from;
    if d >= 180.0 {
        d - 360.0
    } else if d < -180.0 {
        d + 360.0
    } else {
        d
    }
}

/// Equirectangular tangent plane about an origin. `x` points east, `y`
/// north, both in meters.
#[derive(Debug, Clone, Copy)]
pub struct LocalFrame {
    origin: GeoPoint,
    cos_lat: f64,
}

impl LocalFrame {
    pub fn new(origin: GeoPoint) -> Self {
        Self {
            origin,
            cos_lat: origin.lat.to_radians().cos(),
        }
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn to_local(&self, p: GeoPoint) -> (f64, f64) {
        let x = EARTH_RADIUS_M * lon_delta(self.origin.lon, p.lon).to_radians() * self.cos_lat;
        let y = EARTH_RADIUS_M * (p.lat - self.origin.lat).to_radians();
        (x, y)
    }

    /// Inverse of [`LocalFrame::to_local`]. Latitude is clamped to the valid
    /// range and longitude wrapped.
    pub fn to_geo(&self, x: f64, y: f64) -> GeoPoint {
        let lat = (self.origin.lat + (y / EARTH_RADIUS_M).to_degrees()).clamp(-90.0, 90.0);
        let mut lon = self.origin.lon + (x / (EARTH_RADIUS_M * self.cos_lat)).to_degrees();
        if lon > 180.0 {
            lon -= 360.0;
        } else if lon < -180.0 {
            lon += 360.0;
        }
        GeoPoint { lat, lon }
    }
}

/// Planar east/north offset from `a` to `b` in the frame centred on their
/// midpoint.
pub fn planar_offset(a: GeoPoint, b: GeoPoint) -> Result<(f64, f64), GeoError> {
    let span = (a.lat - b.lat).abs();
    if span > MAX_PROJECTION_LAT_SPAN_DEG {
        return Err(GeoError::ProjectionSpan(span));
    }
    let mid_lat = (a.lat + b.lat) / 2.0;
    let cos_mid = mid_lat.to_radians().cos();
    let dx = EARTH_RADIUS_M * lon_delta(a.lon, b.lon).to_radians() * cos_mid;
    let dy = EARTH_RADIUS_M * (b.lat - a.lat).to_radians();
    Ok((dx, dy))
}

/// Planar centre distance used by all area operations.
pub fn planar_distance(a: GeoPoint, b: GeoPoint) -> Result<f64, GeoError> {
    let (dx, dy) = planar_offset(a, b)?;
    Ok(dx.hypot(dy))
}

/// Area of the intersection of two planar discs with radii `r1`, `r2` whose
/// centres are `d` apart.
///
/// The result is independent of the order of `r1` and `r2` down to the bit.
pub fn lens_area(r1: f64, r2: f64, d: f64) -> f64 {
    let (small, large) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    let cap = PI * small * small;

    if d >= small + large {
        return 0.0;
    }
    if d <= large - small {
        return cap;
    }

    let alpha = ((d * d + small * small - large * large) / (2.0 * d * small)).clamp(-1.0, 1.0);
    let beta = ((d * d + large * large - small * small) / (2.0 * d * large)).clamp(-1.0, 1.0);
    let kite =
        (-d + small + large) * (d + small - large) * (d - small + large) * (d + small + large);

    let area =
        small * small * alpha.acos() + large * large * beta.acos() - 0.5 * kite.max(0.0).sqrt();
    area.clamp(0.0, cap)
}

pub fn circle_intersection_area(a: &Circle, b: &Circle) -> Result<f64, GeoError> {
    let d = planar_distance(a.center, b.center)?;
    Ok(lens_area(a.radius, b.radius, d))
}

pub fn union_area(a: &Circle, b: &Circle) -> Result<f64, GeoError> {
    let inter = circle_intersection_area(a, b)?;
    Ok(a.area() + b.area() - inter)
}

/// Intersection over union of two coverage circles.
pub fn iou(a: &Circle, b: &Circle) -> Result<f64, GeoError> {
    let inter = circle_intersection_area(a, b)?;
    let union = a.area() + b.area() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

/// Share of `covered`'s area that lies inside `by`.
pub fn coverage_fraction(covered: &Circle, by: &Circle) -> Result<f64, GeoError> {
    let inter = circle_intersection_area(covered, by)?;
    Ok((inter / covered.area()).clamp(0.0, 1.0))
}
