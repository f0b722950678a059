//! Planar geometry kernel.
//!
//! Positions are projected into a local east/north frame in meters with an
//! equirectangular projection. Headings are degrees counterclockwise from the
//! +x (east) axis, in `[0, 360)`.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidParameter(format!(
                "coordinate out of range: lat {lat}, lon {lon}"
            )));
        }
        Ok(GeoPoint { lat, lon })
    }
}

/// Meters east (`x`) and north (`y`) of a projection origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        PlanarPoint { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: PlanarPoint) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn distance(self, other: PlanarPoint) -> f64 {
        (self - other).norm()
    }
}

impl Add for PlanarPoint {
    type Output = PlanarPoint;
    fn add(self, rhs: PlanarPoint) -> PlanarPoint {
        PlanarPoint::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for PlanarPoint {
    type Output = PlanarPoint;
    fn sub(self, rhs: PlanarPoint) -> PlanarPoint {
        PlanarPoint::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for PlanarPoint {
    type Output = PlanarPoint;
    fn mul(self, k: f64) -> PlanarPoint {
        PlanarPoint::new(self.x * k, self.y * k)
    }
}

/// Equirectangular projection centered on `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalProjection {
    origin: GeoPoint,
    cos_lat: f64,
}

impl LocalProjection {
    pub fn new(origin: GeoPoint) -> Self {
        LocalProjection {
            origin,
            cos_lat: origin.lat.to_radians().cos(),
        }
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn project(&self, p: GeoPoint) -> PlanarPoint {
        PlanarPoint {
            x: EARTH_RADIUS_M * self.cos_lat * (p.lon - self.origin.lon).to_radians(),
            y: EARTH_RADIUS_M * (p.lat - self.origin.lat).to_radians(),
        }
    }

    pub fn unproject(&self, p: PlanarPoint) -> GeoPoint {
        GeoPoint {
            lat: self.origin.lat + (p.y / EARTH_RADIUS_M).to_degrees(),
            lon: self.origin.lon + (p.x / (EARTH_RADIUS_M * self.cos_lat)).to_degrees(),
        }
    }
}

/// Projects `p` into the local frame centered on `origin`.
pub fn project_local(p: GeoPoint, origin: GeoPoint) -> PlanarPoint {
    LocalProjection::new(origin).project(p)
}

/// A straight segment with distinct endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    a: PlanarPoint,
    b: PlanarPoint,
}

/// Closest point of a segment to a query point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub point: PlanarPoint,
    pub distance: f64,
    /// Fraction along the segment, `0` at `a` and `1` at `b`.
    pub t: f64,
}

impl Segment {
    pub fn new(a: PlanarPoint, b: PlanarPoint) -> Result<Self> {
        if a == b {
            return Err(Error::DegenerateSegment);
        }
        Ok(Segment { a, b })
    }

    pub fn a(&self) -> PlanarPoint {
        self.a
    }

    pub fn b(&self) -> PlanarPoint {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn direction(&self) -> PlanarPoint {
        self.b - self.a
    }

    /// Heading from `a` towards `b`.
    pub fn heading(&self) -> f64 {
        // a != b, so the heading is always defined.
        heading_of(self.direction()).unwrap_or(0.0)
    }

    pub fn point_at(&self, t: f64) -> PlanarPoint {
        self.a + self.direction() * t
    }

    /// Nearest point on the closed segment to `p`.
    pub fn project(&self, p: PlanarPoint) -> Projection {
        let d = self.direction();
        let t = ((p - self.a).dot(d) / d.dot(d)).clamp(0.0, 1.0);
        let point = if t == 0.0 {
            self.a
        } else if t == 1.0 {
            self.b
        } else {
            self.point_at(t)
        };
        Projection {
            point,
            distance: p.distance(point),
            t,
        }
    }

    /// Length of the part of the segment inside the disc of `radius` around `center`.
    pub fn clipped_length_in_disc(&self, center: PlanarPoint, radius: f64) -> f64 {
        let d = self.direction();
        let f = self.a - center;
        let qa = d.dot(d);
        let qb = 2.0 * f.dot(d);
        let qc = f.dot(f) - radius * radius;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc <= 0.0 {
            return 0.0;
        }
        let sq = disc.sqrt();
        let t0 = ((-qb - sq) / (2.0 * qa)).max(0.0);
        let t1 = ((-qb + sq) / (2.0 * qa)).min(1.0);
        if t1 <= t0 {
            0.0
        } else {
            (t1 - t0) * qa.sqrt()
        }
    }

    /// True if the segment touches the axis-aligned box `[min, max]`.
    pub fn intersects_box(&self, min: PlanarPoint, max: PlanarPoint) -> bool {
        // Liang-Barsky clipping.
        let d = self.direction();
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        let checks = [
            (-d.x, self.a.x - min.x),
            (d.x, max.x - self.a.x),
            (-d.y, self.a.y - min.y),
            (d.y, max.y - self.a.y),
        ];
        for (p, q) in checks {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

/// Minimum distance from `p` to the closed segment `s`, with the foot point.
pub fn point_segment_distance(p: PlanarPoint, s: &Segment) -> Projection {
    s.project(p)
}

/// Heading of `v` in degrees, counterclockwise from +x, in `[0, 360)`.
pub fn heading_of(v: PlanarPoint) -> Result<f64> {
    if v.x == 0.0 && v.y == 0.0 {
        return Err(Error::UndefinedHeading);
    }
    let deg = v.y.atan2(v.x).to_degrees();
    let h = if deg < 0.0 { deg + 360.0 } else { deg };
    Ok(if h >= 360.0 { 0.0 } else { h })
}

/// Minimal absolute circular difference between two headings, in `[0, 180]`.
pub fn angle_diff(h1: f64, h2: f64) -> f64 {
    let d = (h1 - h2).rem_euclid(360.0);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn project_identity_and_meridian() {
        let o = GeoPoint::new(0.0, 0.0).unwrap();
        assert_eq!(project_local(o, o), PlanarPoint::new(0.0, 0.0));
        let p = project_local(GeoPoint::new(0.001, 0.0).unwrap(), o);
        assert_abs_diff_eq!(p.x, 0.0);
        assert_abs_diff_eq!(p.y, 111.195, epsilon = 0.001);
    }

    #[test]
    fn project_shrinks_longitude_with_latitude() {
        let o = GeoPoint::new(60.0, 0.0).unwrap();
        let p = project_local(GeoPoint::new(60.0, 0.001).unwrap(), o);
        assert_abs_diff_eq!(p.x, 55.597, epsilon = 0.001);
        assert_abs_diff_eq!(p.y, 0.0);
    }

    #[test]
    fn rejects_out_of_range_coordinates() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.5).is_err());
    }

    #[test]
    fn segment_distance_cases() {
        let s = Segment::new(PlanarPoint::new(0.0, 0.0), PlanarPoint::new(2.0, 0.0)).unwrap();

        let pr = point_segment_distance(PlanarPoint::new(1.0, 1.0), &s);
        assert_eq!(pr.distance, 1.0);
        assert_eq!(pr.point, PlanarPoint::new(1.0, 0.0));
        assert_eq!(pr.t, 0.5);

        let pr = point_segment_distance(PlanarPoint::new(3.0, 1.0), &s);
        assert_abs_diff_eq!(pr.distance, 2f64.sqrt());
        assert_eq!(pr.point, PlanarPoint::new(2.0, 0.0));
        assert_eq!(pr.t, 1.0);

        let pr = point_segment_distance(PlanarPoint::new(1.0, 0.0), &s);
        assert_eq!(pr.distance, 0.0);
    }

    #[test]
    fn degenerate_segment_rejected() {
        let p = PlanarPoint::new(1.0, 1.0);
        assert!(matches!(Segment::new(p, p), Err(Error::DegenerateSegment)));
    }

    #[test]
    fn headings() {
        assert_eq!(heading_of(PlanarPoint::new(1.0, 0.0)).unwrap(), 0.0);
        assert_eq!(heading_of(PlanarPoint::new(0.0, 1.0)).unwrap(), 90.0);
        assert_abs_diff_eq!(heading_of(PlanarPoint::new(-1.0, -1.0)).unwrap(), 225.0);
        assert!(heading_of(PlanarPoint::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn angle_differences() {
        assert_eq!(angle_diff(10.0, 10.0), 0.0);
        assert_eq!(angle_diff(350.0, 10.0), 20.0);
        assert_eq!(angle_diff(0.0, 180.0), 180.0);
    }

    #[test]
    fn box_intersection() {
        let s = Segment::new(PlanarPoint::new(-10.0, 0.0), PlanarPoint::new(10.0, 0.0)).unwrap();
        assert!(s.intersects_box(PlanarPoint::new(-1.0, -1.0), PlanarPoint::new(1.0, 1.0)));
        assert!(!s.intersects_box(PlanarPoint::new(-1.0, 2.0), PlanarPoint::new(1.0, 3.0)));
        let inside = Segment::new(PlanarPoint::new(0.1, 0.1), PlanarPoint::new(0.2, 0.2)).unwrap();
        assert!(inside.intersects_box(PlanarPoint::new(-1.0, -1.0), PlanarPoint::new(1.0, 1.0)));
    }

    #[test]
    fn disc_clipping() {
        let s = Segment::new(PlanarPoint::new(-300.0, 0.0), PlanarPoint::new(300.0, 0.0)).unwrap();
        assert_abs_diff_eq!(
            s.clipped_length_in_disc(PlanarPoint::default(), 200.0),
            400.0,
            epsilon = 1e-9
        );
        let half = Segment::new(PlanarPoint::new(0.0, 0.0), PlanarPoint::new(300.0, 0.0)).unwrap();
        assert_abs_diff_eq!(
            half.clipped_length_in_disc(PlanarPoint::default(), 200.0),
            200.0,
            epsilon = 1e-9
        );
        let far =
            Segment::new(PlanarPoint::new(0.0, 250.0), PlanarPoint::new(10.0, 250.0)).unwrap();
        assert_eq!(
            far.clipped_length_in_disc(PlanarPoint::default(), 200.0),
            0.0
        );
    }

    proptest! {
        #[test]
        fn distance_never_exceeds_endpoint_distance(
            px in -100.0..100.0f64, py in -100.0..100.0f64,
            ax in -50.0..50.0f64, ay in -50.0..50.0f64,
            bx in -50.0..50.0f64, by in -50.0..50.0f64,
        ) {
            let a = PlanarPoint::new(ax, ay);
            let b = PlanarPoint::new(bx, by);
            prop_assume!(a != b);
            let p = PlanarPoint::new(px, py);
            let pr = point_segment_distance(p, &Segment::new(a, b).unwrap());
            prop_assert!(pr.distance <= p.distance(a) + 1e-9);
            prop_assert!(pr.distance <= p.distance(b) + 1e-9);
            prop_assert!((0.0..=1.0).contains(&pr.t));
        }

        #[test]
        fn angle_diff_symmetric_and_triangle(a in -720.0..720.0f64, b in -720.0..720.0f64, c in -720.0..720.0f64) {
            prop_assert!((angle_diff(a, b) - angle_diff(b, a)).abs() < 1e-9);
            prop_assert!((0.0..=180.0).contains(&angle_diff(a, b)));
            prop_assert!(angle_diff(a, c) <= angle_diff(a, b) + angle_diff(b, c) + 1e-9);
        }

        #[test]
        fn projection_round_trips(
            olat in -60.0..60.0f64, olon in -170.0..170.0f64,
            dx in -50_000.0..50_000.0f64, dy in -50_000.0..50_000.0f64,
        ) {
            let proj = LocalProjection::new(GeoPoint::new(olat, olon).unwrap());
            let g = proj.unproject(PlanarPoint::new(dx, dy));
            let back = proj.unproject(proj.project(g));
            prop_assert!((back.lat - g.lat).abs() < 1e-9);
            prop_assert!((back.lon - g.lon).abs() < 1e-9);
        }
    }
}
