//! GPS trajectories and kinematics estimation.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geo::{heading_of, GeoPoint, LocalProjection, PlanarPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    /// Seconds.
    pub t: f64,
    pub geo: GeoPoint,
    pub pos: PlanarPoint,
    /// Meters per second.
    pub speed: Option<f64>,
    /// Degrees counterclockwise from east.
    pub heading: Option<f64>,
}

impl TrajectoryPoint {
    pub fn new(t: f64, geo: GeoPoint, projection: &LocalProjection) -> Self {
        TrajectoryPoint {
            t,
            geo,
            pos: projection.project(geo),
            speed: None,
            heading: None,
        }
    }

    pub fn with_kinematics(mut self, speed: Option<f64>, heading: Option<f64>) -> Self {
        self.speed = speed;
        self.heading = heading;
        self
    }

    pub fn speed_or_zero(&self) -> f64 {
        self.speed.unwrap_or(0.0)
    }

    pub fn heading_or_zero(&self) -> f64 {
        self.heading.unwrap_or(0.0)
    }
}

/// Points with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn new(points: Vec<TrajectoryPoint>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !p.t.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "point {i}: non-finite timestamp"
                )));
            }
            if matches!(p.speed, Some(s) if !(s >= 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "point {i}: negative speed"
                )));
            }
            if matches!(p.heading, Some(h) if !(0.0..360.0).contains(&h)) {
                return Err(Error::InvalidParameter(format!(
                    "point {i}: heading outside [0, 360)"
                )));
            }
        }
        if let Some(i) = points.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidParameter(format!(
                "timestamps not strictly increasing at point {}",
                i + 1
            )));
        }
        Ok(Trajectory { points })
    }

    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The first `k` points.
    pub fn prefix(&self, k: usize) -> Trajectory {
        Trajectory {
            points: self.points[..k.min(self.points.len())].to_vec(),
        }
    }

    pub fn positions(&self) -> Vec<PlanarPoint> {
        self.points.iter().map(|p| p.pos).collect()
    }

    pub fn has_kinematics(&self) -> bool {
        self.points
            .iter()
            .all(|p| p.speed.is_some() && p.heading.is_some())
    }

    pub fn from_csv_file(path: impl AsRef<Path>, projection: &LocalProjection) -> Result<Self> {
        load_trajectory(File::open(path)?, projection)
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    t: f64,
    lat: f64,
    lon: f64,
    #[serde(default)]
    speed: Option<f64>,
    #[serde(default)]
    heading: Option<f64>,
}

/// Reads `t,lat,lon[,speed][,heading]` CSV, projecting into `projection`'s frame.
pub fn load_trajectory(source: impl Read, projection: &LocalProjection) -> Result<Trajectory> {
    let mut rdr = csv::Reader::from_reader(source);
    let headers = rdr.headers()?.clone();
    let mut points: Vec<TrajectoryPoint> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |m: String| Error::input("trajectory", line, m);
        let row: Row = record
            .deserialize(Some(&headers))
            .map_err(|e| bad(e.to_string()))?;
        let geo = GeoPoint::new(row.lat, row.lon).map_err(|e| bad(e.to_string()))?;
        if !row.t.is_finite() {
            return Err(bad("non-finite timestamp".into()));
        }
        if let Some(prev) = points.last() {
            if row.t <= prev.t {
                return Err(bad(format!(
                    "timestamp {} does not increase past {}",
                    row.t, prev.t
                )));
            }
        }
        if matches!(row.speed, Some(s) if !(s >= 0.0)) {
            return Err(bad("speed must be non-negative".into()));
        }
        let heading = match row.heading {
            Some(h) if !h.is_finite() => return Err(bad("non-finite heading".into())),
            Some(h) => Some(match h.rem_euclid(360.0) {
                r if r >= 360.0 => 0.0,
                r => r,
            }),
            None => None,
        };
        points
            .push(TrajectoryPoint::new(row.t, geo, projection).with_kinematics(row.speed, heading));
    }
    Trajectory::new(points)
}

/// Fills in missing speed and heading by finite differences of position.
///
/// Interior points use the central difference over their two neighbors and
/// the endpoints use one-sided differences. Values already present are kept.
/// Where the velocity vanishes, the heading carries over from the previous
/// point (0 for the first point).
pub fn estimate_kinematics(traj: &Trajectory) -> Result<Trajectory> {
    let pts = traj.points();
    let n = pts.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let mut out = pts.to_vec();
    let mut last_heading = 0.0;
    for i in 0..n {
        let (lo, hi) = match i {
            0 => (0, 1),
            _ if i == n - 1 => (n - 2, n - 1),
            _ => (i - 1, i + 1),
        };
        let v = (pts[hi].pos - pts[lo].pos) * (1.0 / (pts[hi].t - pts[lo].t));
        let p = &mut out[i];
        if p.speed.is_none() {
            p.speed = Some(v.norm());
        }
        if p.heading.is_none() {
            p.heading = Some(heading_of(v).unwrap_or(last_heading));
        }
        last_heading = p.heading.unwrap_or(last_heading);
    }
    Ok(Trajectory { points: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn proj() -> LocalProjection {
        LocalProjection::new(GeoPoint { lat: 0.0, lon: 0.0 })
    }

    fn planar(t: f64, x: f64, y: f64) -> TrajectoryPoint {
        let pr = proj();
        TrajectoryPoint::new(t, pr.unproject(PlanarPoint::new(x, y)), &pr)
    }

    #[test]
    fn loads_rows() {
        let csv = "t,lat,lon\n0,0,0\n1,0,0.0001\n2,0,0.0002\n";
        let tr = load_trajectory(csv.as_bytes(), &proj()).unwrap();
        assert_eq!(tr.len(), 3);
        assert!(!tr.has_kinematics());
    }

    #[test]
    fn rejects_repeated_timestamp() {
        let csv = "t,lat,lon\n0,0,0\n1,0,0.0001\n1,0,0.0002\n";
        match load_trajectory(csv.as_bytes(), &proj()) {
            Err(Error::Input { row, .. }) => assert_eq!(row, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(load_trajectory("t,lat,lon\n0,abc,0\n".as_bytes(), &proj()).is_err());
    }

    #[test]
    fn measured_columns_survive_estimation() {
        let csv = "t,lat,lon,speed,heading\n0,0,0,7.5,45\n1,0,0.0001,8,90\n2,0,0.0002,9,-90\n";
        let tr = load_trajectory(csv.as_bytes(), &proj()).unwrap();
        assert!(tr.has_kinematics());
        assert_eq!(tr.points()[2].heading, Some(270.0));
        let est = estimate_kinematics(&tr).unwrap();
        assert_eq!(est, tr);
    }

    #[test]
    fn central_difference() {
        let tr = Trajectory::new(vec![
            planar(0.0, 0.0, 0.0),
            planar(1.0, 5.0, 3.0),
            planar(2.0, 2.0, 0.0),
        ])
        .unwrap();
        let est = estimate_kinematics(&tr).unwrap();
        let mid = &est.points()[1];
        assert_abs_diff_eq!(mid.speed.unwrap(), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(mid.heading.unwrap(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn irregular_timesteps() {
        let tr = Trajectory::new(vec![
            planar(0.0, 0.0, 0.0),
            planar(1.0, 1.0, 0.0),
            planar(4.0, 4.0, 0.0),
        ])
        .unwrap();
        let est = estimate_kinematics(&tr).unwrap();
        assert_abs_diff_eq!(est.points()[1].speed.unwrap(), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(est.points()[1].heading.unwrap(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn uniform_northward_motion() {
        let pts = (0..6)
            .map(|i| planar(i as f64, 0.0, 2.0 * i as f64))
            .collect();
        let est = estimate_kinematics(&Trajectory::new(pts).unwrap()).unwrap();
        for p in est.points() {
            assert_abs_diff_eq!(p.speed.unwrap(), 2.0, epsilon = 1e-6);
            assert_abs_diff_eq!(p.heading.unwrap(), 90.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn zero_velocity_carries_heading() {
        let tr = Trajectory::new(vec![
            planar(0.0, 0.0, 0.0),
            planar(1.0, 0.0, 10.0),
            planar(2.0, 0.0, 20.0),
            planar(3.0, 0.0, 10.0),
            planar(4.0, 0.0, 20.0),
        ])
        .unwrap();
        let est = estimate_kinematics(&tr).unwrap();
        // Point 3 sees p[2] == p[4].
        assert_eq!(est.points()[3].speed, Some(0.0));
        assert_abs_diff_eq!(
            est.points()[3].heading.unwrap(),
            est.points()[2].heading.unwrap()
        );

        let still = Trajectory::new(vec![planar(0.0, 1.0, 1.0), planar(1.0, 1.0, 1.0)]).unwrap();
        assert_eq!(
            estimate_kinematics(&still).unwrap().points()[0].heading,
            Some(0.0)
        );
    }

    #[test]
    fn too_short() {
        let tr = Trajectory::new(vec![planar(0.0, 0.0, 0.0)]).unwrap();
        assert!(matches!(
            estimate_kinematics(&tr),
            Err(Error::TooFewPoints { .. })
        ));
    }

    proptest! {
        #[test]
        fn exact_on_affine_motion(
            x0 in -1000.0..1000.0f64, y0 in -1000.0..1000.0f64,
            vx in -30.0..30.0f64, vy in -30.0..30.0f64,
            steps in proptest::collection::vec(0.2..5.0f64, 2..20),
        ) {
            prop_assume!(vx.hypot(vy) > 0.1);
            let mut t = 0.0;
            let mut pts = vec![];
            let pr = proj();
            for dt in std::iter::once(0.0).chain(steps) {
                t += dt;
                let pos = PlanarPoint::new(x0 + vx * t, y0 + vy * t);
                pts.push(TrajectoryPoint { t, geo: pr.unproject(pos), pos, speed: None, heading: None });
            }
            let tr = Trajectory::new(pts).unwrap();
            let est = estimate_kinematics(&tr).unwrap();
            let h = heading_of(PlanarPoint::new(vx, vy)).unwrap();
            prop_assert_eq!(est.len(), tr.len());
            for (a, b) in est.points().iter().zip(tr.points()) {
                prop_assert_eq!(a.t, b.t);
                prop_assert!((a.speed.unwrap() - vx.hypot(vy)).abs() < 1e-9);
                prop_assert!(crate::geo::angle_diff(a.heading.unwrap(), h) < 1e-7);
            }
            prop_assert_eq!(estimate_kinematics(&est).unwrap(), est);
        }
    }
}
