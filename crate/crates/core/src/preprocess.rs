//! Trajectory cleaning with DBSCAN.
//!
//! Noise points are dropped as outliers and each remaining cluster is
//! collapsed into one stay point. When `eps` is not given it is chosen from
//! the elbows of the sorted k-distance curve: the curve is rotated clockwise,
//! fitted with a least-squares polynomial, and the local minima of the fit
//! are rotated back onto the curve.

use std::collections::VecDeque;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::PlanarPoint;
use crate::trajectory::{Trajectory, TrajectoryPoint};

/// `min_pts` default: twice the spatial dimension.
pub const DEFAULT_MIN_PTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl DbscanParams {
    pub fn new(eps: f64, min_pts: usize) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "eps must be positive, got {eps}"
            )));
        }
        if min_pts == 0 {
            return Err(Error::InvalidParameter("min_pts must be at least 1".into()));
        }
        Ok(DbscanParams { eps, min_pts })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Cluster(usize),
    Noise,
}

/// One label per input point. Cluster ids are contiguous from 0 in order of
/// discovery.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DbscanLabels(pub Vec<Label>);

impl DbscanLabels {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn cluster_count(&self) -> usize {
        self.0
            .iter()
            .filter_map(|l| match l {
                Label::Cluster(c) => Some(c + 1),
                Label::Noise => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn noise_count(&self) -> usize {
        self.0.iter().filter(|l| **l == Label::Noise).count()
    }
}

fn neighbors(points: &[PlanarPoint], i: usize, eps: f64) -> Vec<usize> {
    let p = points[i];
    points
        .iter()
        .enumerate()
        .filter(|(_, q)| q.distance(p) <= eps)
        .map(|(j, _)| j)
        .collect()
}

/// Density-based clustering. A point is core when at least `min_pts` points,
/// itself included, lie within `eps`. Border points join the first cluster
/// that reaches them.
pub fn dbscan(points: &[PlanarPoint], params: &DbscanParams) -> DbscanLabels {
    let n = points.len();
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if labels[i].is_some() {
            continue;
        }
        let seeds = neighbors(points, i, params.eps);
        if seeds.len() < params.min_pts {
            labels[i] = Some(Label::Noise);
            continue;
        }
        let cluster = Label::Cluster(next);
        next += 1;
        labels[i] = Some(cluster);
        let mut queue: VecDeque<usize> = seeds.into();
        while let Some(j) = queue.pop_front() {
            match labels[j] {
                Some(Label::Noise) => labels[j] = Some(cluster),
                Some(_) => continue,
                None => {
                    labels[j] = Some(cluster);
                    let reach = neighbors(points, j, params.eps);
                    if reach.len() >= params.min_pts {
                        queue.extend(reach);
                    }
                }
            }
        }
    }
    DbscanLabels(
        labels
            .into_iter()
            .map(|l| l.unwrap_or(Label::Noise))
            .collect(),
    )
}

/// Distance from each point to its `min_pts`-th nearest other point, ascending.
pub fn k_distance_list(points: &[PlanarPoint], min_pts: usize) -> Result<Vec<f64>> {
    if min_pts == 0 || min_pts >= points.len() {
        return Err(Error::InvalidParameter(format!(
            "k-distance needs 1 <= min_pts < {} points, got {min_pts}",
            points.len()
        )));
    }
    let mut out: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<f64> = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| q.distance(*p))
                .collect();
            d.select_nth_unstable_by(min_pts - 1, f64::total_cmp);
            d[min_pts - 1]
        })
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElbowParams {
    /// Rotation in degrees, strictly between 0 and 90.
    pub theta: f64,
    /// Degree of the least-squares polynomial, at least 2.
    pub degree: usize,
}

impl Default for ElbowParams {
    fn default() -> Self {
        ElbowParams {
            theta: 45.0,
            degree: 4,
        }
    }
}

/// An elbow of the k-distance curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elbow {
    /// Position along the sorted list, possibly fractional.
    pub x: f64,
    /// The list linearly interpolated at `x`.
    pub eps: f64,
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| k as f64 * c)
        .collect()
}

/// Real roots of the polynomial with ascending `coeffs`.
fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    let scale = c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    while c.len() > 1 && c.last().is_some_and(|v| v.abs() <= 1e-10 * scale) {
        c.pop();
    }
    let deg = c.len() - 1;
    match deg {
        0 => Vec::new(),
        1 => vec![-c[0] / c[1]],
        _ => {
            let lead = c[deg];
            let mut companion = DMatrix::<f64>::zeros(deg, deg);
            for i in 1..deg {
                companion[(i, i - 1)] = 1.0;
            }
            for i in 0..deg {
                companion[(i, deg - 1)] = -c[i] / lead;
            }
            let d = derivative(&c);
            companion
                .complex_eigenvalues()
                .iter()
                .filter(|z| z.im.abs() <= 1e-7 * (1.0 + z.re.abs()))
                .map(|z| {
                    let mut r = z.re;
                    for _ in 0..3 {
                        let slope = horner(&d, r);
                        if slope == 0.0 {
                            break;
                        }
                        r -= horner(&c, r) / slope;
                    }
                    r
                })
                .collect()
        }
    }
}

fn interpolate(l: &[f64], x: f64) -> f64 {
    let i = x.floor() as usize;
    if i + 1 >= l.len() {
        return l[l.len() - 1];
    }
    let f = x - i as f64;
    l[i] + f * (l[i + 1] - l[i])
}

/// Elbows of an ascending k-distance list, sorted by position.
pub fn detect_elbows(l: &[f64], params: &ElbowParams) -> Result<Vec<Elbow>> {
    if params.degree < 2 {
        return Err(Error::InvalidParameter(
            "elbow degree must be at least 2".into(),
        ));
    }
    if !(params.theta > 0.0 && params.theta < 90.0) {
        return Err(Error::InvalidParameter(
            "elbow theta must lie in (0, 90)".into(),
        ));
    }
    if l.len() < params.degree + 1 {
        return Err(Error::InvalidParameter(format!(
            "elbow detection needs at least {} values, got {}",
            params.degree + 1,
            l.len()
        )));
    }

    let (sin, cos) = params.theta.to_radians().sin_cos();
    // Rotate by -theta.
    let rotated: Vec<(f64, f64)> = l
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let x = i as f64;
            (x * cos + y * sin, -x * sin + y * cos)
        })
        .collect();

    let (lo, hi) = rotated
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| {
            (lo.min(x), hi.max(x))
        });
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    if !(half > 0.0) {
        return Err(Error::FitFailure(
            "rotated points share one x coordinate".into(),
        ));
    }

    // Least squares in the normalized variable u = (x - mid) / half.
    let n = rotated.len();
    let cols = params.degree + 1;
    let vander = DMatrix::from_fn(n, cols, |r, c| ((rotated[r].0 - mid) / half).powi(c as i32));
    let rhs = DVector::from_iterator(n, rotated.iter().map(|&(_, y)| y));
    let coeffs = vander
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::FitFailure(e.to_string()))?;
    let coeffs: Vec<f64> = coeffs.iter().copied().collect();
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::FitFailure("non-finite coefficients".into()));
    }

    let d1 = derivative(&coeffs);
    let d2 = derivative(&d1);
    let mut roots = real_roots(&d1);
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let mut elbows: Vec<Elbow> = roots
        .into_iter()
        .filter(|&u| {
            let curv = horner(&d2, u);
            if curv.abs() > 1e-12 {
                curv > 0.0
            } else {
                let h = 1e-6 * (1.0 + u.abs());
                horner(&d1, u - h) < 0.0 && horner(&d1, u + h) > 0.0
            }
        })
        .map(|u| {
            let xr = mid + half * u;
            let yr = horner(&coeffs, u);
            // Rotate back by +theta.
            xr * cos - yr * sin
        })
        .filter(|&x| x >= 0.0 && x < l.len() as f64)
        .map(|x| Elbow {
            x,
            eps: interpolate(l, x),
        })
        .collect();
    elbows.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(elbows)
}

/// Replaces each cluster with one point at its centroid, stamped with the
/// cluster's first timestamp and placed where the cluster first appears.
pub fn mitigate_stay_points(traj: &Trajectory, labels: &DbscanLabels) -> Result<Trajectory> {
    check_labels(traj, labels)?;
    let clusters = labels.cluster_count();
    let mut sums = vec![(0.0, 0.0, 0.0, 0.0, 0usize); clusters];
    for (p, l) in traj.points().iter().zip(&labels.0) {
        if let Label::Cluster(c) = *l {
            let s = &mut sums[c];
            s.0 += p.pos.x;
            s.1 += p.pos.y;
            s.2 += p.geo.lat;
            s.3 += p.geo.lon;
            s.4 += 1;
        }
    }
    let mut emitted = vec![false; clusters];
    let mut out = Vec::with_capacity(traj.len());
    for (p, l) in traj.points().iter().zip(&labels.0) {
        match *l {
            Label::Noise => out.push(p.clone()),
            Label::Cluster(c) if !emitted[c] => {
                emitted[c] = true;
                let (sx, sy, slat, slon, k) = sums[c];
                let k = k as f64;
                out.push(TrajectoryPoint {
                    t: p.t,
                    geo: crate::geo::GeoPoint {
                        lat: slat / k,
                        lon: slon / k,
                    },
                    pos: PlanarPoint::new(sx / k, sy / k),
                    speed: None,
                    heading: None,
                });
            }
            Label::Cluster(_) => {}
        }
    }
    Trajectory::new(out)
}

/// Result of dropping noise points.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierRemoval {
    pub trajectory: Trajectory,
    pub removed: usize,
    /// Set when every point was noise and the output is empty.
    pub all_noise: bool,
}

pub fn remove_outliers(traj: &Trajectory, labels: &DbscanLabels) -> Result<OutlierRemoval> {
    check_labels(traj, labels)?;
    let kept: Vec<TrajectoryPoint> = traj
        .points()
        .iter()
        .zip(&labels.0)
        .filter(|(_, l)| **l != Label::Noise)
        .map(|(p, _)| p.clone())
        .collect();
    let removed = traj.len() - kept.len();
    let all_noise = kept.is_empty() && !traj.is_empty();
    if all_noise {
        warn!("all {} points labelled as noise", traj.len());
    }
    Ok(OutlierRemoval {
        trajectory: Trajectory::new(kept)?,
        removed,
        all_noise,
    })
}

fn check_labels(traj: &Trajectory, labels: &DbscanLabels) -> Result<()> {
    if traj.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} labels for {} points",
            labels.len(),
            traj.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsChoice {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub eps: EpsChoice,
    pub min_pts: usize,
    pub elbow: ElbowParams,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            eps: EpsChoice::Auto,
            min_pts: DEFAULT_MIN_PTS,
            elbow: ElbowParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessOutcome {
    pub trajectory: Trajectory,
    /// `None` when no eps could be chosen and the input was passed through.
    pub eps: Option<f64>,
    pub outliers_removed: usize,
    pub points_merged: usize,
    pub warnings: Vec<String>,
}

/// Outlier removal followed by stay-point mitigation, from one DBSCAN run.
///
/// With `eps = auto` the smallest elbow of the k-distance curve is used.
pub fn preprocess(traj: &Trajectory, config: &PreprocessConfig) -> Result<PreprocessOutcome> {
    let positions = traj.positions();
    let mut warnings = Vec::new();
    let eps = match config.eps {
        EpsChoice::Fixed(e) => Some(e),
        EpsChoice::Auto if positions.len() <= config.min_pts.max(config.elbow.degree) => None,
        EpsChoice::Auto => {
            let l = k_distance_list(&positions, config.min_pts)?;
            match detect_elbows(&l, &config.elbow) {
                Ok(e) => e
                    .iter()
                    .map(|e| e.eps)
                    .filter(|e| *e > 0.0)
                    .reduce(f64::min),
                Err(Error::FitFailure(m)) => {
                    warnings.push(format!("elbow fit failed: {m}"));
                    None
                }
                Err(e) => return Err(e),
            }
        }
    };
    let Some(eps) = eps else {
        warnings.push("no eps candidate found; trajectory left unchanged".into());
        for w in &warnings {
            warn!("{w}");
        }
        return Ok(PreprocessOutcome {
            trajectory: traj.clone(),
            eps: None,
            outliers_removed: 0,
            points_merged: 0,
            warnings,
        });
    };

    let params = DbscanParams::new(eps, config.min_pts)?;
    let labels = dbscan(&positions, &params);
    let cleaned = remove_outliers(traj, &labels)?;
    if cleaned.all_noise {
        warnings.push("every point was labelled noise".into());
    }
    let remaining = DbscanLabels(
        labels
            .0
            .iter()
            .copied()
            .filter(|l| *l != Label::Noise)
            .collect(),
    );
    let merged = mitigate_stay_points(&cleaned.trajectory, &remaining)?;
    Ok(PreprocessOutcome {
        points_merged: cleaned.trajectory.len() - merged.len(),
        trajectory: merged,
        eps: Some(eps),
        outliers_removed: cleaned.removed,
        warnings,
    })
}
