//! Matcher that ranks candidate edges with the Analytic Hierarchy Process.
//!
//! Each factor (distance, direction, turn legality) yields a reciprocal
//! pairwise-comparison matrix over the candidates. The normalized geometric
//! means of its rows are the per-factor weights, and the factor weights are
//! combined with coefficients that depend on how dense the surrounding road
//! network is.

use serde::{Deserialize, Serialize};

use super::{
    gather_candidates, run_online, CandidateEdge, CurrentEdge, MatchedRoute, OnlineMatcher, Step,
};
use crate::error::{Error, Result};
use crate::geo::angle_diff;
use crate::network::{EdgeId, EnvironmentKind, RoadNetwork};
use crate::trajectory::{Trajectory, TrajectoryPoint};

/// Upper band edges for distance differences in meters. A difference `d`
/// maps to intensity `k + 1` where `k` is the first band with `d <= edge`,
/// and to 9 beyond the last edge.
pub const DIST_BANDS_M: [f64; 8] = [1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0];
/// Upper band edges for heading differences in degrees.
pub const DIR_BANDS_DEG: [f64; 8] = [10.0, 30.0, 50.0, 70.0, 90.0, 110.0, 130.0, 150.0];

/// Intensity for a candidate that can legally be turned onto versus one that cannot.
pub const TURN_PREFERENCE: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Distance,
    Direction,
}

impl Factor {
    fn bands(self) -> &'static [f64; 8] {
        match self {
            Factor::Distance => &DIST_BANDS_M,
            Factor::Direction => &DIR_BANDS_DEG,
        }
    }

    /// Preference intensity for a non-negative difference.
    pub fn intensity(self, diff: f64) -> f64 {
        debug_assert!(diff >= 0.0);
        let band = self
            .bands()
            .iter()
            .position(|&edge| diff <= edge)
            .unwrap_or(8);
        (band + 1) as f64
    }
}

/// Square positive reciprocal matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonMatrix {
    n: usize,
    values: Vec<f64>,
}

impl ComparisonMatrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(if i == j { 1.0 } else { f(i, j) });
            }
        }
        ComparisonMatrix { n, values }
    }

    /// Validates positivity, unit diagonal and reciprocity.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter(
                "comparison matrix must be square".into(),
            ));
        }
        let m = ComparisonMatrix {
            n,
            values: rows.iter().flatten().copied().collect(),
        };
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (m.get(i, j), m.get(j, i));
                if !(a > 0.0) || !a.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({i}, {j}) is not positive"
                    )));
                }
                if (a * b - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "entries ({i}, {j}) and ({j}, {i}) are not reciprocal"
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Pairwise comparison of candidates on a factor where smaller values win.
///
/// Entry `(i, j)` rates how strongly candidate `i` is preferred to `j`.
pub fn comparison_matrix(values: &[f64], factor: Factor) -> ComparisonMatrix {
    ComparisonMatrix::from_fn(values.len(), |i, j| {
        let diff = values[j] - values[i];
        if diff >= 0.0 {
            factor.intensity(diff)
        } else {
            1.0 / factor.intensity(-diff)
        }
    })
}

/// Pairwise comparison on turn legality.
pub fn turn_matrix(turn_ok: &[bool]) -> ComparisonMatrix {
    ComparisonMatrix::from_fn(turn_ok.len(), |i, j| match (turn_ok[i], turn_ok[j]) {
        (true, false) => TURN_PREFERENCE,
        (false, true) => 1.0 / TURN_PREFERENCE,
        _ => 1.0,
    })
}

/// Normalized priority vector of one factor.
#[derive(Debug, Clone, PartialEq)]
pub struct AhpWeights(pub Vec<f64>);

impl AhpWeights {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Row geometric means `g_i`, normalized by their sum.
pub fn ahp_weights(m: &ComparisonMatrix) -> AhpWeights {
    let n = m.len();
    let g: Vec<f64> = (0..n)
        .map(|i| (m.row(i).iter().map(|v| v.ln()).sum::<f64>() / n as f64).exp())
        .collect();
    let s: f64 = g.iter().sum();
    AhpWeights(g.into_iter().map(|gi| gi / s).collect())
}

/// Relative importance of the three factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvCoefficients {
    pub dist: f64,
    pub dir: f64,
    pub turn: f64,
}

impl EnvCoefficients {
    pub const URBAN: EnvCoefficients = EnvCoefficients {
        dist: 0.0806,
        dir: 0.3715,
        turn: 0.5479,
    };
    pub const SUBURBAN: EnvCoefficients = EnvCoefficients {
        dist: 0.4376,
        dir: 0.4642,
        turn: 0.0982,
    };
    pub const RURAL: EnvCoefficients = EnvCoefficients {
        dist: 0.5563,
        dir: 0.4237,
        turn: 0.020,
    };

    pub fn for_environment(kind: EnvironmentKind) -> Self {
        match kind {
            EnvironmentKind::Urban => Self::URBAN,
            EnvironmentKind::Suburban => Self::SUBURBAN,
            EnvironmentKind::Rural => Self::RURAL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalWeight {
    pub values: Vec<f64>,
    /// Index of the largest value; the lowest index wins ties.
    pub best: usize,
}

/// Combines factor weights linearly. Without `w_turn` only distance and
/// direction contribute.
pub fn total_weight(
    w_dist: &AhpWeights,
    w_dir: &AhpWeights,
    w_turn: Option<&AhpWeights>,
    coeffs: &EnvCoefficients,
) -> TotalWeight {
    let values: Vec<f64> = (0..w_dist.len())
        .map(|i| {
            let base = coeffs.dist * w_dist.0[i] + coeffs.dir * w_dir.0[i];
            match w_turn {
                Some(t) => base + coeffs.turn * t.0[i],
                None => base,
            }
        })
        .collect();
    let best = argmax(&values);
    TotalWeight { values, best }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AhpConfig {
    /// Half the side of the square search region around a point.
    pub polygon_half_width_m: f64,
    /// IMP skips points slower than this.
    pub speed_floor_mps: f64,
    /// SMP1 keeps the edge only while the remaining-distance margin exceeds this.
    pub smp1_dd_m: f64,
    /// SMP1 keeps the edge only while the heading change stays below this.
    pub smp1_dh_deg: f64,
    pub env_override: Option<EnvironmentKind>,
    /// Consecutive identical IMP winners needed before the edge is accepted.
    pub imp_confirmations: usize,
    pub allow_uturn: bool,
}

impl Default for AhpConfig {
    fn default() -> Self {
        AhpConfig {
            polygon_half_width_m: 30.0,
            speed_floor_mps: 3.0,
            smp1_dd_m: 30.0,
            smp1_dh_deg: 5.0,
            env_override: None,
            imp_confirmations: 1,
            allow_uturn: false,
        }
    }
}

pub struct AhpMatcher<'a> {
    net: &'a RoadNetwork,
    config: AhpConfig,
    current: Option<CurrentEdge>,
    previous: Option<TrajectoryPoint>,
    next_index: usize,
    streak: Option<(EdgeId, usize)>,
}

impl<'a> AhpMatcher<'a> {
    pub fn new(net: &'a RoadNetwork, config: AhpConfig) -> Self {
        AhpMatcher {
            net,
            config,
            current: None,
            previous: None,
            next_index: 0,
            streak: None,
        }
    }

    pub fn current(&self) -> Option<CurrentEdge> {
        self.current
    }

    fn coefficients(&self, point: &TrajectoryPoint) -> EnvCoefficients {
        let kind = self
            .config
            .env_override
            .unwrap_or_else(|| self.net.classify_environment(point.pos).kind);
        EnvCoefficients::for_environment(kind)
    }

    /// Picks the best candidate on distance and direction. `None` when the
    /// point is too slow or has no candidates.
    pub fn imp(&self, point: &TrajectoryPoint) -> Option<CandidateEdge> {
        if point.speed_or_zero() < self.config.speed_floor_mps {
            return None;
        }
        let cands = gather_candidates(
            self.net,
            point,
            self.config.polygon_half_width_m,
            None,
            self.config.allow_uturn,
        );
        if cands.is_empty() {
            return None;
        }
        let w_dist = ahp_weights(&comparison_matrix(
            &cands.iter().map(|c| c.dist).collect::<Vec<_>>(),
            Factor::Distance,
        ));
        let w_dir = ahp_weights(&comparison_matrix(
            &cands.iter().map(|c| c.heading_diff).collect::<Vec<_>>(),
            Factor::Direction,
        ));
        let tw = total_weight(&w_dist, &w_dir, None, &self.coefficients(point));
        Some(cands[tw.best])
    }

    /// True when `point` still lies on the current edge.
    pub fn smp1(&self, point: &TrajectoryPoint) -> bool {
        let (Some(cur), Some(prev)) = (self.current, self.previous.as_ref()) else {
            return false;
        };
        if point.speed_or_zero() == 0.0 {
            return true;
        }
        let to_junction = self.net.distance_to_chain_end(cur.edge, cur.t);
        let travelled = prev.speed_or_zero() * (point.t - prev.t);
        let dd = to_junction - travelled;
        let dh = angle_diff(point.heading_or_zero(), prev.heading_or_zero());
        dd > self.config.smp1_dd_m && dh < self.config.smp1_dh_deg
    }

    /// Re-selects among nearby edges using distance, direction and turn legality.
    pub fn smp2(&self, point: &TrajectoryPoint) -> Option<CandidateEdge> {
        let previous = self.current.map(|c| c.edge);
        let cands = gather_candidates(
            self.net,
            point,
            self.config.polygon_half_width_m,
            previous,
            self.config.allow_uturn,
        );
        if cands.is_empty() {
            return None;
        }
        let w_dist = ahp_weights(&comparison_matrix(
            &cands.iter().map(|c| c.dist).collect::<Vec<_>>(),
            Factor::Distance,
        ));
        let w_dir = ahp_weights(&comparison_matrix(
            &cands.iter().map(|c| c.heading_diff).collect::<Vec<_>>(),
            Factor::Direction,
        ));
        let w_turn = ahp_weights(&turn_matrix(
            &cands.iter().map(|c| c.turn_ok).collect::<Vec<_>>(),
        ));
        let tw = total_weight(&w_dist, &w_dir, Some(&w_turn), &self.coefficients(point));
        Some(cands[tw.best])
    }

    fn select(&mut self, c: CandidateEdge, index: usize) {
        self.current = Some(CurrentEdge {
            edge: c.edge,
            t: c.projection.t,
            point_index: index,
        });
    }
}

impl OnlineMatcher for AhpMatcher<'_> {
    fn push(&mut self, point: &TrajectoryPoint) -> Result<(Option<EdgeId>, Step)> {
        let index = self.next_index;
        self.next_index += 1;

        let result = match self.current {
            Some(cur) if self.smp1(point) => {
                // Staying on the road segment may still mean moving to a later edge of its chain.
                let (edge, proj) = self.net.follow_chain(cur.edge, point.pos);
                self.current = Some(CurrentEdge {
                    edge,
                    t: proj.t,
                    point_index: index,
                });
                (Some(edge), Step::Smp1)
            }
            Some(_) => match self.smp2(point) {
                Some(c) => {
                    self.select(c, index);
                    (Some(c.edge), Step::Smp2)
                }
                None => {
                    self.current = None;
                    self.streak = None;
                    (None, Step::Lost)
                }
            },
            None => match self.imp(point) {
                None => (None, Step::Skipped),
                Some(c) => {
                    let count = match self.streak {
                        Some((e, k)) if e == c.edge => k + 1,
                        _ => 1,
                    };
                    self.streak = Some((c.edge, count));
                    if count >= self.config.imp_confirmations.max(1) {
                        self.select(c, index);
                        self.streak = None;
                        (Some(c.edge), Step::Imp)
                    } else {
                        (None, Step::Pending)
                    }
                }
            },
        };
        self.previous = Some(point.clone());
        Ok(result)
    }
}

/// Matches a trajectory that already carries speed and heading.
pub fn match_trajectory_ahp(
    traj: &Trajectory,
    net: &RoadNetwork,
    config: &AhpConfig,
) -> Result<MatchedRoute> {
    run_online(AhpMatcher::new(net, config.clone()), traj, net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{GeoPoint, LocalProjection, PlanarPoint};
    use crate::network::test_util::planar_network;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn distance_band_lookup() {
        let m = comparison_matrix(&[2.0, 6.0], Factor::Distance);
        assert_eq!(m.get(0, 1), 3.0);
        assert_abs_diff_eq!(m.get(1, 0), 1.0 / 3.0);
        assert_eq!(m.get(0, 0), 1.0);
    }

    #[test]
    fn direction_band_lookup() {
        let m = comparison_matrix(&[5.0, 60.0], Factor::Direction);
        assert_eq!(m.get(0, 1), 4.0);
        assert_abs_diff_eq!(m.get(1, 0), 0.25);
    }

    #[test]
    fn single_candidate() {
        let m = comparison_matrix(&[4.2], Factor::Distance);
        assert_eq!(m.len(), 1);
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(ahp_weights(&m).0, vec![1.0]);
    }

    #[test]
    fn turn_rows() {
        let m = turn_matrix(&[true, false]);
        assert_eq!(m.get(0, 1), 9.0);
        assert_abs_diff_eq!(m.get(1, 0), 1.0 / 9.0);
        for flags in [[true, true], [false, false]] {
            let m = turn_matrix(&flags);
            assert!((0..2).all(|i| (0..2).all(|j| m.get(i, j) == 1.0)));
        }
    }

    #[test]
    fn weights_closed_forms() {
        let w = ahp_weights(
            &ComparisonMatrix::from_rows(&[vec![1.0, 3.0], vec![1.0 / 3.0, 1.0]]).unwrap(),
        );
        assert_abs_diff_eq!(w.0[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(w.0[1], 0.25, epsilon = 1e-12);
        let w = ahp_weights(
            &ComparisonMatrix::from_rows(&[vec![1.0, 9.0], vec![1.0 / 9.0, 1.0]]).unwrap(),
        );
        assert_abs_diff_eq!(w.0[0], 0.9, epsilon = 1e-12);
        let w = ahp_weights(&ComparisonMatrix::from_fn(4, |_, _| 1.0));
        assert!(w.0.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn from_rows_rejects_non_reciprocal() {
        assert!(ComparisonMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(ComparisonMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).is_err());
    }

    #[test]
    fn total_weight_urban() {
        let tw = total_weight(
            &AhpWeights(vec![0.75, 0.25]),
            &AhpWeights(vec![0.6, 0.4]),
            Some(&AhpWeights(vec![0.5, 0.5])),
            &EnvCoefficients::URBAN,
        );
        assert_abs_diff_eq!(tw.values[0], 0.5573, epsilon = 1e-12);
        assert_abs_diff_eq!(tw.values[1], 0.4427, epsilon = 1e-12);
        assert_eq!(tw.best, 0);
    }

    #[test]
    fn total_weight_ties_and_two_factor() {
        let w = AhpWeights(vec![0.5, 0.5]);
        let tw = total_weight(&w, &w, Some(&w), &EnvCoefficients::RURAL);
        assert_eq!(tw.values[0], tw.values[1]);
        assert_eq!(tw.best, 0);

        let tw = total_weight(
            &AhpWeights(vec![1.0, 0.0]),
            &AhpWeights(vec![0.0, 1.0]),
            None,
            &EnvCoefficients::URBAN,
        );
        assert_abs_diff_eq!(tw.values[0], 0.0806, epsilon = 1e-15);
        assert_abs_diff_eq!(tw.values[1], 0.3715, epsilon = 1e-15);
        assert_eq!(tw.best, 1);
    }

    #[test]
    fn legal_turn_dominates_when_other_factors_tie() {
        // Three candidates equally near and equally aligned; only one legal.
        let n = 3;
        let w_dist = ahp_weights(&comparison_matrix(&vec![5.0; n], Factor::Distance));
        let w_dir = ahp_weights(&comparison_matrix(&vec![20.0; n], Factor::Direction));
        let w_turn = ahp_weights(&turn_matrix(&[false, true, false]));
        let tw = total_weight(&w_dist, &w_dir, Some(&w_turn), &EnvCoefficients::URBAN);
        assert_eq!(tw.best, 1);
    }

    fn point(x: f64, y: f64, t: f64, speed: f64, heading: f64) -> TrajectoryPoint {
        let pr = LocalProjection::new(GeoPoint { lat: 0.0, lon: 0.0 });
        let pos = PlanarPoint::new(x, y);
        TrajectoryPoint {
            t,
            geo: pr.unproject(pos),
            pos,
            speed: Some(speed),
            heading: Some(heading),
        }
    }

    fn crossing() -> RoadNetwork {
        // East-west street crossed by a one-way north-south street at (0, 0).
        planar_network(
            &[
                ("w", -300.0, 0.0),
                ("c", 0.0, 0.0),
                ("e", 300.0, 0.0),
                ("s", 0.0, -300.0),
                ("n", 0.0, 300.0),
            ],
            &[
                ("wc", "w", "c", true),
                ("ce", "c", "e", true),
                ("sc", "s", "c", true),
                ("cn", "c", "n", true),
            ],
        )
    }

    #[test]
    fn imp_skips_slow_points() {
        let net = crossing();
        let pts = vec![
            point(-100.0, 1.0, 0.0, 1.0, 0.0),
            point(-90.0, 1.0, 1.0, 2.0, 0.0),
            point(-80.0, 1.0, 2.0, 5.0, 0.0),
            point(-70.0, 1.0, 3.0, 5.0, 0.0),
        ];
        let r = match_trajectory_ahp(&Trajectory::new(pts).unwrap(), &net, &AhpConfig::default())
            .unwrap();
        assert_eq!(r.steps[..3], [Step::Skipped, Step::Skipped, Step::Imp]);
        assert_eq!(r.assignments[2], net.edge_by_key("wc", true));
    }

    #[test]
    fn imp_prefers_aligned_road_at_crossing() {
        let net = crossing();
        let m = AhpMatcher::new(&net, AhpConfig::default());
        // Near the crossing but heading east, slightly west of the center.
        let c = m.imp(&point(-8.0, 1.0, 0.0, 10.0, 2.0)).unwrap();
        assert_eq!(c.edge, net.edge_by_key("wc", true).unwrap());
        let c = m.imp(&point(1.0, -8.0, 0.0, 10.0, 88.0)).unwrap();
        assert_eq!(c.edge, net.edge_by_key("sc", true).unwrap());
    }

    #[test]
    fn single_candidate_selected() {
        let net = crossing();
        let m = AhpMatcher::new(&net, AhpConfig::default());
        let c = m.imp(&point(-200.0, 10.0, 0.0, 10.0, 170.0)).unwrap();
        assert_eq!(c.edge, net.edge_by_key("wc", true).unwrap());
        assert!(m.imp(&point(-200.0, 100.0, 0.0, 10.0, 0.0)).is_none());
    }

    #[test]
    fn smp1_conditions() {
        let net = crossing();
        let wc = net.edge_by_key("wc", true).unwrap();
        let mut m = AhpMatcher::new(&net, AhpConfig::default());
        m.current = Some(CurrentEdge {
            edge: wc,
            t: 0.0,
            point_index: 0,
        });
        // wc's chain ends at c: 300 m from its tail.
        m.previous = Some(point(-300.0, 0.0, 0.0, 10.0, 0.0));
        // Δd = 300 - 10*25 = 50, Δh = 2
        assert!(m.smp1(&point(-50.0, 0.0, 25.0, 10.0, 2.0)));
        // Δd = 300 - 10*29 = 10
        assert!(!m.smp1(&point(-10.0, 0.0, 29.0, 10.0, 2.0)));
        // Heading change too large.
        assert!(!m.smp1(&point(-50.0, 0.0, 25.0, 10.0, 7.0)));
        // Stationary points always stay.
        assert!(m.smp1(&point(-10.0, 0.0, 29.0, 0.0, 120.0)));
    }

    #[test]
    fn smp2_turns_at_junction() {
        let net = crossing();
        let wc = net.edge_by_key("wc", true).unwrap();
        let mut m = AhpMatcher::new(&net, AhpConfig::default());
        m.current = Some(CurrentEdge {
            edge: wc,
            t: 0.95,
            point_index: 0,
        });
        m.previous = Some(point(-15.0, 0.0, 0.0, 10.0, 0.0));
        // Turned north just after the crossing.
        let c = m.smp2(&point(1.0, 12.0, 2.0, 10.0, 85.0)).unwrap();
        assert_eq!(c.edge, net.edge_by_key("cn", true).unwrap());
        assert!(m.smp2(&point(150.0, 150.0, 2.0, 10.0, 0.0)).is_none());
    }

    proptest! {
        #[test]
        fn weights_positive_and_normalized(upper in proptest::collection::vec(prop_oneof![1usize..10, 1usize..10], 0..15), n in 1usize..6) {
            let m = ComparisonMatrix::from_fn(n, |i, j| {
                let (a, b) = (i.min(j), i.max(j));
                let k = a * n + b;
                let v = upper.get(k % upper.len().max(1)).copied().unwrap_or(1) as f64;
                let v = if (a + b) % 2 == 0 { v } else { 1.0 / v };
                if i < j { v } else { 1.0 / v }
            });
            let w = ahp_weights(&m);
            prop_assert!(w.0.iter().all(|x| *x > 0.0));
            prop_assert!((w.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn argmax_scale_invariant(vals in proptest::collection::vec(0.0..1.0f64, 1..8), k in 0.01..100.0f64) {
            let scaled: Vec<f64> = vals.iter().map(|v| v * k).collect();
            prop_assert_eq!(argmax(&vals), argmax(&scaled));
        }
    }
}
