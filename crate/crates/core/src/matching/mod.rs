//! Online matchers and the types they share.
//!
//! Both matchers consume a trajectory one point at a time. The first points
//! go through an initial matching step (IMP). Once an edge is selected, each
//! new point is first checked against the current edge (SMP1) and, when that
//! fails, re-matched among the nearby edges (SMP2) before returning to SMP1.
//! A matcher only ever sees points up to the one being matched.

pub mod ahp;
pub mod fuzzy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{angle_diff, Projection};
use crate::network::{EdgeId, NearbyEdge, NodeId, RoadNetwork};
use crate::trajectory::{Trajectory, TrajectoryPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ahp,
    Fuzzy,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ahp" => Ok(Algorithm::Ahp),
            "fuzzy" => Ok(Algorithm::Fuzzy),
            other => Err(Error::InvalidParameter(format!(
                "unknown algorithm `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Ahp => "ahp",
            Algorithm::Fuzzy => "fuzzy",
        })
    }
}

/// Which stage of the control loop handled a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    /// IMP skipped the point (too slow, or no candidates yet).
    Skipped,
    /// IMP scored the point but has not confirmed an edge yet.
    Pending,
    Imp,
    Smp1,
    Smp2,
    /// SMP2 found no candidates; the matcher falls back to IMP.
    Lost,
}

/// A candidate edge together with the factors the matchers rank it by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateEdge {
    pub edge: EdgeId,
    pub projection: Projection,
    /// Distance from the point to the edge, meters.
    pub dist: f64,
    /// Difference between the point's heading and the edge's, degrees.
    pub heading_diff: f64,
    /// Whether the vehicle can legally continue onto this edge.
    pub turn_ok: bool,
}

impl CandidateEdge {
    pub(crate) fn new(
        net: &RoadNetwork,
        hit: NearbyEdge,
        point: &TrajectoryPoint,
        previous: Option<EdgeId>,
        allow_uturn: bool,
    ) -> Self {
        let edge = net.edge(hit.edge);
        CandidateEdge {
            edge: hit.edge,
            projection: hit.projection,
            dist: hit.projection.distance,
            heading_diff: angle_diff(point.heading_or_zero(), edge.heading),
            turn_ok: match previous {
                Some(prev) => prev == hit.edge || net.turn_legal(prev, hit.edge, allow_uturn),
                None => true,
            },
        }
    }
}

pub(crate) fn gather_candidates(
    net: &RoadNetwork,
    point: &TrajectoryPoint,
    half_width: f64,
    previous: Option<EdgeId>,
    allow_uturn: bool,
) -> Vec<CandidateEdge> {
    net.candidate_edges(point.pos, half_width)
        .into_iter()
        .map(|hit| CandidateEdge::new(net, hit, point, previous, allow_uturn))
        .collect()
}

/// The edge a matcher currently follows and where the last point fell on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentEdge {
    pub edge: EdgeId,
    /// Fraction along the edge of the last point's projection.
    pub t: f64,
    pub point_index: usize,
}

/// Output of a matcher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedRoute {
    /// Edge assigned to each trajectory point, `None` where unmatched.
    pub assignments: Vec<Option<EdgeId>>,
    /// Matched edges in order with consecutive repeats removed.
    pub route: Vec<EdgeId>,
    pub start: Option<NodeId>,
    pub end: Option<NodeId>,
    #[serde(default)]
    pub steps: Vec<Step>,
}

impl MatchedRoute {
    pub fn from_assignments(
        assignments: Vec<Option<EdgeId>>,
        steps: Vec<Step>,
        net: &RoadNetwork,
    ) -> Self {
        let mut route: Vec<EdgeId> = Vec::new();
        for e in assignments.iter().flatten() {
            if route.last() != Some(e) {
                route.push(*e);
            }
        }
        let start = route.first().map(|&e| net.edge(e).from);
        let end = route.last().map(|&e| net.edge(e).to);
        MatchedRoute {
            assignments,
            route,
            start,
            end,
            steps,
        }
    }

    pub fn matched_count(&self) -> usize {
        self.assignments.iter().filter(|a| a.is_some()).count()
    }
}

/// A matcher that takes points one at a time.
pub trait OnlineMatcher {
    /// Matches the next point, returning its edge if any.
    fn push(&mut self, point: &TrajectoryPoint) -> Result<(Option<EdgeId>, Step)>;
}

pub(crate) fn run_online<M: OnlineMatcher>(
    mut matcher: M,
    traj: &Trajectory,
    net: &RoadNetwork,
) -> Result<MatchedRoute> {
    if !traj.has_kinematics() {
        return Err(Error::InvalidParameter(
            "trajectory lacks speed/heading; estimate kinematics first".into(),
        ));
    }
    let mut assignments = Vec::with_capacity(traj.len());
    let mut steps = Vec::with_capacity(traj.len());
    for p in traj.points() {
        let (edge, step) = matcher.push(p)?;
        assignments.push(edge);
        steps.push(step);
    }
    if !traj.is_empty() && assignments.iter().all(Option::is_none) {
        return Err(Error::Matching(
            "no trajectory point could be matched to an edge".into(),
        ));
    }
    Ok(MatchedRoute::from_assignments(assignments, steps, net))
}

/// Runs the chosen matcher with its default configuration.
pub fn match_trajectory(
    traj: &Trajectory,
    net: &RoadNetwork,
    algorithm: Algorithm,
) -> Result<MatchedRoute> {
    match algorithm {
        Algorithm::Ahp => ahp::match_trajectory_ahp(traj, net, &ahp::AhpConfig::default()),
        Algorithm::Fuzzy => {
            fuzzy::match_trajectory_fuzzy(traj, net, &fuzzy::FuzzyConfig::default())
        }
    }
}
