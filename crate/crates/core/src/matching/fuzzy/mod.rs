//! Matcher that scores candidate edges with fuzzy rule bases.
//!
//! Three rule bases drive the loop. IMP scores candidates from speed,
//! heading error and perpendicular distance. SMP1 decides from the geometry
//! of the point relative to the current link whether the vehicle is still on
//! it. SMP2 rescores candidates at junctions, adding link connectivity and
//! the mismatch between the distance travelled and the network distance.

pub mod engine;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use engine::{
    defuzzify_tsk, defuzzify_weighted, rule_strength, Consequent, FisScore, Fuzzified, FuzzyRule,
    MembershipFunction, RuleActivation, RuleBase, RuleBaseSpec,
};

use super::{
    gather_candidates, run_online, CandidateEdge, CurrentEdge, MatchedRoute, OnlineMatcher, Step,
};
use crate::error::{Error, Result};
use crate::geo::{angle_diff, PlanarPoint};
use crate::network::{EdgeId, RoadNetwork};
use crate::trajectory::{Trajectory, TrajectoryPoint};

const STANDARD_RULES: &str = include_str!("../../../rules/standard.json");
const KCMMN_RULES: &str = include_str!("../../../rules/kcmmn.json");
const AS_PRINTED_RULES: &str = include_str!("../../../rules/as_printed.json");

/// Bundled rule sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleProfile {
    /// Uniform confidences with the two consistency amendments applied.
    #[default]
    Standard,
    /// Like `Standard`, but trusting distance and topology over estimated kinematics.
    Kcmmn,
    /// Without the two amendments: IMP rule 2 duplicates rule 1 and a large
    /// distance error scores high in SMP2.
    AsPrinted,
}

impl RuleProfile {
    pub fn json(self) -> &'static str {
        match self {
            RuleProfile::Standard => STANDARD_RULES,
            RuleProfile::Kcmmn => KCMMN_RULES,
            RuleProfile::AsPrinted => AS_PRINTED_RULES,
        }
    }
}

impl std::str::FromStr for RuleProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(RuleProfile::Standard),
            "kcmmn" => Ok(RuleProfile::Kcmmn),
            "as_printed" | "as-printed" => Ok(RuleProfile::AsPrinted),
            other => Err(Error::InvalidParameter(format!(
                "unknown rule profile `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BundleSpec {
    imp: RuleBaseSpec,
    smp1: RuleBaseSpec,
    smp2: RuleBaseSpec,
}

/// The IMP, SMP1 and SMP2 rule bases used together by the matcher.
#[derive(Debug, Clone)]
pub struct RuleBundle {
    pub imp: RuleBase,
    pub smp1: RuleBase,
    pub smp2: RuleBase,
}

impl RuleBundle {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: BundleSpec = serde_json::from_str(text)?;
        let named = |what: &str, spec| {
            RuleBase::new(spec).map_err(|e| Error::RuleBase(format!("{what}: {e}")))
        };
        Ok(RuleBundle {
            imp: named("imp", spec.imp)?,
            smp1: named("smp1", spec.smp1)?,
            smp2: named("smp2", spec.smp2)?,
        })
    }

    pub fn profile(profile: RuleProfile) -> Self {
        Self::from_json(profile.json()).expect("bundled rule set is valid")
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuzzyConfig {
    pub polygon_half_width_m: f64,
    /// SMP1 keeps the current link only while its score exceeds this.
    pub smp1_threshold: f64,
    /// Consecutive identical IMP winners needed before the first link is accepted.
    pub imp_confirmations: usize,
    pub profile: RuleProfile,
    /// Rule bundle file overriding `profile`.
    pub rules_path: Option<PathBuf>,
    /// Network search radius for the SMP2 distance error.
    pub distance_error_search_m: f64,
    pub allow_uturn: bool,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        FuzzyConfig {
            polygon_half_width_m: 30.0,
            smp1_threshold: 60.0,
            imp_confirmations: 3,
            profile: RuleProfile::Standard,
            rules_path: None,
            distance_error_search_m: 2000.0,
            allow_uturn: false,
        }
    }
}

impl FuzzyConfig {
    pub fn load_rules(&self) -> Result<RuleBundle> {
        match &self.rules_path {
            Some(p) => RuleBundle::from_file(p),
            None => Ok(RuleBundle::profile(self.profile)),
        }
    }
}

/// Crisp SMP1 inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smp1Inputs {
    pub speed: f64,
    pub heading_increment: f64,
    /// Angle at the link's start between the link and the line to the point.
    pub alpha: f64,
    /// Angle at the link's end between the reversed link and the line to the point.
    pub beta: f64,
    /// Remaining link length past the previous projection minus the distance
    /// covered since the previous point.
    pub delta_d: f64,
}

impl Smp1Inputs {
    pub fn as_pairs(&self) -> [(&'static str, f64); 5] {
        [
            ("speed", self.speed),
            ("heading_increment", self.heading_increment),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("delta_d", self.delta_d),
        ]
    }
}

/// Crisp SMP2 inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smp2Inputs {
    pub speed: f64,
    pub heading_error: f64,
    pub distance: f64,
    pub connectivity: f64,
    pub distance_error: f64,
}

impl Smp2Inputs {
    pub fn as_pairs(&self) -> [(&'static str, f64); 5] {
        [
            ("speed", self.speed),
            ("heading_error", self.heading_error),
            ("distance", self.distance),
            ("connectivity", self.connectivity),
            ("distance_error", self.distance_error),
        ]
    }
}

/// Angle at `apex` between the rays to `a` and to `b`, degrees in `[0, 180]`.
fn angle_at(apex: PlanarPoint, a: PlanarPoint, b: PlanarPoint) -> f64 {
    let u = a - apex;
    let v = b - apex;
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (u.dot(v) / (nu * nv)).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Score used to rank candidates; no signal ranks below everything.
fn rank(score: Option<FisScore>) -> f64 {
    score.map_or(f64::NEG_INFINITY, |s| s.0)
}

fn best_by_score(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

pub struct FuzzyMatcher<'a> {
    net: &'a RoadNetwork,
    config: FuzzyConfig,
    rules: RuleBundle,
    current: Option<CurrentEdge>,
    previous: Option<TrajectoryPoint>,
    next_index: usize,
    streak: Option<(EdgeId, usize)>,
}

impl<'a> FuzzyMatcher<'a> {
    pub fn new(net: &'a RoadNetwork, config: FuzzyConfig) -> Result<Self> {
        let rules = config.load_rules()?;
        Ok(Self::with_rules(net, config, rules))
    }

    pub fn with_rules(net: &'a RoadNetwork, config: FuzzyConfig, rules: RuleBundle) -> Self {
        FuzzyMatcher {
            net,
            config,
            rules,
            current: None,
            previous: None,
            next_index: 0,
            streak: None,
        }
    }

    pub fn current(&self) -> Option<CurrentEdge> {
        self.current
    }

    /// IMP score of every candidate, in candidate order.
    pub fn imp_scores(&self, point: &TrajectoryPoint, cands: &[CandidateEdge]) -> Result<Vec<f64>> {
        cands
            .iter()
            .map(|c| {
                let inputs = [
                    ("speed", point.speed_or_zero()),
                    ("heading_error", c.heading_diff),
                    ("distance", c.dist),
                ];
                Ok(rank(self.rules.imp.score(&inputs)?))
            })
            .collect()
    }

    /// Best IMP candidate for `point`, if any edge is near.
    pub fn imp(&self, point: &TrajectoryPoint) -> Result<Option<CandidateEdge>> {
        let cands = gather_candidates(
            self.net,
            point,
            self.config.polygon_half_width_m,
            None,
            self.config.allow_uturn,
        );
        if cands.is_empty() {
            return Ok(None);
        }
        let scores = self.imp_scores(point, &cands)?;
        Ok(Some(cands[best_by_score(&scores)]))
    }

    pub fn smp1_inputs(&self, point: &TrajectoryPoint) -> Option<Smp1Inputs> {
        let (cur, prev) = (self.current?, self.previous.as_ref()?);
        let edge = self.net.edge(cur.edge);
        let (a, b) = (edge.segment.a(), edge.segment.b());
        Some(Smp1Inputs {
            speed: point.speed_or_zero(),
            heading_increment: angle_diff(point.heading_or_zero(), prev.heading_or_zero()),
            alpha: angle_at(a, b, point.pos),
            beta: angle_at(b, a, point.pos),
            delta_d: (1.0 - cur.t) * edge.length - prev.speed_or_zero() * (point.t - prev.t),
        })
    }

    /// SMP1 score of `point` against the current link.
    pub fn smp1_score(&self, point: &TrajectoryPoint) -> Result<Option<FisScore>> {
        match self.smp1_inputs(point) {
            Some(inputs) => self.rules.smp1.score(&inputs.as_pairs()),
            None => Ok(None),
        }
    }

    /// Network distance from the previous projection to `c`'s projection,
    /// or infinity when it is beyond the search radius or unreachable.
    fn network_distance(&self, c: &CandidateEdge) -> Result<f64> {
        let Some(cur) = self.current else {
            return Ok(f64::INFINITY);
        };
        let from = self.net.edge(cur.edge);
        if c.edge == cur.edge {
            return Ok((c.projection.t - cur.t).abs() * from.length);
        }
        let to = self.net.edge(c.edge);
        let head = (1.0 - cur.t) * from.length;
        let tail = c.projection.t * to.length;
        let budget = self.config.distance_error_search_m;
        Ok(
            match self.net.shortest_distance(from.to, to.from, budget)? {
                Some(mid) => head + mid + tail,
                None => f64::INFINITY,
            },
        )
    }

    pub fn smp2_inputs(&self, point: &TrajectoryPoint, c: &CandidateEdge) -> Result<Smp2Inputs> {
        let travelled = self
            .previous
            .as_ref()
            .map_or(0.0, |p| p.pos.distance(point.pos));
        let network = self.network_distance(c)?;
        Ok(Smp2Inputs {
            speed: point.speed_or_zero(),
            heading_error: c.heading_diff,
            distance: c.dist,
            connectivity: if c.turn_ok { 1.0 } else { 0.0 },
            distance_error: (travelled - network).abs(),
        })
    }

    /// Best SMP2 candidate for `point`, if any edge is near.
    pub fn smp2(&self, point: &TrajectoryPoint) -> Result<Option<CandidateEdge>> {
        let previous = self.current.map(|c| c.edge);
        let cands = gather_candidates(
            self.net,
            point,
            self.config.polygon_half_width_m,
            previous,
            self.config.allow_uturn,
        );
        if cands.is_empty() {
            return Ok(None);
        }
        let scores = cands
            .iter()
            .map(|c| {
                Ok(rank(
                    self.rules
                        .smp2
                        .score(&self.smp2_inputs(point, c)?.as_pairs())?,
                ))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Some(cands[best_by_score(&scores)]))
    }

    fn select(&mut self, c: &CandidateEdge, index: usize) {
        self.current = Some(CurrentEdge {
            edge: c.edge,
            t: c.projection.t,
            point_index: index,
        });
    }
}

impl OnlineMatcher for FuzzyMatcher<'_> {
    fn push(&mut self, point: &TrajectoryPoint) -> Result<(Option<EdgeId>, Step)> {
        let index = self.next_index;
        self.next_index += 1;

        let result = if let Some(cur) = self.current {
            let stay = rank(self.smp1_score(point)?) > self.config.smp1_threshold;
            if stay {
                let t = self.net.edge(cur.edge).segment.project(point.pos).t;
                self.current = Some(CurrentEdge {
                    edge: cur.edge,
                    t,
                    point_index: index,
                });
                (Some(cur.edge), Step::Smp1)
            } else if let Some(c) = self.smp2(point)? {
                self.select(&c, index);
                (Some(c.edge), Step::Smp2)
            } else {
                self.current = None;
                self.streak = None;
                (None, Step::Lost)
            }
        } else {
            match self.imp(point)? {
                None => {
                    self.streak = None;
                    (None, Step::Skipped)
                }
                Some(c) => {
                    let count = match self.streak {
                        Some((e, k)) if e == c.edge => k + 1,
                        _ => 1,
                    };
                    self.streak = Some((c.edge, count));
                    if count >= self.config.imp_confirmations.max(1) {
                        self.select(&c, index);
                        self.streak = None;
                        (Some(c.edge), Step::Imp)
                    } else {
                        (None, Step::Pending)
                    }
                }
            }
        };
        self.previous = Some(point.clone());
        Ok(result)
    }
}

/// Matches a trajectory that already carries speed and heading.
pub fn match_trajectory_fuzzy(
    traj: &Trajectory,
    net: &RoadNetwork,
    config: &FuzzyConfig,
) -> Result<MatchedRoute> {
    run_online(FuzzyMatcher::new(net, config.clone())?, traj, net)
}
