use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matching::ahp::{match_trajectory_ahp, AhpConfig};
use crate::matching::fuzzy::{match_trajectory_fuzzy, FuzzyConfig};
use crate::matching::{Algorithm, MatchedRoute};
use crate::network::RoadNetwork;
use crate::postprocess::{prune_route, RouteDiff};
use crate::preprocess::{preprocess, PreprocessConfig};
use crate::trajectory::{estimate_kinematics, Trajectory};

/// Everything needed to go from raw points to a final route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub algorithm: Algorithm,
    /// DBSCAN cleaning before matching; skipped when `None`.
    pub preprocess: Option<PreprocessConfig>,
    /// Branch pruning after matching.
    pub postprocess: bool,
    pub ahp: AhpConfig,
    pub fuzzy: FuzzyConfig,
}

impl PipelineConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        PipelineConfig {
            algorithm,
            ..Default::default()
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            algorithm: Algorithm::Ahp,
            preprocess: None,
            postprocess: true,
            ahp: AhpConfig::default(),
            fuzzy: FuzzyConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// The trajectory actually matched: cleaned, with kinematics filled in.
    pub trajectory: Trajectory,
    /// Matcher output before pruning.
    pub raw: MatchedRoute,
    pub route: MatchedRoute,
    pub diff: Option<RouteDiff>,
    pub warnings: Vec<String>,
}

/// Optional preprocessing, kinematics estimation, matching and optional pruning.
pub fn run_pipeline(
    traj: &Trajectory,
    net: &RoadNetwork,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    let mut warnings = Vec::new();
    let cleaned = match &config.preprocess {
        Some(pc) => {
            let out = preprocess(traj, pc)?;
            warnings.extend(out.warnings);
            if out.trajectory.len() < 2 {
                // Dense sampling of a moving vehicle can chain into one big "stay".
                let w = format!(
                    "preprocessing left {} of {} points; matching the original trajectory",
                    out.trajectory.len(),
                    traj.len()
                );
                log::warn!("{w}");
                warnings.push(w);
                traj.clone()
            } else {
                out.trajectory
            }
        }
        None => traj.clone(),
    };
    let trajectory = if cleaned.has_kinematics() && !cleaned.is_empty() {
        cleaned
    } else {
        estimate_kinematics(&cleaned)?
    };
    let raw = match config.algorithm {
        Algorithm::Ahp => match_trajectory_ahp(&trajectory, net, &config.ahp)?,
        Algorithm::Fuzzy => match_trajectory_fuzzy(&trajectory, net, &config.fuzzy)?,
    };
    let (route, diff) = if config.postprocess {
        let pruned = prune_route(&raw, net, Some(&trajectory))?;
        warnings.extend(pruned.warning);
        (pruned.route, Some(pruned.diff))
    } else {
        (raw.clone(), None)
    };
    Ok(PipelineOutput {
        trajectory,
        raw,
        route,
        diff,
        warnings,
    })
}
