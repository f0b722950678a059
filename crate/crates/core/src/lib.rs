//! Online map matching of GPS trajectories onto a directed road network.
//!
//! Two matchers share the same initial / along-link / junction control loop:
//! [`matching::ahp`] ranks candidate edges with pairwise-comparison matrices,
//! and [`matching::fuzzy`] scores them with sigmoidal fuzzy rule bases.
//! Around them sit DBSCAN trajectory cleaning ([`preprocess`]), shortest-path
//! route pruning ([`postprocess`]) and an evaluation harness ([`harness`]).

pub mod error;
pub mod geo;
pub mod harness;
pub mod matching;
pub mod network;
pub mod postprocess;
pub mod preprocess;
pub mod trajectory;

pub use error::{Error, Result};
pub use geo::{GeoPoint, LocalProjection, PlanarPoint};
pub use matching::{Algorithm, MatchedRoute};
pub use network::{EdgeId, NodeId, RoadNetwork};
pub use trajectory::{Trajectory, TrajectoryPoint};
