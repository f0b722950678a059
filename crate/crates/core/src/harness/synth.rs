use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{GeoPoint, LocalProjection, PlanarPoint};
use crate::network::{EdgeId, RoadNetwork};
use crate::trajectory::{Trajectory, TrajectoryPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteShape {
    /// East along the second row, then north along the second-to-last column.
    LShape,
    /// Seeded walk of `edges` edges that never reverses or reuses a street.
    Random { edges: usize },
    /// Explicit node sequence as `(column, row)` grid coordinates.
    Nodes(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub seed: u64,
    /// Grid size in nodes.
    pub width: usize,
    pub height: usize,
    pub block_m: f64,
    pub route: RouteShape,
    /// Standard deviation of the isotropic position noise.
    pub noise_m: f64,
    pub interval_s: f64,
    pub speed_mps: f64,
    pub origin: GeoPoint,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 0,
            width: 5,
            height: 5,
            block_m: 200.0,
            route: RouteShape::LShape,
            noise_m: 5.0,
            interval_s: 1.0,
            speed_mps: 10.0,
            origin: GeoPoint {
                lat: 48.85,
                lon: 2.35,
            },
        }
    }
}

pub struct SyntheticCase {
    pub net: RoadNetwork,
    /// Positions and timestamps only; speed and heading are left to estimation.
    pub traj: Trajectory,
    pub truth: Vec<EdgeId>,
}

/// A grid of two-way streets. Node `i_j` sits `i` blocks east and `j` blocks
/// north of `origin`; streets are `h{i}_{j}` eastward and `v{i}_{j}` northward.
pub fn grid_network(
    width: usize,
    height: usize,
    block_m: f64,
    origin: GeoPoint,
) -> Result<RoadNetwork> {
    if width < 2 || height < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid needs at least 2x2 nodes, got {width}x{height}"
        )));
    }
    if !(block_m > 0.0) {
        return Err(Error::InvalidParameter(
            "block length must be positive".into(),
        ));
    }
    let proj = LocalProjection::new(origin);
    let mut b = RoadNetwork::builder().origin(origin);
    for j in 0..height {
        for i in 0..width {
            let p = PlanarPoint::new(i as f64 * block_m, j as f64 * block_m);
            b.add_node(format!("{i}_{j}"), proj.unproject(p))?;
        }
    }
    for j in 0..height {
        for i in 0..width {
            if i + 1 < width {
                b.add_street(
                    format!("h{i}_{j}"),
                    &format!("{i}_{j}"),
                    &format!("{}_{j}", i + 1),
                    false,
                )?;
            }
            if j + 1 < height {
                b.add_street(
                    format!("v{i}_{j}"),
                    &format!("{i}_{j}"),
                    &format!("{i}_{}", j + 1),
                    false,
                )?;
            }
        }
    }
    b.build()
}

fn edge_between(net: &RoadNetwork, a: (usize, usize), b: (usize, usize)) -> Result<EdgeId> {
    let from = net
        .node_by_key(&format!("{}_{}", a.0, a.1))
        .ok_or_else(|| Error::InvalidParameter(format!("route node {a:?} outside the grid")))?;
    let to = net
        .node_by_key(&format!("{}_{}", b.0, b.1))
        .ok_or_else(|| Error::InvalidParameter(format!("route node {b:?} outside the grid")))?;
    net.out_edges(from)
        .iter()
        .copied()
        .find(|&e| net.edge(e).to == to)
        .ok_or_else(|| {
            Error::InvalidParameter(format!("route nodes {a:?} and {b:?} are not adjacent"))
        })
}

fn l_shape(width: usize, height: usize) -> Vec<(usize, usize)> {
    let row = 1.min(height - 1);
    let col = width.saturating_sub(2).max(1);
    let mut nodes: Vec<(usize, usize)> = (0..=col).map(|i| (i, row)).collect();
    nodes.extend((row + 1..height).map(|j| (col, j)));
    nodes
}

fn random_walk(net: &RoadNetwork, edges: usize, rng: &mut ChaCha8Rng) -> Result<Vec<EdgeId>> {
    let n = net.node_count();
    let mut node = crate::network::NodeId(rng.random_range(0..n as u32));
    let mut route: Vec<EdgeId> = Vec::new();
    while route.len() < edges {
        let options: Vec<EdgeId> = net
            .out_edges(node)
            .iter()
            .copied()
            .filter(|&e| {
                let key = &net.edge(e).key;
                !route.iter().any(|&r| &net.edge(r).key == key)
            })
            .collect();
        let Some(&next) = options.choose(rng) else {
            break;
        };
        route.push(next);
        node = net.edge(next).to;
    }
    if route.is_empty() {
        return Err(Error::InvalidParameter("random walk found no edge".into()));
    }
    Ok(route)
}

/// Builds a grid, picks a route and samples a noisy constant-speed drive along it.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCase> {
    if !(spec.noise_m >= 0.0) || !(spec.interval_s > 0.0) || !(spec.speed_mps > 0.0) {
        return Err(Error::InvalidParameter(
            "noise must be >= 0, interval and speed > 0".into(),
        ));
    }
    let net = grid_network(spec.width, spec.height, spec.block_m, spec.origin)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let truth = match &spec.route {
        RouteShape::LShape => nodes_to_edges(&net, &l_shape(spec.width, spec.height))?,
        RouteShape::Nodes(nodes) => nodes_to_edges(&net, nodes)?,
        RouteShape::Random { edges } => random_walk(&net, (*edges).max(1), &mut rng)?,
    };

    let polyline: Vec<PlanarPoint> = std::iter::once(net.node(net.edge(truth[0]).from).pos)
        .chain(truth.iter().map(|&e| net.node(net.edge(e).to).pos))
        .collect();
    let total: f64 = truth.iter().map(|&e| net.edge(e).length).sum();

    let noise =
        Normal::new(0.0, spec.noise_m).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let proj = net.projection();
    let step = spec.speed_mps * spec.interval_s;
    // Tolerate projection round-off so a whole number of steps is not lost.
    let count = (total / step + 1e-9).floor() as usize + 1;
    let mut points = Vec::with_capacity(count);
    for k in 0..count {
        let s = k as f64 * step;
        let on_route = point_along(&polyline, s);
        let p = PlanarPoint::new(
            on_route.x + noise.sample(&mut rng),
            on_route.y + noise.sample(&mut rng),
        );
        points.push(TrajectoryPoint {
            t: k as f64 * spec.interval_s,
            geo: proj.unproject(p),
            pos: p,
            speed: None,
            heading: None,
        });
    }
    Ok(SyntheticCase {
        traj: Trajectory::new(points)?,
        net,
        truth,
    })
}

fn nodes_to_edges(net: &RoadNetwork, nodes: &[(usize, usize)]) -> Result<Vec<EdgeId>> {
    if nodes.len() < 2 {
        return Err(Error::InvalidParameter(
            "route needs at least two nodes".into(),
        ));
    }
    nodes
        .windows(2)
        .map(|w| edge_between(net, w[0], w[1]))
        .collect()
}

fn point_along(polyline: &[PlanarPoint], mut s: f64) -> PlanarPoint {
    for w in polyline.windows(2) {
        let len = w[0].distance(w[1]);
        if s <= len {
            return w[0] + (w[1] - w[0]) * (s / len);
        }
        s -= len;
    }
    *polyline.last().expect("route has at least one edge")
}
