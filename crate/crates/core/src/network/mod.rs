//! Directed road graph with planar geometry.
//!
//! Two-way streets are stored as a pair of directed edges that share the
//! street id and differ in their `forward` flag. The network is immutable once
//! built and can be shared freely between threads.

mod chains;
mod index;
mod io;
pub mod shortest_path;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{GeoPoint, LocalProjection, PlanarPoint, Projection, Segment};

pub use chains::RoadSegmentChain;
pub use index::GridIndex;
pub use io::load_network;
pub use shortest_path::Path;

/// Side of the spatial index cells, in meters.
pub const GRID_CELL_M: f64 = 250.0;
/// Radius used for map-environment classification, in meters.
pub const ENVIRONMENT_RADIUS_M: f64 = 200.0;
/// Junctions per km above which a neighborhood counts as urban.
pub const URBAN_RATIO: f64 = 6.81;
/// Junctions per km below which a neighborhood counts as rural.
pub const RURAL_RATIO: f64 = 2.88;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone)]
pub struct NetworkNode {
    pub key: String,
    pub geo: GeoPoint,
    pub pos: PlanarPoint,
}

#[derive(Debug, Clone)]
pub struct NetworkEdge {
    /// Street id from the input.
    pub key: String,
    /// False for the reverse direction of a two-way street.
    pub forward: bool,
    pub from: NodeId,
    pub to: NodeId,
    pub length: f64,
    pub oneway: bool,
    pub segment: Segment,
    pub heading: f64,
}

/// Urban / suburban / rural, decided from junction density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvironmentKind {
    Urban,
    Suburban,
    Rural,
}

impl EnvironmentKind {
    pub fn from_ratio(ratio: f64) -> Self {
        if ratio > URBAN_RATIO {
            EnvironmentKind::Urban
        } else if ratio < RURAL_RATIO {
            EnvironmentKind::Rural
        } else {
            EnvironmentKind::Suburban
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapEnvironment {
    pub kind: EnvironmentKind,
    /// Junctions per km of road, `N / L`.
    pub ratio: f64,
    pub junctions: usize,
    pub length_km: f64,
}

impl MapEnvironment {
    pub fn from_counts(junctions: usize, length_km: f64) -> Self {
        if length_km <= 0.0 {
            return MapEnvironment {
                kind: EnvironmentKind::Rural,
                ratio: 0.0,
                junctions,
                length_km,
            };
        }
        let ratio = junctions as f64 / length_km;
        MapEnvironment {
            kind: EnvironmentKind::from_ratio(ratio),
            ratio,
            junctions,
            length_km,
        }
    }
}

/// An edge found near a query point, with the point's projection onto it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearbyEdge {
    pub edge: EdgeId,
    pub projection: Projection,
}

#[derive(Debug)]
pub struct RoadNetwork {
    projection: LocalProjection,
    nodes: Vec<NetworkNode>,
    edges: Vec<NetworkEdge>,
    out_edges: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
    node_keys: HashMap<String, NodeId>,
    edge_keys: HashMap<(String, bool), EdgeId>,
    twins: Vec<Option<EdgeId>>,
    degrees: Vec<usize>,
    index: GridIndex,
    chains: Vec<RoadSegmentChain>,
    /// Chain index and distance from the chain start to the edge's tail.
    chain_of: Vec<(usize, f64)>,
}

impl RoadNetwork {
    pub fn builder() -> NetworkBuilder {
        NetworkBuilder::default()
    }

    pub fn projection(&self) -> &LocalProjection {
        &self.projection
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: NodeId) -> &NetworkNode {
        &self.nodes[id.index()]
    }

    pub fn edge(&self, id: EdgeId) -> &NetworkEdge {
        &self.edges[id.index()]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &NetworkNode)> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (NodeId(i as u32), n))
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &NetworkEdge)> {
        self.edges
            .iter()
            .enumerate()
            .map(|(i, e)| (EdgeId(i as u32), e))
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edges.len() as u32).map(EdgeId)
    }

    pub fn node_by_key(&self, key: &str) -> Option<NodeId> {
        self.node_keys.get(key).copied()
    }

    pub fn edge_by_key(&self, key: &str, forward: bool) -> Option<EdgeId> {
        self.edge_keys.get(&(key.to_string(), forward)).copied()
    }

    pub fn out_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.out_edges[node.index()]
    }

    pub fn in_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.in_edges[node.index()]
    }

    /// The opposite-direction edge between the same two nodes, if any.
    pub fn twin(&self, edge: EdgeId) -> Option<EdgeId> {
        self.twins[edge.index()]
    }

    pub fn check_node(&self, node: NodeId) -> Result<()> {
        if node.index() < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode(node.to_string()))
        }
    }

    pub fn check_edge(&self, edge: EdgeId) -> Result<()> {
        if edge.index() < self.edges.len() {
            Ok(())
        } else {
            Err(Error::UnknownEdge(edge.to_string()))
        }
    }

    /// Number of distinct undirected neighbors of `node`.
    pub fn junction_degree(&self, node: NodeId) -> Result<usize> {
        self.check_node(node)?;
        Ok(self.degrees[node.index()])
    }

    /// Junction points have degree other than 2; isolated nodes are ignored.
    pub fn is_junction(&self, node: NodeId) -> bool {
        let d = self.degrees[node.index()];
        d != 2 && d != 0
    }

    pub fn chains(&self) -> &[RoadSegmentChain] {
        &self.chains
    }

    /// The chain containing `edge`.
    pub fn chain_of(&self, edge: EdgeId) -> &RoadSegmentChain {
        &self.chains[self.chain_of[edge.index()].0]
    }

    /// Distance along the edge's chain from the point at fraction `t` of
    /// `edge` to the chain's downstream end node.
    pub fn distance_to_chain_end(&self, edge: EdgeId, t: f64) -> f64 {
        let (chain, offset) = self.chain_of[edge.index()];
        let along = offset + t * self.edges[edge.index()].length;
        (self.chains[chain].length - along).max(0.0)
    }

    /// Moves from `edge` down its chain while the next edge lies at least as
    /// close to `p`, returning the edge reached and the projection onto it.
    pub fn follow_chain(&self, edge: EdgeId, p: PlanarPoint) -> (EdgeId, Projection) {
        let chain = &self.chains[self.chain_of[edge.index()].0];
        let mut best = (edge, self.edges[edge.index()].segment.project(p));
        let Some(pos) = chain.edges.iter().position(|&e| e == edge) else {
            return best;
        };
        for &next in &chain.edges[pos + 1..] {
            let proj = self.edges[next.index()].segment.project(p);
            if proj.distance > best.1.distance {
                break;
            }
            best = (next, proj);
        }
        best
    }

    /// Edges whose geometry touches the square of side `2 * half_width`
    /// centered at `p`, ordered by edge id.
    pub fn candidate_edges(&self, p: PlanarPoint, half_width: f64) -> Vec<NearbyEdge> {
        let min = PlanarPoint::new(p.x - half_width, p.y - half_width);
        let max = PlanarPoint::new(p.x + half_width, p.y + half_width);
        let mut ids = self.index.edges_in_box(min, max);
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter()
            .filter(|&e| self.edges[e.index()].segment.intersects_box(min, max))
            .map(|e| NearbyEdge {
                edge: e,
                projection: self.edges[e.index()].segment.project(p),
            })
            .collect()
    }

    /// True iff a vehicle on `from` can continue onto `to`.
    ///
    /// `to` must leave the head node of `from`. Reversing back to the tail
    /// node of `from` counts as an illegal U-turn unless `allow_uturn`.
    pub fn turn_legal(&self, from: EdgeId, to: EdgeId, allow_uturn: bool) -> bool {
        let a = &self.edges[from.index()];
        let b = &self.edges[to.index()];
        b.from == a.to && (allow_uturn || b.to != a.from)
    }

    /// Junction density around `p` within [`ENVIRONMENT_RADIUS_M`].
    pub fn classify_environment(&self, p: PlanarPoint) -> MapEnvironment {
        let r = ENVIRONMENT_RADIUS_M;
        let min = PlanarPoint::new(p.x - r, p.y - r);
        let max = PlanarPoint::new(p.x + r, p.y + r);

        let junctions = self
            .index
            .nodes_in_box(min, max)
            .into_iter()
            .filter(|&n| self.is_junction(n) && self.nodes[n.index()].pos.distance(p) <= r)
            .count();

        let mut ids = self.index.edges_in_box(min, max);
        ids.sort_unstable();
        ids.dedup();
        let length_m: f64 = ids
            .into_iter()
            .filter(|&e| self.counts_as_street(e))
            .map(|e| self.edges[e.index()].segment.clipped_length_in_disc(p, r))
            .sum();

        MapEnvironment::from_counts(junctions, length_m / 1000.0)
    }

    /// One representative per undirected street: the lower id of a twin pair.
    fn counts_as_street(&self, e: EdgeId) -> bool {
        match self.twins[e.index()] {
            Some(t) => e < t,
            None => true,
        }
    }

    /// Total undirected street length in meters.
    pub fn street_length(&self) -> f64 {
        self.edge_ids()
            .filter(|&e| self.counts_as_street(e))
            .map(|e| self.edges[e.index()].length)
            .sum()
    }
}

#[derive(Debug, Default)]
pub struct NetworkBuilder {
    origin: Option<GeoPoint>,
    nodes: Vec<(String, GeoPoint)>,
    node_keys: HashMap<String, NodeId>,
    streets: Vec<(String, NodeId, NodeId, bool)>,
    street_keys: BTreeSet<String>,
}

impl NetworkBuilder {
    /// Fixes the origin of the planar frame. Defaults to the mean node position.
    pub fn origin(mut self, origin: GeoPoint) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn add_node(&mut self, key: impl Into<String>, geo: GeoPoint) -> Result<NodeId> {
        let key = key.into();
        if self.node_keys.contains_key(&key) {
            return Err(Error::InvalidParameter(format!(
                "duplicate node id `{key}`"
            )));
        }
        let id = NodeId(self.nodes.len() as u32);
        self.node_keys.insert(key.clone(), id);
        self.nodes.push((key, geo));
        Ok(id)
    }

    pub fn add_street(
        &mut self,
        key: impl Into<String>,
        from: &str,
        to: &str,
        oneway: bool,
    ) -> Result<()> {
        let key = key.into();
        if self.street_keys.contains(&key) {
            return Err(Error::InvalidParameter(format!(
                "duplicate edge id `{key}`"
            )));
        }
        let lookup = |k: &str| {
            self.node_keys.get(k).copied().ok_or_else(|| {
                Error::InvalidParameter(format!("edge `{key}` references missing node `{k}`"))
            })
        };
        let a = lookup(from)?;
        let b = lookup(to)?;
        if a == b {
            return Err(Error::InvalidParameter(format!(
                "edge `{key}` is a self-loop"
            )));
        }
        let (ga, gb) = (self.nodes[a.index()].1, self.nodes[b.index()].1);
        if ga == gb {
            return Err(Error::InvalidParameter(format!(
                "edge `{key}` has zero length"
            )));
        }
        self.street_keys.insert(key.clone());
        self.streets.push((key, a, b, oneway));
        Ok(())
    }

    pub fn build(self) -> Result<RoadNetwork> {
        let origin = match self.origin {
            Some(o) => o,
            None if self.nodes.is_empty() => GeoPoint { lat: 0.0, lon: 0.0 },
            None => {
                let n = self.nodes.len() as f64;
                let (lat, lon) = self
                    .nodes
                    .iter()
                    .fold((0.0, 0.0), |(la, lo), (_, g)| (la + g.lat, lo + g.lon));
                GeoPoint {
                    lat: lat / n,
                    lon: lon / n,
                }
            }
        };
        let projection = LocalProjection::new(origin);
        let nodes: Vec<NetworkNode> = self
            .nodes
            .into_iter()
            .map(|(key, geo)| NetworkNode {
                key,
                geo,
                pos: projection.project(geo),
            })
            .collect();

        let mut edges = Vec::with_capacity(self.streets.len() * 2);
        for (key, a, b, oneway) in self.streets {
            let mut push = |from: NodeId, to: NodeId, forward: bool| -> Result<()> {
                let segment = Segment::new(nodes[from.index()].pos, nodes[to.index()].pos)
                    .map_err(|_| {
                        Error::InvalidParameter(format!("edge `{key}` has zero length"))
                    })?;
                edges.push(NetworkEdge {
                    key: key.clone(),
                    forward,
                    from,
                    to,
                    length: segment.length(),
                    oneway,
                    heading: segment.heading(),
                    segment,
                });
                Ok(())
            };
            push(a, b, true)?;
            if !oneway {
                push(b, a, false)?;
            }
        }

        let mut out_edges = vec![Vec::new(); nodes.len()];
        let mut in_edges = vec![Vec::new(); nodes.len()];
        let mut edge_keys = HashMap::with_capacity(edges.len());
        let mut by_pair: HashMap<(NodeId, NodeId), EdgeId> = HashMap::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            let id = EdgeId(i as u32);
            out_edges[e.from.index()].push(id);
            in_edges[e.to.index()].push(id);
            edge_keys.insert((e.key.clone(), e.forward), id);
            by_pair.entry((e.from, e.to)).or_insert(id);
        }
        let twins = edges
            .iter()
            .map(|e| by_pair.get(&(e.to, e.from)).copied())
            .collect();

        let degrees = (0..nodes.len())
            .map(|n| {
                let mut neighbors: Vec<NodeId> = out_edges[n]
                    .iter()
                    .map(|e: &EdgeId| edges[e.index()].to)
                    .chain(in_edges[n].iter().map(|e: &EdgeId| edges[e.index()].from))
                    .collect();
                neighbors.sort_unstable();
                neighbors.dedup();
                neighbors.len()
            })
            .collect();

        let index = GridIndex::build(GRID_CELL_M, &nodes, &edges);

        let mut net = RoadNetwork {
            projection,
            node_keys: nodes
                .iter()
                .enumerate()
                .map(|(i, n)| (n.key.clone(), NodeId(i as u32)))
                .collect(),
            nodes,
            edges,
            out_edges,
            in_edges,
            edge_keys,
            twins,
            degrees,
            index,
            chains: Vec::new(),
            chain_of: Vec::new(),
        };
        let chains = chains::collapse(&net);
        let mut chain_of = vec![(0, 0.0); net.edges.len()];
        for (ci, chain) in chains.iter().enumerate() {
            let mut offset = 0.0;
            for &e in &chain.edges {
                chain_of[e.index()] = (ci, offset);
                offset += net.edges[e.index()].length;
            }
        }
        net.chains = chains;
        net.chain_of = chain_of;
        Ok(net)
    }
}


#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn node(net: &RoadNetwork, k: &str) -> NodeId {
        net.node_by_key(k).unwrap()
    }

    #[test]
    fn oneway_and_twoway_edges() {
        let one = planar_network(
            &[("a", 0.0, 0.0), ("b", 100.0, 0.0)],
            &[("s", "a", "b", true)],
        );
        assert_eq!(one.edge_count(), 1);
        let two = planar_network(
            &[("a", 0.0, 0.0), ("b", 100.0, 0.0)],
            &[("s", "a", "b", false)],
        );
        assert_eq!(two.edge_count(), 2);
        let fwd = two.edge_by_key("s", true).unwrap();
        let back = two.edge_by_key("s", false).unwrap();
        assert_eq!(two.twin(fwd), Some(back));
        assert_abs_diff_eq!(two.edge(fwd).length, 100.0, epsilon = 1e-6);
    }

    #[test]
    fn builder_rejects_bad_streets() {
        let mut b = RoadNetwork::builder();
        b.add_node("a", GeoPoint { lat: 0.0, lon: 0.0 }).unwrap();
        b.add_node("b", GeoPoint { lat: 0.0, lon: 0.0 }).unwrap();
        assert!(b.add_node("a", GeoPoint { lat: 1.0, lon: 0.0 }).is_err());
        assert!(b.add_street("s", "a", "zz", false).is_err());
        assert!(b.add_street("s", "a", "a", false).is_err());
        assert!(b.add_street("s", "a", "b", false).is_err());
    }

    #[test]
    fn degrees() {
        // Three-legged junction at c, plus a through node m.
        let net = planar_network(
            &[
                ("c", 0.0, 0.0),
                ("n", 0.0, 100.0),
                ("e", 100.0, 0.0),
                ("w", -100.0, 0.0),
                ("m", 0.0, -50.0),
                ("s", 0.0, -100.0),
            ],
            &[
                ("1", "c", "n", false),
                ("2", "c", "e", false),
                ("3", "w", "c", true),
                ("4", "s", "m", false),
                ("5", "m", "c", true),
            ],
        );
        assert_eq!(net.junction_degree(node(&net, "c")).unwrap(), 4);
        assert_eq!(net.junction_degree(node(&net, "n")).unwrap(), 1);
        assert_eq!(net.junction_degree(node(&net, "m")).unwrap(), 2);
        assert!(net.junction_degree(NodeId(99)).is_err());

        let y = planar_network(
            &[
                ("c", 0.0, 0.0),
                ("a", 0.0, 100.0),
                ("b", 100.0, -50.0),
                ("d", -100.0, -50.0),
            ],
            &[
                ("1", "c", "a", false),
                ("2", "c", "b", false),
                ("3", "c", "d", false),
            ],
        );
        assert_eq!(y.junction_degree(node(&y, "c")).unwrap(), 3);
    }

    #[test]
    fn candidates_in_square() {
        let net = grid(3, 3, 200.0);
        let center = node(&net, "1_1");
        let p = net.node(center).pos + PlanarPoint::new(5.0, 5.0);
        let c = net.candidate_edges(p, 30.0);
        // Four streets meet at the center, each in both directions.
        assert_eq!(c.len(), 8);
        let streets: BTreeSet<_> = c.iter().map(|n| net.edge(n.edge).key.clone()).collect();
        assert_eq!(streets.len(), 4);

        let far = net.candidate_edges(PlanarPoint::new(100.0, 100.0), 30.0);
        assert!(far.is_empty());

        let crossing = net.candidate_edges(PlanarPoint::new(100.0, 20.0), 30.0);
        assert_eq!(crossing.len(), 2);
        assert!(crossing.iter().all(|n| net.edge(n.edge).key == "h0_0"));
        assert_abs_diff_eq!(crossing[0].projection.distance, 20.0, epsilon = 1e-6);
    }

    #[test]
    fn turn_legality() {
        let net = planar_network(
            &[
                ("a", 0.0, 0.0),
                ("b", 100.0, 0.0),
                ("c", 200.0, 0.0),
                ("d", 0.0, 300.0),
                ("e", 100.0, 300.0),
            ],
            &[
                ("ab", "a", "b", false),
                ("bc", "b", "c", true),
                ("de", "d", "e", false),
            ],
        );
        let ab = net.edge_by_key("ab", true).unwrap();
        let ba = net.edge_by_key("ab", false).unwrap();
        let bc = net.edge_by_key("bc", true).unwrap();
        let de = net.edge_by_key("de", true).unwrap();
        assert!(net.turn_legal(ab, bc, false));
        assert!(!net.turn_legal(ab, de, false));
        assert!(!net.turn_legal(ab, ba, false));
        assert!(net.turn_legal(ab, ba, true));
        // bc is one-way: nothing legal leads back from c.
        assert!(!net.turn_legal(bc, ba, true));
    }

    #[test]
    fn environment_thresholds() {
        assert_eq!(
            MapEnvironment::from_counts(3, 0.5).kind,
            EnvironmentKind::Suburban
        );
        assert_eq!(
            MapEnvironment::from_counts(7, 1.0).kind,
            EnvironmentKind::Urban
        );
        assert_eq!(
            MapEnvironment::from_counts(2, 1.0).kind,
            EnvironmentKind::Rural
        );
        assert_eq!(EnvironmentKind::from_ratio(6.81), EnvironmentKind::Suburban);
        assert_eq!(EnvironmentKind::from_ratio(2.88), EnvironmentKind::Suburban);
        assert_eq!(
            MapEnvironment::from_counts(0, 0.0).kind,
            EnvironmentKind::Rural
        );
    }

    #[test]
    fn environment_counts_streets_once() {
        // A single two-way street through the disc, with dead ends outside.
        let net = planar_network(
            &[("a", -500.0, 0.0), ("b", 500.0, 0.0)],
            &[("s", "a", "b", false)],
        );
        let env = net.classify_environment(PlanarPoint::default());
        assert_eq!(env.junctions, 0);
        assert_abs_diff_eq!(env.length_km, 0.4, epsilon = 1e-9);

        // Star with center and three endpoints inside the disc: 4 junctions, 0.3 km.
        let star = planar_network(
            &[
                ("c", 0.0, 0.0),
                ("a", 100.0, 0.0),
                ("b", -100.0, 0.0),
                ("d", 0.0, 100.0),
            ],
            &[
                ("1", "c", "a", false),
                ("2", "c", "b", false),
                ("3", "c", "d", true),
            ],
        );
        let env = star.classify_environment(PlanarPoint::default());
        assert_eq!(env.junctions, 4);
        assert_abs_diff_eq!(env.length_km, 0.3, epsilon = 1e-9);
        assert_eq!(env.kind, EnvironmentKind::Urban);
    }

    proptest! {
        #[test]
        fn candidates_monotone_in_width(x in -100.0..500.0f64, y in -100.0..500.0f64, w1 in 1.0..150.0f64, extra in 0.0..150.0f64) {
            let net = grid(3, 3, 200.0);
            let p = PlanarPoint::new(x, y);
            let small: BTreeSet<_> = net.candidate_edges(p, w1).into_iter().map(|c| c.edge).collect();
            let large: BTreeSet<_> = net.candidate_edges(p, w1 + extra).into_iter().map(|c| c.edge).collect();
            prop_assert!(small.is_subset(&large));
        }
    }
}
