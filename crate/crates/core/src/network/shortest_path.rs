//! Priority-queue Dijkstra over directed edge lengths.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{EdgeId, NodeId, RoadNetwork};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub edges: Vec<EdgeId>,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QueueEntry {
    cost: f64,
    node: NodeId,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on cost, ties broken by node id.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl RoadNetwork {
    /// Shortest directed path by edge length. `Ok(None)` when unreachable.
    pub fn shortest_path(&self, source: NodeId, target: NodeId) -> Result<Option<Path>> {
        self.shortest_path_by(source, target, f64::INFINITY, |e| self.edge(e).length)
    }

    /// Shortest-path length, giving up once the frontier exceeds `limit`.
    pub fn shortest_distance(
        &self,
        source: NodeId,
        target: NodeId,
        limit: f64,
    ) -> Result<Option<f64>> {
        Ok(self
            .shortest_path_by(source, target, limit, |e| self.edge(e).length)?
            .map(|p| p.length))
    }

    /// Dijkstra with a caller-supplied non-negative edge weight.
    ///
    /// The returned `length` is the sum of geometric edge lengths along the
    /// path, whatever weight was used to pick it.
    pub fn shortest_path_by<W>(
        &self,
        source: NodeId,
        target: NodeId,
        limit: f64,
        weight: W,
    ) -> Result<Option<Path>>
    where
        W: Fn(EdgeId) -> f64,
    {
        self.check_node(source)?;
        self.check_node(target)?;
        if source == target {
            return Ok(Some(Path {
                edges: Vec::new(),
                length: 0.0,
            }));
        }

        let n = self.node_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut via: Vec<Option<EdgeId>> = vec![None; n];
        let mut visited = vec![false; n];
        let mut queue = BinaryHeap::new();
        dist[source.index()] = 0.0;
        queue.push(QueueEntry {
            cost: 0.0,
            node: source,
        });

        while let Some(QueueEntry { cost, node: u }) = queue.pop() {
            if visited[u.index()] {
                continue;
            }
            visited[u.index()] = true;
            if u == target {
                break;
            }
            if cost > limit {
                return Ok(None);
            }
            for &e in self.out_edges(u) {
                let v = self.edge(e).to;
                let alt = cost + weight(e);
                if alt < dist[v.index()] {
                    dist[v.index()] = alt;
                    via[v.index()] = Some(e);
                }
                if !visited[v.index()] && dist[v.index()] == alt {
                    queue.push(QueueEntry { cost: alt, node: v });
                }
            }
        }

        if !visited[target.index()] || dist[target.index()] > limit {
            return Ok(None);
        }
        let mut edges = Vec::new();
        let mut cur = target;
        while cur != source {
            let e = via[cur.index()].expect("settled node has a predecessor");
            edges.push(e);
            cur = self.edge(e).from;
        }
        edges.reverse();
        let length = edges.iter().map(|&e| self.edge(e).length).sum();
        Ok(Some(Path { edges, length }))
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_util::planar_network;
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn triangle_prefers_two_short_edges() {
        // a-b and b-c are 100 m; a-c is a one-way detour with geometry of 300 m
        // via an extra node, so the two-edge path wins.
        let net = planar_network(
            &[
                ("a", 0.0, 0.0),
                ("b", 100.0, 0.0),
                ("c", 100.0, 100.0),
                ("d", 0.0, 200.0),
            ],
            &[
                ("ab", "a", "b", true),
                ("bc", "b", "c", true),
                ("ad", "a", "d", true),
                ("dc", "d", "c", true),
            ],
        );
        let a = net.node_by_key("a").unwrap();
        let c = net.node_by_key("c").unwrap();
        let p = net.shortest_path(a, c).unwrap().unwrap();
        assert_eq!(p.edges.len(), 2);
        assert_abs_diff_eq!(p.length, 200.0, epsilon = 1e-6);
    }

    #[test]
    fn source_equals_target() {
        let net = planar_network(
            &[("a", 0.0, 0.0), ("b", 1.0, 0.0)],
            &[("ab", "a", "b", true)],
        );
        let a = net.node_by_key("a").unwrap();
        let p = net.shortest_path(a, a).unwrap().unwrap();
        assert!(p.edges.is_empty());
        assert_eq!(p.length, 0.0);
    }

    #[test]
    fn oneway_blocks_path() {
        let net = planar_network(
            &[("a", 0.0, 0.0), ("b", 1.0, 0.0)],
            &[("ab", "a", "b", true)],
        );
        let a = net.node_by_key("a").unwrap();
        let b = net.node_by_key("b").unwrap();
        assert!(net.shortest_path(b, a).unwrap().is_none());
        assert!(net.shortest_path(a, NodeId(7)).is_err());
    }

    #[test]
    fn limit_cuts_search() {
        let net = planar_network(
            &[("a", 0.0, 0.0), ("b", 100.0, 0.0), ("c", 200.0, 0.0)],
            &[("ab", "a", "b", true), ("bc", "b", "c", true)],
        );
        let a = net.node_by_key("a").unwrap();
        let c = net.node_by_key("c").unwrap();
        assert!(net.shortest_distance(a, c, 150.0).unwrap().is_none());
        assert_abs_diff_eq!(
            net.shortest_distance(a, c, 250.0).unwrap().unwrap(),
            200.0,
            epsilon = 1e-6
        );
    }
}
