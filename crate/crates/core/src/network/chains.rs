//! Road segments: maximal directed runs of edges through degree-2 nodes.

use std::collections::HashSet;

use super::{EdgeId, NodeId, RoadNetwork};

/// A maximal directed chain of edges whose interior nodes all have degree 2.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadSegmentChain {
    pub edges: Vec<EdgeId>,
    pub start: NodeId,
    pub end: NodeId,
    pub interior: Vec<NodeId>,
    pub length: f64,
}

/// Continuation of `e` through its head node, if the head is an
/// intermediary point.
fn successor(net: &RoadNetwork, e: EdgeId) -> Option<EdgeId> {
    let edge = net.edge(e);
    let v = edge.to;
    if net.degrees[v.index()] != 2 {
        return None;
    }
    net.out_edges(v)
        .iter()
        .copied()
        .find(|&f| net.edge(f).to != edge.from)
}

fn has_predecessor(net: &RoadNetwork, e: EdgeId) -> bool {
    let edge = net.edge(e);
    let u = edge.from;
    net.degrees[u.index()] == 2 && net.in_edges(u).iter().any(|&g| net.edge(g).from != edge.to)
}

pub(crate) fn collapse(net: &RoadNetwork) -> Vec<RoadSegmentChain> {
    let mut visited: HashSet<EdgeId> = HashSet::with_capacity(net.edge_count());
    let mut chains = Vec::new();

    let walk = |start: EdgeId, visited: &mut HashSet<EdgeId>| {
        let mut edges = vec![start];
        visited.insert(start);
        let mut cur = start;
        while let Some(next) = successor(net, cur) {
            if !visited.insert(next) {
                break;
            }
            edges.push(next);
            cur = next;
        }
        let interior = edges[..edges.len() - 1]
            .iter()
            .map(|&e| net.edge(e).to)
            .collect();
        RoadSegmentChain {
            start: net.edge(start).from,
            end: net.edge(cur).to,
            length: edges.iter().map(|&e| net.edge(e).length).sum(),
            edges,
            interior,
        }
    };

    for e in net.edge_ids() {
        if !visited.contains(&e) && !has_predecessor(net, e) {
            chains.push(walk(e, &mut visited));
        }
    }
    // Whatever is left lies on closed loops of degree-2 nodes.
    for e in net.edge_ids() {
        if !visited.contains(&e) {
            chains.push(walk(e, &mut visited));
        }
    }
    chains
}

#[cfg(test)]
mod tests {
    use super::super::test_util::*;
    use super::*;
    use crate::geo::PlanarPoint;
    use std::collections::BTreeMap;

    fn sorted_edges(net: &RoadNetwork) -> Vec<EdgeId> {
        let mut all: Vec<EdgeId> = net.chains().iter().flat_map(|c| c.edges.clone()).collect();
        all.sort();
        all
    }

    /// Counts maximal undirected paths through degree-2 nodes by brute force.
    fn undirected_chain_count(adj: &BTreeMap<u32, Vec<u32>>) -> usize {
        let mut used = std::collections::BTreeSet::new();
        let mut count = 0;
        for (&u, ns) in adj {
            for &v in ns {
                let key = (u.min(v), u.max(v));
                if used.contains(&key) {
                    continue;
                }
                count += 1;
                used.insert(key);
                // Extend in both directions while the endpoint has degree 2.
                for (mut prev, mut cur) in [(u, v), (v, u)] {
                    while adj[&cur].len() == 2 {
                        let next = *adj[&cur].iter().find(|&&n| n != prev).unwrap();
                        let k = (cur.min(next), cur.max(next));
                        if !used.insert(k) {
                            break;
                        }
                        prev = cur;
                        cur = next;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn path_collapses_to_one_chain() {
        let net = planar_network(
            &[("a", 0.0, 0.0), ("b", 100.0, 0.0), ("c", 200.0, 10.0)],
            &[("ab", "a", "b", true), ("bc", "b", "c", true)],
        );
        assert_eq!(net.chains().len(), 1);
        let c = &net.chains()[0];
        assert_eq!(net.node(c.start).key, "a");
        assert_eq!(net.node(c.end).key, "c");
        assert_eq!(c.interior.len(), 1);
    }

    #[test]
    fn y_junction_has_three_chains_per_direction() {
        let net = planar_network(
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
        assert_eq!(net.chains().len(), 6);
        assert!(net.chains().iter().all(|c| c.edges.len() == 1));
    }

    #[test]
    fn grid_chain_count_matches_enumeration() {
        let net = grid(3, 3, 100.0);
        let mut adj: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (_, e) in net.edges().filter(|(_, e)| e.forward) {
            adj.entry(e.from.0).or_default().push(e.to.0);
            adj.entry(e.to.0).or_default().push(e.from.0);
        }
        let undirected = undirected_chain_count(&adj);
        assert_eq!(undirected, 8);
        assert_eq!(net.chains().len(), 2 * undirected);
    }

    #[test]
    fn chains_partition_edges() {
        for net in [grid(4, 3, 50.0), grid(2, 2, 10.0), grid(5, 1, 10.0)] {
            let all = sorted_edges(&net);
            let expected: Vec<EdgeId> = net.edge_ids().collect();
            assert_eq!(all, expected);
            for c in net.chains() {
                for n in &c.interior {
                    assert_eq!(net.junction_degree(*n).unwrap(), 2);
                }
            }
        }
    }

    #[test]
    fn closed_loop_still_covered() {
        let net = planar_network(
            &[("a", 0.0, 0.0), ("b", 100.0, 0.0), ("c", 50.0, 80.0)],
            &[
                ("1", "a", "b", true),
                ("2", "b", "c", true),
                ("3", "c", "a", true),
            ],
        );
        assert_eq!(sorted_edges(&net).len(), 3);
        assert_eq!(net.chains().len(), 1);
    }

    #[test]
    fn distance_to_chain_end_walks_the_chain() {
        let net = planar_network(
            &[
                ("a", 0.0, 0.0),
                ("b", 100.0, 0.0),
                ("c", 300.0, 0.0),
                ("x", 300.0, 100.0),
                ("y", 300.0, -100.0),
            ],
            &[
                ("ab", "a", "b", true),
                ("bc", "b", "c", true),
                ("cx", "c", "x", true),
                ("cy", "c", "y", true),
            ],
        );
        let ab = net.edge_by_key("ab", true).unwrap();
        approx::assert_abs_diff_eq!(net.distance_to_chain_end(ab, 0.5), 250.0, epsilon = 1e-6);
    }

    #[test]
    fn follow_chain_stops_at_the_nearest_edge() {
        let net = planar_network(
            &[
                ("a", 0.0, 0.0),
                ("b", 100.0, 0.0),
                ("c", 200.0, 0.0),
                ("d", 300.0, 0.0),
            ],
            &[
                ("ab", "a", "b", true),
                ("bc", "b", "c", true),
                ("cd", "c", "d", true),
            ],
        );
        let ab = net.edge_by_key("ab", true).unwrap();
        let bc = net.edge_by_key("bc", true).unwrap();
        let (e, p) = net.follow_chain(ab, PlanarPoint::new(150.0, 3.0));
        assert_eq!(e, bc);
        approx::assert_abs_diff_eq!(p.t, 0.5, epsilon = 1e-9);
        assert_eq!(net.follow_chain(ab, PlanarPoint::new(40.0, 3.0)).0, ab);
    }
}
