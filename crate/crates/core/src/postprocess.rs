//! Route cleanup after matching.
//!
//! The matched route is compared with the shortest path between its end
//! nodes. Edges off that path form residual components; those shaped like a
//! simple path are spurious branches and are dropped, while components that
//! contain a cycle may be genuine detours and are kept. Gaps between matched
//! pieces are filled by the shortest path itself.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geo::point_segment_distance;
use crate::matching::MatchedRoute;
use crate::network::{EdgeId, NodeId, RoadNetwork};
use crate::trajectory::Trajectory;

/// Relative surcharge on edges the matcher did not use, so that among
/// equally short paths the one overlapping the prediction wins.
const OFF_ROUTE_PENALTY: f64 = 1e-6;
const MAX_PASSES: usize = 8;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RouteDiff {
    pub shortest_path: Vec<EdgeId>,
    /// Removed residual components.
    pub branches: Vec<Vec<EdgeId>>,
    /// Residual edges retained because their component has a cycle.
    pub kept: Vec<EdgeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneResult {
    pub route: MatchedRoute,
    pub diff: RouteDiff,
    pub warning: Option<String>,
}

/// True iff the edges, viewed as an undirected simple graph, form a path.
///
/// Parallel edges between the same two nodes count once, so an edge and its
/// reverse twin make a single undirected edge.
pub fn is_linear_component(edges: &[EdgeId], net: &RoadNetwork) -> Result<bool> {
    if edges.is_empty() {
        return Err(Error::InvalidParameter("empty component".into()));
    }
    for &e in edges {
        net.check_edge(e)?;
    }
    let simple = undirected_pairs(edges, net);
    let mut nodes: BTreeSet<NodeId> = BTreeSet::new();
    let mut degree: HashMap<NodeId, usize> = HashMap::new();
    for &(u, v) in &simple {
        nodes.insert(u);
        nodes.insert(v);
        *degree.entry(u).or_default() += 1;
        *degree.entry(v).or_default() += 1;
    }
    if components(edges, net).len() != 1 {
        return Err(Error::Disconnected);
    }
    // Connected, so acyclic iff |E| = |V| - 1.
    Ok(simple.len() + 1 == nodes.len() && degree.values().all(|&d| d <= 2))
}

fn undirected_pairs(edges: &[EdgeId], net: &RoadNetwork) -> BTreeSet<(NodeId, NodeId)> {
    edges
        .iter()
        .map(|&e| {
            let edge = net.edge(e);
            (edge.from.min(edge.to), edge.from.max(edge.to))
        })
        .collect()
}

/// Undirected connected components, each in input order, ordered by their
/// first edge's position in `edges`.
fn components(edges: &[EdgeId], net: &RoadNetwork) -> Vec<Vec<EdgeId>> {
    let mut parent: HashMap<NodeId, NodeId> = HashMap::new();
    fn find(parent: &mut HashMap<NodeId, NodeId>, x: NodeId) -> NodeId {
        let p = *parent.entry(x).or_insert(x);
        if p == x {
            return x;
        }
        let root = find(parent, p);
        parent.insert(x, root);
        root
    }
    for &e in edges {
        let edge = net.edge(e);
        let (a, b) = (find(&mut parent, edge.from), find(&mut parent, edge.to));
        if a != b {
            parent.insert(a.max(b), a.min(b));
        }
    }
    let mut groups: Vec<(NodeId, Vec<EdgeId>)> = Vec::new();
    for &e in edges {
        let root = find(&mut parent, net.edge(e).from);
        match groups.iter_mut().find(|(r, _)| *r == root) {
            Some((_, g)) => g.push(e),
            None => groups.push((root, vec![e])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

/// Removes branch-shaped residue from a matched route.
///
/// The pass is repeated until the edge set stops changing, so the result is
/// a fixed point. Point assignments on removed edges move to the nearest
/// remaining edge when `traj` is given and are cleared otherwise. When the
/// end node cannot be reached from the start node the route is returned
/// unchanged with a warning.
pub fn prune_route(
    route: &MatchedRoute,
    net: &RoadNetwork,
    traj: Option<&Trajectory>,
) -> Result<PruneResult> {
    for &e in &route.route {
        net.check_edge(e)?;
    }
    if let Some(t) = traj {
        if t.len() != route.assignments.len() {
            return Err(Error::InvalidParameter(format!(
                "route has {} assignments but trajectory has {} points",
                route.assignments.len(),
                t.len()
            )));
        }
    }
    if route.route.is_empty() {
        return Ok(unchanged(route, "route is empty; nothing to prune"));
    }

    let mut current = route.clone();
    let mut diff = RouteDiff::default();
    let mut removed: Vec<Vec<EdgeId>> = Vec::new();
    for pass_no in 0..MAX_PASSES {
        let (start, end) = terminal_nodes(&current, net, traj);
        let Some((next, pass)) = prune_once(&current, start, end, net, traj)? else {
            if pass_no == 0 {
                return Ok(unchanged(
                    route,
                    &format!("no path from {start} to {end}; route left unpruned"),
                ));
            }
            break;
        };
        let stable = edge_set(&next.route) == edge_set(&current.route)
            && next.assignments == current.assignments;
        removed.extend(pass.branches.iter().cloned());
        diff.shortest_path = pass.shortest_path;
        diff.kept = pass.kept;
        current = next;
        if stable {
            break;
        }
    }
    diff.branches = removed;
    Ok(PruneResult {
        route: current,
        diff,
        warning: None,
    })
}

/// Start and end nodes for the shortest-path comparison.
///
/// With a trajectory these are the edge endpoints nearest to where the first
/// and last assigned points project, so a terminal edge the vehicle barely
/// entered does not move the route's ends. Without one, or when both land on
/// the same node, the route's own first and last nodes are used.
fn terminal_nodes(
    route: &MatchedRoute,
    net: &RoadNetwork,
    traj: Option<&Trajectory>,
) -> (NodeId, NodeId) {
    let fallback = (
        net.edge(route.route[0]).from,
        net.edge(*route.route.last().expect("route is non-empty"))
            .to,
    );
    let Some(traj) = traj else {
        return fallback;
    };
    let node_at = |i: usize, e: EdgeId| {
        let edge = net.edge(e);
        if point_segment_distance(traj.points()[i].pos, &edge.segment).t < 0.5 {
            edge.from
        } else {
            edge.to
        }
    };
    let mut assigned = route
        .assignments
        .iter()
        .enumerate()
        .filter_map(|(i, a)| a.map(|e| (i, e)));
    let (Some((i, first)), Some((j, last))) = (
        assigned.next(),
        route
            .assignments
            .iter()
            .rposition(|a| a.is_some())
            .map(|j| (j, route.assignments[j].unwrap())),
    ) else {
        return fallback;
    };
    let ends = (node_at(i, first), node_at(j, last));
    if ends.0 == ends.1 {
        fallback
    } else {
        ends
    }
}

fn unchanged(route: &MatchedRoute, why: &str) -> PruneResult {
    log::warn!("{why}");
    PruneResult {
        route: route.clone(),
        diff: RouteDiff::default(),
        warning: Some(why.to_string()),
    }
}

fn edge_set(edges: &[EdgeId]) -> BTreeSet<EdgeId> {
    edges.iter().copied().collect()
}

fn prune_once(
    route: &MatchedRoute,
    start: NodeId,
    end: NodeId,
    net: &RoadNetwork,
    traj: Option<&Trajectory>,
) -> Result<Option<(MatchedRoute, RouteDiff)>> {
    let on_route = edge_set(&route.route);
    let weight = |e: EdgeId| {
        let len = net.edge(e).length;
        if on_route.contains(&e) {
            len
        } else {
            len * (1.0 + OFF_ROUTE_PENALTY)
        }
    };
    let Some(path) = net.shortest_path_by(start, end, f64::INFINITY, weight)? else {
        return Ok(None);
    };
    // Subtraction happens in the undirected view: a reverse twin of a path
    // edge is the same street and leaves no residue.
    let on_path = undirected_pairs(&path.edges, net);

    let mut residual: Vec<EdgeId> = Vec::new();
    for &e in &route.route {
        let edge = net.edge(e);
        let pair = (edge.from.min(edge.to), edge.from.max(edge.to));
        if !on_path.contains(&pair) && !residual.contains(&e) {
            residual.push(e);
        }
    }
    let mut branches = Vec::new();
    let mut kept_components = Vec::new();
    for comp in components(&residual, net) {
        if is_linear_component(&comp, net)? {
            branches.push(comp);
        } else {
            kept_components.push(comp);
        }
    }

    let ordered = splice(&path.edges, &kept_components, net);
    let keep = edge_set(&ordered);
    let assignments = reassign(route, &keep, net, traj);
    let pruned = MatchedRoute {
        assignments,
        route: ordered,
        start: Some(start),
        end: Some(end),
        steps: route.steps.clone(),
    };
    let diff = RouteDiff {
        shortest_path: path.edges,
        branches,
        kept: kept_components.into_iter().flatten().collect(),
    };
    Ok(Some((pruned, diff)))
}

/// Path edges in order, with each kept component inserted after the first
/// path edge that ends where the component touches the path.
fn splice(path: &[EdgeId], comps: &[Vec<EdgeId>], net: &RoadNetwork) -> Vec<EdgeId> {
    let mut after: BTreeMap<usize, Vec<EdgeId>> = BTreeMap::new();
    let mut tail: Vec<EdgeId> = Vec::new();
    for comp in comps {
        let nodes: BTreeSet<NodeId> = comp
            .iter()
            .flat_map(|&e| [net.edge(e).from, net.edge(e).to])
            .collect();
        let slot = if path.is_empty() {
            None
        } else if nodes.contains(&net.edge(path[0]).from) {
            Some(0)
        } else {
            path.iter()
                .position(|&e| nodes.contains(&net.edge(e).to))
                .map(|i| i + 1)
        };
        match slot {
            Some(i) => after.entry(i).or_default().extend(comp),
            None => tail.extend(comp),
        }
    }
    let mut out = Vec::with_capacity(path.len() + tail.len());
    for i in 0..=path.len() {
        if let Some(c) = after.get(&i) {
            out.extend(c);
        }
        if i < path.len() {
            out.push(path[i]);
        }
    }
    out.extend(tail);
    out
}

fn reassign(
    route: &MatchedRoute,
    keep: &BTreeSet<EdgeId>,
    net: &RoadNetwork,
    traj: Option<&Trajectory>,
) -> Vec<Option<EdgeId>> {
    route
        .assignments
        .iter()
        .enumerate()
        .map(|(i, a)| match a {
            Some(e) if keep.contains(e) => Some(*e),
            Some(_) => traj.and_then(|t| nearest(t.points()[i].pos, keep, net)),
            None => None,
        })
        .collect()
}

fn nearest(
    p: crate::geo::PlanarPoint,
    keep: &BTreeSet<EdgeId>,
    net: &RoadNetwork,
) -> Option<EdgeId> {
    keep.iter()
        .map(|&e| (e, point_segment_distance(p, &net.edge(e).segment).distance))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(e, _)| e)
}
