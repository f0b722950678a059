use std::collections::HashMap;

use super::{EdgeId, NetworkEdge, NetworkNode, NodeId};
use crate::geo::PlanarPoint;

/// Uniform grid over edge bounding boxes and node positions.
///
/// Queries return a superset of the matching items; callers do the exact test.
#[derive(Debug, Default)]
pub struct GridIndex {
    cell: f64,
    edges: HashMap<(i64, i64), Vec<EdgeId>>,
    nodes: HashMap<(i64, i64), Vec<NodeId>>,
}

impl GridIndex {
    pub(crate) fn build(cell: f64, nodes: &[NetworkNode], edges: &[NetworkEdge]) -> Self {
        let mut index = GridIndex {
            cell,
            ..Default::default()
        };
        for (i, n) in nodes.iter().enumerate() {
            let key = index.cell_of(n.pos);
            index.nodes.entry(key).or_default().push(NodeId(i as u32));
        }
        for (i, e) in edges.iter().enumerate() {
            let (a, b) = (e.segment.a(), e.segment.b());
            let min = PlanarPoint::new(a.x.min(b.x), a.y.min(b.y));
            let max = PlanarPoint::new(a.x.max(b.x), a.y.max(b.y));
            for key in index.cells(min, max) {
                index.edges.entry(key).or_default().push(EdgeId(i as u32));
            }
        }
        index
    }

    fn cell_of(&self, p: PlanarPoint) -> (i64, i64) {
        (
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
        )
    }

    fn cells(&self, min: PlanarPoint, max: PlanarPoint) -> impl Iterator<Item = (i64, i64)> {
        let (x0, y0) = self.cell_of(min);
        let (x1, y1) = self.cell_of(max);
        (x0..=x1).flat_map(move |x| (y0..=y1).map(move |y| (x, y)))
    }

    /// Edges whose bounding-box cells overlap the box. May contain duplicates.
    pub fn edges_in_box(&self, min: PlanarPoint, max: PlanarPoint) -> Vec<EdgeId> {
        self.cells(min, max)
            .filter_map(|k| self.edges.get(&k))
            .flatten()
            .copied()
            .collect()
    }

    pub fn nodes_in_box(&self, min: PlanarPoint, max: PlanarPoint) -> Vec<NodeId> {
        self.cells(min, max)
            .filter_map(|k| self.nodes.get(&k))
            .flatten()
            .copied()
            .collect()
    }
}
