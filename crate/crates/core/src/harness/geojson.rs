//! GeoJSON layers for inspecting a match: predicted route, true route and points.

use serde_json::{json, Value};

use crate::network::{EdgeId, RoadNetwork};
use crate::trajectory::Trajectory;

/// One LineString per edge, in route order. `layer` and `color` go into
/// every feature's properties.
pub fn route_layer(edges: &[EdgeId], net: &RoadNetwork, layer: &str, color: &str) -> Value {
    let features: Vec<Value> = edges
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let edge = net.edge(e);
            let (a, b) = (net.node(edge.from).geo, net.node(edge.to).geo);
            json!({
                "type": "Feature",
                "geometry": { "type": "LineString", "coordinates": [[a.lon, a.lat], [b.lon, b.lat]] },
                "properties": {
                    "layer": layer,
                    "color": color,
                    "order": i,
                    "edge_id": edge.key,
                    "forward": edge.forward,
                    "length_m": edge.length,
                },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

/// One Point per trajectory fix with its assigned edge, if any.
pub fn points_layer(
    traj: &Trajectory,
    assignments: &[Option<EdgeId>],
    net: &RoadNetwork,
    color: &str,
) -> Value {
    let features: Vec<Value> = traj
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let edge = assignments.get(i).copied().flatten().map(|e| {
                let edge = net.edge(e);
                json!({ "id": edge.key, "forward": edge.forward })
            });
            json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [p.geo.lon, p.geo.lat] },
                "properties": {
                    "layer": "points",
                    "color": color,
                    "index": i,
                    "t": p.t,
                    "speed": p.speed,
                    "heading": p.heading,
                    "edge": edge,
                },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}
