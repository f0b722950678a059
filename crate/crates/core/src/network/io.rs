use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value};

use super::RoadNetwork;
use crate::error::{Error, Result};
use crate::geo::GeoPoint;

#[derive(Debug, Deserialize)]
struct NodeRow {
    id: String,
    lat: f64,
    lon: f64,
}

#[derive(Debug, Deserialize)]
struct EdgeRow {
    id: String,
    from: String,
    to: String,
    oneway: u8,
}

fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(0)
}

/// Loads a network from `id,lat,lon` node CSV and `id,from,to,oneway` edge CSV.
///
/// Errors carry the 1-based line number of the offending row.
pub fn load_network(nodes: impl Read, edges: impl Read) -> Result<RoadNetwork> {
    let mut builder = RoadNetwork::builder();

    let mut rdr = csv::Reader::from_reader(nodes);
    let headers = rdr.headers()?.clone();
    for record in rdr.records() {
        let record = record?;
        let line = line_of(&record);
        let row: NodeRow = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::input("nodes", line, e.to_string()))?;
        let geo = GeoPoint::new(row.lat, row.lon)
            .map_err(|e| Error::input("nodes", line, e.to_string()))?;
        builder
            .add_node(row.id, geo)
            .map_err(|e| Error::input("nodes", line, e.to_string()))?;
    }

    let mut rdr = csv::Reader::from_reader(edges);
    let headers = rdr.headers()?.clone();
    for record in rdr.records() {
        let record = record?;
        let line = line_of(&record);
        let row: EdgeRow = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::input("edges", line, e.to_string()))?;
        let oneway = match row.oneway {
            0 => false,
            1 => true,
            other => {
                return Err(Error::input(
                    "edges",
                    line,
                    format!("oneway must be 0 or 1, got {other}"),
                ))
            }
        };
        builder
            .add_street(row.id, &row.from, &row.to, oneway)
            .map_err(|e| Error::input("edges", line, e.to_string()))?;
    }

    builder.build()
}

impl RoadNetwork {
    pub fn from_csv_files(nodes: impl AsRef<Path>, edges: impl AsRef<Path>) -> Result<RoadNetwork> {
        load_network(File::open(nodes)?, File::open(edges)?)
    }

    /// Writes the network back out in the CSV layout accepted by [`load_network`].
    pub fn write_csv(&self, nodes: impl Write, edges: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(nodes);
        w.write_record(["id", "lat", "lon"])?;
        for (_, n) in self.nodes() {
            w.write_record([n.key.clone(), n.geo.lat.to_string(), n.geo.lon.to_string()])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_writer(edges);
        w.write_record(["id", "from", "to", "oneway"])?;
        for (_, e) in self.edges().filter(|(_, e)| e.forward) {
            w.write_record([
                e.key.as_str(),
                self.node(e.from).key.as_str(),
                self.node(e.to).key.as_str(),
                if e.oneway { "1" } else { "0" },
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// GeoJSON FeatureCollection with one LineString per street.
    pub fn to_geojson(&self) -> Value {
        let features: Vec<Value> = self
            .edges()
            .filter(|(_, e)| e.forward)
            .map(|(_, e)| {
                let a = self.node(e.from).geo;
                let b = self.node(e.to).geo;
                json!({
                    "type": "Feature",
                    "geometry": {
                        "type": "LineString",
                        "coordinates": [[a.lon, a.lat], [b.lon, b.lat]],
                    },
                    "properties": { "id": e.key, "oneway": e.oneway },
                })
            })
            .collect();
        json!({ "type": "FeatureCollection", "features": features })
    }
}
