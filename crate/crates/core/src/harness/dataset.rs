use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::network::{EdgeId, RoadNetwork};
use crate::trajectory::Trajectory;

pub const NODES_FILE: &str = "nodes.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const TRUTH_FILE: &str = "truth.csv";

/// One trajectory with its network and true route.
pub struct Case {
    pub name: String,
    pub net: RoadNetwork,
    pub traj: Trajectory,
    pub truth: Vec<EdgeId>,
}

/// Subdirectories of `dir` that hold a case, sorted by name.
pub fn list_cases(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() && path.join(TRAJECTORY_FILE).is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct TruthRow {
    edge_id: String,
    forward: u8,
}

pub fn load_case(dir: &Path) -> Result<Case> {
    let net = RoadNetwork::from_csv_files(dir.join(NODES_FILE), dir.join(EDGES_FILE))?;
    let traj = Trajectory::from_csv_file(dir.join(TRAJECTORY_FILE), net.projection())?;
    let mut rdr = csv::Reader::from_path(dir.join(TRUTH_FILE))?;
    let headers = rdr.headers()?.clone();
    let mut truth = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let row: TruthRow = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::input("truth", line, e.to_string()))?;
        let edge = net
            .edge_by_key(&row.edge_id, row.forward != 0)
            .ok_or_else(|| {
                Error::input("truth", line, format!("unknown edge `{}`", row.edge_id))
            })?;
        truth.push(edge);
    }
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Case {
        name,
        net,
        traj,
        truth,
    })
}

/// Writes a case in the layout read by [`load_case`]. Only positions and
/// timestamps of the trajectory are written, plus speed and heading when
/// every point carries them.
pub fn write_case(
    dir: &Path,
    net: &RoadNetwork,
    traj: &Trajectory,
    truth: &[EdgeId],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    net.write_csv(
        File::create(dir.join(NODES_FILE))?,
        File::create(dir.join(EDGES_FILE))?,
    )?;

    let mut w = csv::Writer::from_path(dir.join(TRAJECTORY_FILE))?;
    let kin = traj.has_kinematics() && !traj.is_empty();
    if kin {
        w.write_record(["t", "lat", "lon", "speed", "heading"])?;
    } else {
        w.write_record(["t", "lat", "lon"])?;
    }
    for p in traj.points() {
        let mut rec = vec![
            p.t.to_string(),
            p.geo.lat.to_string(),
            p.geo.lon.to_string(),
        ];
        if kin {
            rec.push(p.speed_or_zero().to_string());
            rec.push(p.heading_or_zero().to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut f = File::create(dir.join(TRUTH_FILE))?;
    writeln!(f, "edge_id,forward")?;
    for &e in truth {
        net.check_edge(e)?;
        let edge = net.edge(e);
        writeln!(f, "{},{}", edge.key, u8::from(edge.forward))?;
    }
    Ok(())
}
