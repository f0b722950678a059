//! Converter for the KCMMN map-matching dataset layout.
//!
//! Each track comes as four whitespace-separated text files sharing a stem:
//! `.nodes` (`lon lat` per node, node id = line index), `.arcs` (`from to`
//! per directed arc, arc id = line index), `.track` (`lon lat t` per fix) and
//! `.route` (one arc id per line, the true route in order). Tracks may sit
//! directly in the input directory or one level down.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::dataset::write_case;
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::network::RoadNetwork;
use crate::trajectory::{Trajectory, TrajectoryPoint};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KcmmnConversion {
    /// Names of the written case directories.
    pub cases: Vec<String>,
    pub warnings: Vec<String>,
}

struct TrackFiles {
    name: String,
    nodes: PathBuf,
    arcs: PathBuf,
    track: PathBuf,
    route: PathBuf,
}

fn find_tracks(dir: &Path, out: &mut BTreeMap<String, TrackFiles>, depth: usize) -> Result<()> {
    let mut stems: BTreeMap<String, BTreeMap<String, PathBuf>> = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            if depth == 0 {
                find_tracks(&path, out, depth + 1)?;
            }
            continue;
        }
        let (Some(stem), Some(ext)) = (path.file_stem(), path.extension()) else {
            continue;
        };
        stems
            .entry(stem.to_string_lossy().into_owned())
            .or_default()
            .insert(ext.to_string_lossy().into_owned(), path.clone());
    }
    for (stem, mut files) in stems {
        let (Some(nodes), Some(arcs), Some(track), Some(route)) = (
            files.remove("nodes"),
            files.remove("arcs"),
            files.remove("track"),
            files.remove("route"),
        ) else {
            continue;
        };
        out.insert(
            stem.clone(),
            TrackFiles {
                name: stem,
                nodes,
                arcs,
                track,
                route,
            },
        );
    }
    Ok(())
}

fn rows(path: &Path, width: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let text = fs::read_to_string(path)?;
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < width {
            return Err(Error::input(
                &name,
                i + 1,
                format!("expected {width} fields, got {}", fields.len()),
            ));
        }
        let vals = fields[..width]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::input(&name, i + 1, format!("`{f}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push((i + 1, vals));
    }
    Ok(out)
}

fn convert_track(files: &TrackFiles, out_dir: &Path, warnings: &mut Vec<String>) -> Result<()> {
    let mut b = RoadNetwork::builder();
    let node_rows = rows(&files.nodes, 2)?;
    for (i, (line, v)) in node_rows.iter().enumerate() {
        let geo =
            GeoPoint::new(v[1], v[0]).map_err(|e| Error::input("nodes", *line, e.to_string()))?;
        b.add_node(i.to_string(), geo)?;
    }
    let mut skipped = Vec::new();
    for (i, (_, v)) in rows(&files.arcs, 2)?.iter().enumerate() {
        let (from, to) = (v[0] as usize, v[1] as usize);
        // Self-loops and zero-length arcs carry no geometry to match against.
        if b.add_street(i.to_string(), &from.to_string(), &to.to_string(), true)
            .is_err()
        {
            skipped.push(i);
        }
    }
    if !skipped.is_empty() {
        warnings.push(format!(
            "{}: skipped {} degenerate arcs",
            files.name,
            skipped.len()
        ));
    }
    let net = b.build()?;

    let mut points: Vec<TrajectoryPoint> = Vec::new();
    let mut dropped = 0;
    for (line, v) in rows(&files.track, 3)? {
        let geo =
            GeoPoint::new(v[1], v[0]).map_err(|e| Error::input("track", line, e.to_string()))?;
        if points.last().is_some_and(|p| v[2] <= p.t) {
            dropped += 1;
            continue;
        }
        points.push(TrajectoryPoint::new(v[2], geo, net.projection()));
    }
    if dropped > 0 {
        warnings.push(format!(
            "{}: dropped {dropped} fixes with non-increasing time",
            files.name
        ));
    }
    let traj = Trajectory::new(points)?;

    let mut truth = Vec::new();
    for (line, v) in rows(&files.route, 1)? {
        let key = (v[0] as usize).to_string();
        match net.edge_by_key(&key, true) {
            Some(e) => truth.push(e),
            None if skipped.contains(&(v[0] as usize)) => {}
            None => return Err(Error::input("route", line, format!("unknown arc {key}"))),
        }
    }
    write_case(&out_dir.join(&files.name), &net, &traj, &truth)
}

/// Converts every track found under `input` into a case directory under `output`.
pub fn convert_kcmmn(input: &Path, output: &Path) -> Result<KcmmnConversion> {
    if !input.is_dir() {
        return Err(Error::InvalidParameter(format!(
            "{} is not a directory",
            input.display()
        )));
    }
    let mut tracks = BTreeMap::new();
    find_tracks(input, &mut tracks, 0)?;
    let mut result = KcmmnConversion::default();
    if tracks.is_empty() {
        result
            .warnings
            .push(format!("no tracks found under {}", input.display()));
    }
    for files in tracks.values() {
        convert_track(files, output, &mut result.warnings)?;
        result.cases.push(files.name.clone());
    }
    Ok(result)
}
