use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{list_cases, load_case, Case};
use super::geojson::{points_layer, route_layer};
use super::metric::route_error;
use super::pipeline::{run_pipeline, PipelineConfig};
use crate::error::{Error, Result};
use crate::matching::Algorithm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub name: String,
    pub points: usize,
    pub matched_points: usize,
    pub d0: Option<f64>,
    pub d_minus: Option<f64>,
    pub d_plus: Option<f64>,
    /// Route error; a matching failure scores as an empty prediction.
    pub err: Option<f64>,
    pub wall_ms: f64,
    pub error: Option<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub algorithm: Algorithm,
    pub config: PipelineConfig,
    pub rows: Vec<BenchRow>,
    /// Over rows that have an `err`.
    pub mean_err: Option<f64>,
    pub median_err: Option<f64>,
    pub scored: usize,
    pub failures: usize,
    pub warnings: Vec<String>,
}

impl BenchmarkReport {
    fn aggregate(
        algorithm: Algorithm,
        config: PipelineConfig,
        rows: Vec<BenchRow>,
        warnings: Vec<String>,
    ) -> Self {
        let mut errs: Vec<f64> = rows.iter().filter_map(|r| r.err).collect();
        errs.sort_by(f64::total_cmp);
        let mean_err = (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64);
        let median_err = (!errs.is_empty()).then(|| {
            let m = errs.len() / 2;
            if errs.len() % 2 == 1 {
                errs[m]
            } else {
                (errs[m - 1] + errs[m]) / 2.0
            }
        });
        BenchmarkReport {
            algorithm,
            config,
            scored: errs.len(),
            failures: rows.iter().filter(|r| r.error.is_some()).count(),
            rows,
            mean_err,
            median_err,
            warnings,
        }
    }
}

fn evaluate(case: &Case, config: &PipelineConfig, geojson_dir: Option<&Path>) -> BenchRow {
    let start = Instant::now();
    let mut row = BenchRow {
        name: case.name.clone(),
        points: case.traj.len(),
        matched_points: 0,
        d0: None,
        d_minus: None,
        d_plus: None,
        err: None,
        wall_ms: 0.0,
        error: None,
        warnings: Vec::new(),
    };
    let outcome = run_pipeline(&case.traj, &case.net, config);
    let predicted = match &outcome {
        Ok(out) => {
            row.matched_points = out.route.matched_count();
            row.warnings = out.warnings.clone();
            out.route.route.clone()
        }
        Err(e) => {
            row.error = Some(e.to_string());
            Vec::new()
        }
    };
    // Input problems leave the row unscored; a failed match scores as empty.
    let scorable = !matches!(&outcome, Err(e) if e.is_input_error());
    if scorable {
        match route_error(&predicted, &case.truth, &case.net) {
            Ok(m) => {
                row.d0 = Some(m.d0);
                row.d_minus = Some(m.d_minus);
                row.d_plus = Some(m.d_plus);
                row.err = Some(m.err);
            }
            Err(e) => row.error = Some(e.to_string()),
        }
    }
    if let (Some(dir), Ok(out)) = (geojson_dir, &outcome) {
        if let Err(e) = write_layers(dir, case, out) {
            row.warnings.push(format!("could not write GeoJSON: {e}"));
        }
    }
    row.wall_ms = start.elapsed().as_secs_f64() * 1000.0;
    row
}

fn write_layers(dir: &Path, case: &Case, out: &super::pipeline::PipelineOutput) -> Result<()> {
    let dir = dir.join(&case.name);
    fs::create_dir_all(&dir)?;
    let write = |name: &str, v: serde_json::Value| -> Result<()> {
        fs::write(dir.join(name), serde_json::to_string(&v)?)?;
        Ok(())
    };
    write(
        "prediction.geojson",
        route_layer(&out.route.route, &case.net, "prediction", "#000000"),
    )?;
    write(
        "truth.geojson",
        route_layer(&case.truth, &case.net, "truth", "#2ca02c"),
    )?;
    write(
        "points.geojson",
        points_layer(
            &out.trajectory,
            &out.route.assignments,
            &case.net,
            "#1f77b4",
        ),
    )
}

/// Runs the pipeline on every case under `dataset` in parallel.
///
/// Rows come back sorted by case name whatever the thread count. When
/// `geojson_dir` is set, each case gets a subdirectory with its prediction,
/// truth and point layers.
pub fn run_benchmark(
    dataset: &Path,
    config: &PipelineConfig,
    geojson_dir: Option<&Path>,
) -> Result<BenchmarkReport> {
    if !dataset.is_dir() {
        return Err(Error::InvalidParameter(format!(
            "{} is not a directory",
            dataset.display()
        )));
    }
    let cases = list_cases(dataset)?;
    let mut warnings = Vec::new();
    if cases.is_empty() {
        let w = format!("no cases found under {}", dataset.display());
        log::warn!("{w}");
        warnings.push(w);
    }
    let mut rows: Vec<BenchRow> = cases
        .par_iter()
        .map(|path| match load_case(path) {
            Ok(case) => evaluate(&case, config, geojson_dir),
            Err(e) => BenchRow {
                name: path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                points: 0,
                matched_points: 0,
                d0: None,
                d_minus: None,
                d_plus: None,
                err: None,
                wall_ms: 0.0,
                error: Some(e.to_string()),
                warnings: Vec::new(),
            },
        })
        .collect();
    rows.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(BenchmarkReport::aggregate(
        config.algorithm,
        config.clone(),
        rows,
        warnings,
    ))
}
