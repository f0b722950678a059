//! Evaluation tooling: route error, synthetic data, datasets and benchmarks.

mod bench;
mod dataset;
pub mod geojson;
mod kcmmn;
mod metric;
mod pipeline;
mod synth;

pub use bench::{run_benchmark, BenchRow, BenchmarkReport};
pub use dataset::{list_cases, load_case, write_case, Case};
pub use kcmmn::{convert_kcmmn, KcmmnConversion};
pub use metric::{route_error, MatchError};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutput};
pub use synth::{generate_synthetic, grid_network, RouteShape, SyntheticCase, SyntheticSpec};
