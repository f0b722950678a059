use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mapmatch_core::harness::geojson::{points_layer, route_layer};
use mapmatch_core::harness::{
    convert_kcmmn, generate_synthetic, run_benchmark, run_pipeline, write_case, PipelineConfig,
    RouteShape, SyntheticSpec,
};
use mapmatch_core::matching::fuzzy::RuleProfile;
use mapmatch_core::preprocess::EpsChoice;
use mapmatch_core::{Algorithm, RoadNetwork, Trajectory};

const EXIT_INPUT: u8 = 1;
const EXIT_MATCHING: u8 = 2;

#[derive(Parser)]
#[command(
    name = "mapmatch",
    version,
    about = "Batch map matching of GPS trajectories"
)]
struct Cli {
    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Match one trajectory and write the route as GeoJSON.
    Match(MatchArgs),
    /// Run the pipeline over every case in a dataset directory.
    Bench(BenchArgs),
    /// Generate a synthetic grid case.
    Synth(SynthArgs),
    /// Convert a KCMMN-layout directory into dataset cases.
    ConvertKcmmn(ConvertArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Ahp,
    Fuzzy,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Ahp => Algorithm::Ahp,
            AlgorithmArg::Fuzzy => Algorithm::Fuzzy,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PreprocessArg {
    Dbscan,
    None,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PostprocessArg {
    Prune,
    None,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, value_enum)]
    algorithm: AlgorithmArg,
    /// JSON pipeline configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preprocess: Option<PreprocessArg>,
    /// DBSCAN radius in meters, or `auto` for elbow detection.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    min_pts: Option<usize>,
    #[arg(long)]
    elbow_theta: Option<f64>,
    #[arg(long)]
    elbow_degree: Option<usize>,
    #[arg(long, value_enum)]
    postprocess: Option<PostprocessArg>,
    /// Fuzzy rule base JSON file.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Built-in fuzzy rule set: standard, kcmmn or as-printed.
    #[arg(long)]
    rule_profile: Option<String>,
    /// Fuzzy along-link score above which a point stays on its edge.
    #[arg(long)]
    smp1_threshold: Option<f64>,
}

impl PipelineArgs {
    fn build(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text)
                    .map_err(mapmatch_core::Error::from)
                    .with_context(|| format!("parsing {}", path.display()))?
            }
            None => PipelineConfig::default(),
        };
        cfg.algorithm = self.algorithm.into();

        let wants_dbscan = match self.preprocess {
            Some(PreprocessArg::Dbscan) => true,
            Some(PreprocessArg::None) => false,
            None => cfg.preprocess.is_some(),
        };
        cfg.preprocess = if wants_dbscan {
            let mut pc = cfg.preprocess.unwrap_or_default();
            if let Some(eps) = &self.eps {
                pc.eps = parse_eps(eps)?;
            }
            if let Some(m) = self.min_pts {
                pc.min_pts = m;
            }
            if let Some(t) = self.elbow_theta {
                pc.elbow.theta = t;
            }
            if let Some(d) = self.elbow_degree {
                pc.elbow.degree = d;
            }
            Some(pc)
        } else {
            None
        };
        if let Some(p) = self.postprocess {
            cfg.postprocess = p == PostprocessArg::Prune;
        }
        if let Some(r) = &self.rules {
            cfg.fuzzy.rules_path = Some(r.clone());
        }
        if let Some(p) = &self.rule_profile {
            cfg.fuzzy.profile = p.parse::<RuleProfile>()?;
        }
        if let Some(t) = self.smp1_threshold {
            cfg.fuzzy.smp1_threshold = t;
        }
        Ok(cfg)
    }
}

fn parse_eps(s: &str) -> Result<EpsChoice> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(EpsChoice::Auto);
    }
    let v: f64 = s.parse().map_err(|_| {
        mapmatch_core::Error::InvalidParameter(format!("--eps must be `auto` or meters, got `{s}`"))
    })?;
    Ok(EpsChoice::Fixed(v))
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    nodes: PathBuf,
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write the matched points as a GeoJSON layer.
    #[arg(long)]
    points_out: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Directory for per-case prediction, truth and point layers.
    #[arg(long)]
    geojson_dir: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid size in nodes, e.g. 5x5.
    #[arg(long, default_value = "5x5")]
    grid: String,
    /// Position noise standard deviation in meters.
    #[arg(long, default_value_t = 5.0)]
    noise: f64,
    #[arg(long, default_value_t = 200.0)]
    block: f64,
    /// Sampling interval in seconds.
    #[arg(long, default_value_t = 1.0)]
    interval: f64,
    #[arg(long, default_value_t = 10.0)]
    speed: f64,
    /// `l` for the L-shaped route or `random:N` for an N-edge walk.
    #[arg(long, default_value = "l")]
    route: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run_match(args: &MatchArgs) -> Result<()> {
    let cfg = args.pipeline.build()?;
    let net = RoadNetwork::from_csv_files(&args.nodes, &args.edges)?;
    let traj = Trajectory::from_csv_file(&args.trajectory, net.projection())?;
    let out = run_pipeline(&traj, &net, &cfg)?;
    write_json(
        &args.out,
        &route_layer(&out.route.route, &net, "route", "#000000"),
    )?;
    if let Some(p) = &args.points_out {
        write_json(
            p,
            &points_layer(&out.trajectory, &out.route.assignments, &net, "#1f77b4"),
        )?;
    }
    println!(
        "matched {}/{} points onto {} edges ({:.0} m)",
        out.route.matched_count(),
        out.trajectory.len(),
        out.route.route.len(),
        out.route
            .route
            .iter()
            .map(|&e| net.edge(e).length)
            .sum::<f64>()
    );
    Ok(())
}

fn run_bench(args: &BenchArgs) -> Result<()> {
    let cfg = args.pipeline.build()?;
    let report = run_benchmark(&args.dataset, &cfg, args.geojson_dir.as_deref())?;
    write_json(&args.report, &serde_json::to_value(&report)?)?;
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "{} cases, {} scored, {} failed; mean Err {}, median Err {}",
        report.rows.len(),
        report.scored,
        report.failures,
        fmt(report.mean_err),
        fmt(report.median_err)
    );
    Ok(())
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let bad =
        || mapmatch_core::Error::InvalidParameter(format!("--grid must look like 5x5, got `{s}`"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((
        w.trim().parse().map_err(|_| bad())?,
        h.trim().parse().map_err(|_| bad())?,
    ))
}

fn parse_route(s: &str) -> Result<RouteShape> {
    if s.eq_ignore_ascii_case("l") {
        return Ok(RouteShape::LShape);
    }
    if let Some(n) = s.strip_prefix("random:") {
        if let Ok(edges) = n.parse() {
            return Ok(RouteShape::Random { edges });
        }
    }
    Err(mapmatch_core::Error::InvalidParameter(format!(
        "--route must be `l` or `random:N`, got `{s}`"
    ))
    .into())
}

fn run_synth(args: &SynthArgs) -> Result<()> {
    let (width, height) = parse_grid(&args.grid)?;
    let spec = SyntheticSpec {
        seed: args.seed,
        width,
        height,
        block_m: args.block,
        route: parse_route(&args.route)?,
        noise_m: args.noise,
        interval_s: args.interval,
        speed_mps: args.speed,
        ..Default::default()
    };
    let case = generate_synthetic(&spec)?;
    write_case(&args.out, &case.net, &case.traj, &case.truth)?;
    println!(
        "wrote {} points and a {}-edge route to {}",
        case.traj.len(),
        case.truth.len(),
        args.out.display()
    );
    Ok(())
}

fn run_convert(args: &ConvertArgs) -> Result<()> {
    let conv = convert_kcmmn(&args.input, &args.out)?;
    for w in &conv.warnings {
        log::warn!("{w}");
    }
    if conv.cases.is_empty() {
        bail!(mapmatch_core::Error::InvalidParameter(format!(
            "no KCMMN tracks found under {}",
            args.input.display()
        )));
    }
    println!(
        "converted {} tracks into {}",
        conv.cases.len(),
        args.out.display()
    );
    Ok(())
}

/// Input problems exit 1; anything that went wrong while matching exits 2.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err
        .chain()
        .find_map(|e| e.downcast_ref::<mapmatch_core::Error>())
    {
        Some(e) if !e.is_input_error() => EXIT_MATCHING,
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Match(a) => run_match(a),
        Command::Bench(a) => run_bench(a),
        Command::Synth(a) => run_synth(a),
        Command::ConvertKcmmn(a) => run_convert(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
