use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mapmatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mapmatch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn synth(dir: &Path, seed: u64) {
    let out = mapmatch(&[
        "synth",
        "--seed",
        &seed.to_string(),
        "--grid",
        "5x5",
        "--noise",
        "5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn match_args<'a>(case: &'a str, out: &'a str, alg: &'a str) -> Vec<String> {
    let f = |name: &str| format!("{case}/{name}");
    vec![
        "match".into(),
        "--algorithm".into(),
        alg.into(),
        "--nodes".into(),
        f("nodes.csv"),
        "--edges".into(),
        f("edges.csv"),
        "--trajectory".into(),
        f("trajectory.csv"),
        "--out".into(),
        out.into(),
    ]
}

fn run(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    mapmatch(&refs)
}

#[test]
fn synth_then_match_writes_geojson() {
    let tmp = tempfile::tempdir().unwrap();
    let case = tmp.path().join("case");
    synth(&case, 1);
    for alg in ["ahp", "fuzzy"] {
        let out = tmp.path().join(format!("{alg}.geojson"));
        let mut args = match_args(case.to_str().unwrap(), out.to_str().unwrap(), alg);
        args.extend(["--postprocess".into(), "prune".into()]);
        let o = run(&args);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(v["type"], "FeatureCollection");
        assert_eq!(v["features"].as_array().unwrap().len(), 6);
    }
}

#[test]
fn match_with_dbscan_preprocessing() {
    let tmp = tempfile::tempdir().unwrap();
    let case = tmp.path().join("case");
    synth(&case, 2);
    let out = tmp.path().join("r.geojson");
    let mut args = match_args(case.to_str().unwrap(), out.to_str().unwrap(), "ahp");
    args.extend(["--preprocess", "dbscan", "--eps", "15", "--min-pts", "3"].map(String::from));
    let o = run(&args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(out.is_file());
}

#[test]
fn bench_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    for seed in 0..3 {
        synth(&data.join(format!("c{seed}")), seed);
    }
    let report = tmp.path().join("report.json");
    let layers = tmp.path().join("layers");
    let o = mapmatch(&[
        "bench",
        "--dataset",
        data.to_str().unwrap(),
        "--algorithm",
        "fuzzy",
        "--report",
        report.to_str().unwrap(),
        "--geojson-dir",
        layers.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["scored"], 3);
    assert!(v["mean_err"].as_f64().unwrap() <= 0.05);
    assert!(layers.join("c0").join("prediction.geojson").is_file());
}

#[test]
fn missing_input_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let out = tmp.path().join("r.geojson");
    let o = run(&match_args(
        missing.to_str().unwrap(),
        out.to_str().unwrap(),
        "ahp",
    ));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_csv_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let case = tmp.path().join("case");
    synth(&case, 0);
    fs::write(case.join("edges.csv"), "id,from,to,oneway\nx,0_0,9_9,0\n").unwrap();
    let out = tmp.path().join("r.geojson");
    let o = run(&match_args(
        case.to_str().unwrap(),
        out.to_str().unwrap(),
        "ahp",
    ));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row"));
}

#[test]
fn unusable_flags_exit_1() {
    assert_eq!(
        mapmatch(&["match", "--algorithm", "hmm"]).status.code(),
        Some(1)
    );
    assert_eq!(
        mapmatch(&["synth", "--grid", "5by5", "--out", "/tmp/never"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(mapmatch(&["--help"]).status.code(), Some(0));
}

#[test]
fn far_away_trajectory_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let case = tmp.path().join("case");
    synth(&case, 0);
    // Shift every fix about 100 km north of the grid.
    let text = fs::read_to_string(case.join("trajectory.csv")).unwrap();
    let mut shifted = String::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            shifted.push_str(line);
        } else {
            let mut f: Vec<String> = line.split(',').map(String::from).collect();
            f[1] = (f[1].parse::<f64>().unwrap() + 1.0).to_string();
            shifted.push_str(&f.join(","));
        }
        shifted.push('\n');
    }
    fs::write(case.join("trajectory.csv"), shifted).unwrap();
    let out = tmp.path().join("r.geojson");
    let o = run(&match_args(
        case.to_str().unwrap(),
        out.to_str().unwrap(),
        "ahp",
    ));
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn convert_empty_dir_exits_1() {
    let src = tempfile::tempdir().unwrap();
    let dst = tempfile::tempdir().unwrap();
    let o = mapmatch(&[
        "convert-kcmmn",
        "--in",
        src.path().to_str().unwrap(),
        "--out",
        dst.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn convert_then_bench() {
    let src = tempfile::tempdir().unwrap();
    let dst = tempfile::tempdir().unwrap();
    // Three west-to-east arcs along one street with a drive along them.
    let d = src.path();
    fs::write(
        d.join("a.nodes"),
        "14.400 50.08\n14.402 50.08\n14.404 50.08\n14.406 50.08\n",
    )
    .unwrap();
    fs::write(d.join("a.arcs"), "0 1\n1 2\n2 3\n1 0\n").unwrap();
    let track: String = (0..40)
        .map(|i| format!("{} 50.08001 {}\n", 14.4002 + i as f64 * 0.00014, i))
        .collect();
    fs::write(d.join("a.track"), track).unwrap();
    fs::write(d.join("a.route"), "0\n1\n2\n").unwrap();
    let o = mapmatch(&[
        "convert-kcmmn",
        "--in",
        d.to_str().unwrap(),
        "--out",
        dst.path().to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report = dst.path().join("report.json");
    let o = mapmatch(&[
        "bench",
        "--dataset",
        dst.path().to_str().unwrap(),
        "--algorithm",
        "ahp",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["scored"], 1);
    assert_eq!(v["rows"][0]["err"].as_f64(), Some(0.0));
}
