//! Mean route error over seeded synthetic drives on the 5x5 grid.
//!
//! Run with `cargo run --release -p mapmatch-core --example synthetic_eval`.

use mapmatch_core::harness::{
    generate_synthetic, route_error, run_pipeline, PipelineConfig, RouteShape, SyntheticSpec,
};
use mapmatch_core::Algorithm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RUNS: u64 = 100;

/// A random monotone walk from the south-west to the north-east corner,
/// which is always a shortest path on the grid.
fn staircase(seed: u64, size: usize) -> RouteShape {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x, mut y) = (0, 0);
    let mut nodes = vec![(x, y)];
    while x < size - 1 || y < size - 1 {
        if y == size - 1 || (x < size - 1 && rng.random_bool(0.5)) {
            x += 1;
        } else {
            y += 1;
        }
        nodes.push((x, y));
    }
    RouteShape::Nodes(nodes)
}

fn main() {
    let shapes: [(&str, fn(u64) -> RouteShape); 3] = [
        ("l-route", |_| RouteShape::LShape),
        ("staircase", |s| staircase(s, 5)),
        ("random walk", |_| RouteShape::Random { edges: 8 }),
    ];
    println!(
        "{:<12} {:>5} {:<6} {:>8} {:>8} {:>6}",
        "route", "sigma", "alg", "raw", "pruned", "exact"
    );
    for (name, shape) in shapes {
        for noise in [5.0, 10.0] {
            for alg in [Algorithm::Ahp, Algorithm::Fuzzy] {
                let (mut raw, mut pruned, mut exact) = (0.0, 0.0, 0);
                for seed in 0..RUNS {
                    let spec = SyntheticSpec {
                        seed,
                        noise_m: noise,
                        route: shape(seed),
                        ..Default::default()
                    };
                    let case = generate_synthetic(&spec).expect("valid spec");
                    let out = run_pipeline(&case.traj, &case.net, &PipelineConfig::new(alg))
                        .expect("matches");
                    raw += route_error(&out.raw.route, &case.truth, &case.net)
                        .expect("truth")
                        .err;
                    let err = route_error(&out.route.route, &case.truth, &case.net)
                        .expect("truth")
                        .err;
                    pruned += err;
                    exact += usize::from(err < 1e-9);
                }
                let n = RUNS as f64;
                println!(
                    "{name:<12} {noise:>5} {:<6} {:>8.4} {:>8.4} {exact:>3}/{RUNS}",
                    alg.to_string(),
                    raw / n,
                    pruned / n
                );
            }
        }
    }
}
