//! Instance corpus shared by the benchmarks.

use sforest_core::{fixtures, generate_random, GenParams, Instance};

/// Named instances covering the fixtures and a few random sizes.
pub fn corpus() -> Vec<(String, Instance)> {
    let mut out = vec![
        ("ladder_10".to_owned(), fixtures::ladder(10).0),
        ("ladder_30".to_owned(), fixtures::ladder(30).0),
        ("path_100".to_owned(), fixtures::long_path(100).0),
    ];
    for n in [12, 20, 30] {
        out.push((format!("random_{n}"), random(n, 7)));
    }
    out
}

/// Random instance with `n` vertices and `n / 3` demands.
pub fn random(n: usize, seed: u64) -> Instance {
    generate_random(
        &GenParams {
            n,
            density: 0.3,
            demand_count: (n / 3).max(1),
            max_cost: 20,
            metric: false,
        },
        seed,
    )
    .expect("valid generator parameters")
}
