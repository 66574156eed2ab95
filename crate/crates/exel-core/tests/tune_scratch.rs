// Temporary performance probe. Deleted before release.

use std::time::Instant;

use exel_core::explain::build_problem;
use exel_core::io::read_embedding_bundle;
use exel_core::partition::bridge_partition;
use exel_core::solver::{
    cross_validate, default_lambda_grid, lambda_path, solve, SolverConfig,
};

#[test]
#[ignore]
fn profile_cv() {
    let dir = std::path::Path::new("/tmp/e2e");
    let bundle = read_embedding_bundle(&dir.join("emb/g0000.embedding.json")).unwrap();
    let dataset = exel_core::io::read_graph_bundle(&dir.join("data.json")).unwrap();
    let graph = dataset
        .graphs
        .iter()
        .find(|g| g.id == "g0000")
        .unwrap();
    let partition = bridge_partition(graph);
    println!("groups {}", partition.m());
    let problem = build_problem(&bundle, &partition).unwrap();

    let tight = SolverConfig {
        tol: 1e-10,
        max_sweeps: 20_000,
        ..SolverConfig::default()
    };
    let loose = SolverConfig {
        tol: 1e-6,
        max_sweeps: 2_000,
        ..SolverConfig::default()
    };

    let grid = default_lambda_grid(&problem);

    let t0 = Instant::now();
    let sols = lambda_path(&problem, &grid, &tight).unwrap();
    println!(
        "path tight: {:?}, sweeps {:?}",
        t0.elapsed(),
        sols.iter().map(|s| s.sweeps).collect::<Vec<_>>()
    );

    let t0 = Instant::now();
    let sols = lambda_path(&problem, &grid, &loose).unwrap();
    println!(
        "path loose: {:?}, sweeps {:?}",
        t0.elapsed(),
        sols.iter().map(|s| s.sweeps).collect::<Vec<_>>()
    );

    let t0 = Instant::now();
    let cv = cross_validate(&problem, 4, &grid, 0xC0FFEE, &tight).unwrap();
    println!("cv tight: {:?} best {}", t0.elapsed(), cv.best_lambda);

    let t0 = Instant::now();
    let cv = cross_validate(&problem, 4, &grid, 0xC0FFEE, &loose).unwrap();
    println!("cv loose: {:?} best {}", t0.elapsed(), cv.best_lambda);

    let t0 = Instant::now();
    let sol = solve(
        &problem,
        &SolverConfig {
            lambda: cv.best_lambda,
            tol: 1e-10,
            max_sweeps: 20_000,
            ..SolverConfig::default()
        },
    );
    println!(
        "final solve: {:?} sweeps {} kkt {:.2e}",
        t0.elapsed(),
        sol.sweeps,
        sol.kkt_residual
    );
}
