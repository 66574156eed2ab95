//! Per-graph importance estimation on top of the Group Lasso solver.
//!
//! The pipeline: regress the graph embedding z on the node embedding columns
//! Phi under a group penalty, average the coefficients within each group to a
//! per-group score beta, threshold |beta| to pick the active groups, and
//! optionally shrink the picked node set under a coverage budget.

use crate::graph::Partition;
use crate::io::EmbeddingBundle;
use crate::partition::singleton_partition;
use crate::solver::{
    cross_validate, default_lambda_grid, lambda_path, RegressionProblem, SolverConfig,
};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Group-score threshold applied to |beta|.
pub const DEFAULT_DELTA: f64 = 1e-5;
/// Coverage budget for [`select_by_coverage`].
pub const DEFAULT_COVERAGE_CAP: f64 = 0.70;
/// Node budget for [`top_fraction_nodes`].
pub const DEFAULT_TOP_FRACTION: f64 = 0.30;

/// Folds used when lambda is chosen automatically.
const CV_FOLDS: usize = 4;
/// Seed for the CV row shuffle. Fixed so reports are a pure function of
/// their inputs.
const CV_SEED: u64 = 0xC0FFEE;

/// How to pick the penalty weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSpec {
    Fixed(f64),
    /// 4-fold cross-validation over the default 20-point log grid.
    AutoCv,
}

impl std::str::FromStr for LambdaSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(LambdaSpec::AutoCv);
        }
        let value: f64 = s
            .parse()
            .map_err(|_| Error::Invalid(format!("bad lambda {s:?}: expected `auto` or a number")))?;
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Invalid(format!(
                "lambda must be finite and nonnegative, got {value}"
            )));
        }
        Ok(LambdaSpec::Fixed(value))
    }
}

/// One graph's explanation. `groups` carries the partition the scores refer
/// to so downstream selection does not need the partition file again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub graph_id: String,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub selected_groups: Vec<usize>,
    pub selected_nodes: Vec<usize>,
    pub lambda: f64,
    pub delta: f64,
    pub reconstruction_error: f64,
    pub method: String,
    pub groups: Vec<Vec<usize>>,
}

/// Solver settings for the final fit. The KKT tolerance is tighter than
/// the solver default so that near-interpolating fits (lambda close to 0)
/// reach reconstruction errors at the 1e-8 scale.
fn explain_solver_config(lambda: f64) -> SolverConfig {
    SolverConfig {
        lambda,
        tol: 1e-10,
        max_sweeps: 20_000,
        ..SolverConfig::default()
    }
}

/// Looser settings for cross-validation fold fits, which only rank lambdas.
fn cv_solver_config() -> SolverConfig {
    SolverConfig {
        tol: 1e-6,
        max_sweeps: 2_000,
        ..SolverConfig::default()
    }
}

/// Final fit at `lambda`: warm-starts down the default grid (truncated at
/// `lambda`) instead of solving cold, which costs a fraction of the sweeps
/// at small penalties. The returned solution meets [`explain_solver_config`]
/// tolerances at `lambda` itself.
fn solve_via_path(problem: &RegressionProblem, lambda: f64) -> Result<crate::solver::Solution> {
    let mut grid: Vec<f64> = default_lambda_grid(problem)
        .into_iter()
        .filter(|&g| g > lambda)
        .collect();
    grid.push(lambda);
    let mut path = lambda_path(problem, &grid, &explain_solver_config(lambda))?;
    Ok(path.pop().expect("grid is nonempty"))
}

/// Turns an embedding bundle into the regression data: Phi is the transpose
/// of the node embedding matrix (d x n), z is the graph embedding.
pub fn build_problem(bundle: &EmbeddingBundle, partition: &Partition) -> Result<RegressionProblem> {
    let phi = bundle.node_embeddings.t().to_owned();
    let z = bundle.graph_embedding.clone();
    RegressionProblem::new(phi, z, partition.clone())
}

/// Runs the full estimation pipeline on one graph.
pub fn explain(
    bundle: &EmbeddingBundle,
    partition: &Partition,
    lambda_spec: LambdaSpec,
    delta: f64,
) -> Result<ImportanceReport> {
    let problem = build_problem(bundle, partition)?;
    let lambda = match lambda_spec {
        LambdaSpec::Fixed(value) => value,
        LambdaSpec::AutoCv => {
            let grid = default_lambda_grid(&problem);
            cross_validate(&problem, CV_FOLDS, &grid, CV_SEED, &cv_solver_config())?.best_lambda
        }
    };
    let solution = solve_via_path(&problem, lambda)?;

    let groups = partition.groups().to_vec();
    let beta: Vec<f64> = groups
        .iter()
        .map(|group| {
            let sum: f64 = group.iter().map(|&j| solution.alpha[j]).sum();
            sum / group.len() as f64
        })
        .collect();
    let selected_groups: Vec<usize> = (0..groups.len())
        .filter(|&s| beta[s].abs() > delta)
        .collect();
    let mut selected_nodes: Vec<usize> = selected_groups
        .iter()
        .flat_map(|&s| groups[s].iter().copied())
        .collect();
    selected_nodes.sort_unstable();

    let residual = problem.response() - &problem.design().dot(&solution.alpha);
    let method = if groups.iter().all(|g| g.len() == 1) {
        // singleton groups make the penalty a plain Lasso, which is exactly
        // the node-level variant
        "exel_node"
    } else {
        "exel"
    };

    Ok(ImportanceReport {
        graph_id: bundle.graph_id.clone(),
        alpha: solution.alpha.to_vec(),
        beta,
        selected_groups,
        selected_nodes,
        lambda,
        delta,
        reconstruction_error: residual.dot(&residual).sqrt(),
        method: method.to_string(),
        groups,
    })
}

/// The node-level ablation: the same pipeline under a singleton partition,
/// so the penalty reduces to a plain Lasso and each node is its own group.
pub fn explain_node_level(
    bundle: &EmbeddingBundle,
    lambda_spec: LambdaSpec,
    delta: f64,
) -> Result<ImportanceReport> {
    let partition = singleton_partition(bundle.n());
    explain(bundle, &partition, lambda_spec, delta)
}

/// Greedy coverage-capped selection over the report's thresholded groups.
///
/// Candidates are the already-selected groups sorted by |beta| descending
/// (ties: smaller group first, then lower index). Groups are added while the
/// running node count stays within cap·n; the first violation stops the
/// scan. If the threshold picked something but not even the top candidate
/// fits, that single top group is returned anyway.
pub fn select_by_coverage(report: &ImportanceReport, cap: f64) -> Vec<usize> {
    let n = report.alpha.len();
    let mut candidates: Vec<usize> = report.selected_groups.clone();
    candidates.sort_by(|&a, &b| {
        report.beta[b]
            .abs()
            .partial_cmp(&report.beta[a].abs())
            .unwrap()
            .then(report.groups[a].len().cmp(&report.groups[b].len()))
            .then(a.cmp(&b))
    });
    if candidates.is_empty() {
        return Vec::new();
    }

    let mut picked: Vec<usize> = Vec::new();
    let mut count = 0usize;
    for &s in &candidates {
        let size = report.groups[s].len();
        if (count + size) as f64 / n as f64 <= cap {
            picked.push(s);
            count += size;
        } else {
            break;
        }
    }
    if picked.is_empty() {
        picked.push(candidates[0]);
    }

    let mut nodes: Vec<usize> = picked
        .iter()
        .flat_map(|&s| report.groups[s].iter().copied())
        .collect();
    nodes.sort_unstable();
    nodes
}

/// The k nodes with the largest |alpha|, k = max(1, floor(fraction·n)).
/// Ties go to the lower node index.
pub fn top_fraction_nodes(report: &ImportanceReport, fraction: f64) -> Vec<usize> {
    let n = report.alpha.len();
    let k = ((fraction * n as f64).floor() as usize).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        report.alpha[b]
            .abs()
            .partial_cmp(&report.alpha[a].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut picked: Vec<usize> = order.into_iter().take(k).collect();
    picked.sort_unstable();
    picked
}

/// Nodes selected at a given |beta| threshold, recomputed from the stored
/// scores (used by selection modes that override the report's delta).
pub fn select_by_threshold(report: &ImportanceReport, delta: f64) -> Vec<usize> {
    let mut nodes: Vec<usize> = (0..report.groups.len())
        .filter(|&s| report.beta[s].abs() > delta)
        .flat_map(|s| report.groups[s].iter().copied())
        .collect();
    nodes.sort_unstable();
    nodes
}

/// Writes a report as compact JSON (atomic).
pub fn write_report(path: &std::path::Path, report: &ImportanceReport) -> Result<()> {
    crate::io::write_json(report, path)
}

/// Reads a report back, checking internal consistency: beta must be the
/// exact group means of alpha and the selections must match the threshold.
pub fn read_report(path: &std::path::Path) -> Result<ImportanceReport> {
    let report: ImportanceReport = crate::io::read_json(path)?;
    if report.beta.len() != report.groups.len() {
        return Err(Error::Consistency(format!(
            "report {}: {} beta entries for {} groups",
            report.graph_id,
            report.beta.len(),
            report.groups.len()
        )));
    }
    for (s, group) in report.groups.iter().enumerate() {
        if group.is_empty() || group.iter().any(|&j| j >= report.alpha.len()) {
            return Err(Error::Consistency(format!(
                "report {}: group {s} references nodes outside alpha",
                report.graph_id
            )));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::Readout;
    use crate::rng::Rng;
    use crate::solver::{ideal_support_oracle, lambda_max, OracleConfig};
    use ndarray::{Array1, Array2};

    fn bundle_from(h: Array2<f64>, readout: Readout) -> EmbeddingBundle {
        let n = h.nrows();
        let z: Vec<f64> = match readout {
            Readout::Mean => (0..h.ncols()).map(|c| h.column(c).sum() / n as f64).collect(),
            Readout::Sum => (0..h.ncols()).map(|c| h.column(c).sum()).collect(),
            Readout::Max => (0..h.ncols())
                .map(|c| h.column(c).iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect(),
        };
        EmbeddingBundle::new("g0000".to_string(), readout, h, Array1::from_vec(z)).unwrap()
    }

    fn random_bundle(seed: u64, n: usize, d: usize, readout: Readout) -> EmbeddingBundle {
        let mut rng = Rng::new(seed);
        let h = Array2::from_shape_fn((n, d), |_| rng.uniform(-1.0, 1.0));
        bundle_from(h, readout)
    }

    #[test]
    fn build_problem_transposes() {
        let h = ndarray::array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let bundle = bundle_from(h, Readout::Sum);
        let p = build_problem(&bundle, &singleton_partition(2)).unwrap();
        assert_eq!(p.design().dim(), (3, 2));
        assert_eq!(p.design()[[0, 1]], 4.0);
        assert_eq!(p.design()[[2, 0]], 3.0);
    }

    #[test]
    fn mean_readout_reconstructs_exactly_with_uniform_alpha() {
        let bundle = random_bundle(1, 6, 4, Readout::Mean);
        let p = build_problem(&bundle, &singleton_partition(6)).unwrap();
        let alpha = Array1::from_elem(6, 1.0 / 6.0);
        let r = p.response() - &p.design().dot(&alpha);
        assert!(r.dot(&r).sqrt() <= 1e-12);
    }

    #[test]
    fn sum_readout_reconstructs_exactly_with_unit_alpha() {
        let bundle = random_bundle(2, 5, 3, Readout::Sum);
        let p = build_problem(&bundle, &singleton_partition(5)).unwrap();
        let alpha = Array1::from_elem(5, 1.0);
        let r = p.response() - &p.design().dot(&alpha);
        assert!(r.dot(&r).sqrt() <= 1e-12);
    }

    #[test]
    fn reconstruction_error_at_lambda_zero_mean_and_sum() {
        for readout in [Readout::Mean, Readout::Sum] {
            for seed in 0..5 {
                let bundle = random_bundle(10 + seed, 8, 6, readout);
                let report = explain(
                    &bundle,
                    &singleton_partition(8),
                    LambdaSpec::Fixed(0.0),
                    DEFAULT_DELTA,
                )
                .unwrap();
                assert!(
                    report.reconstruction_error <= 1e-8,
                    "seed {seed} {readout:?}: residual {}",
                    report.reconstruction_error
                );
            }
        }
    }

    #[test]
    fn above_lambda_max_everything_is_zero() {
        let bundle = random_bundle(3, 7, 5, Readout::Mean);
        let partition = Partition::new(vec![vec![0, 1, 2], vec![3, 4], vec![5, 6]], 7).unwrap();
        let p = build_problem(&bundle, &partition).unwrap();
        let report = explain(
            &bundle,
            &partition,
            LambdaSpec::Fixed(1.1 * lambda_max(&p)),
            DEFAULT_DELTA,
        )
        .unwrap();
        assert!(report.alpha.iter().all(|&a| a == 0.0));
        assert!(report.beta.iter().all(|&b| b == 0.0));
        assert!(report.selected_groups.is_empty());
        assert!(report.selected_nodes.is_empty());
        assert_eq!(report.method, "exel");
    }

    #[test]
    fn beta_is_the_exact_group_mean_of_alpha() {
        let bundle = random_bundle(4, 9, 6, Readout::Sum);
        let partition =
            Partition::new(vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8]], 9).unwrap();
        let report = explain(&bundle, &partition, LambdaSpec::Fixed(0.05), 1e-5).unwrap();
        for (s, group) in report.groups.iter().enumerate() {
            let mean: f64 =
                group.iter().map(|&j| report.alpha[j]).sum::<f64>() / group.len() as f64;
            assert_eq!(report.beta[s], mean, "beta must be the stored group mean");
        }
    }

    #[test]
    fn planted_group_is_the_only_selection_and_oracle_agrees() {
        // orthogonal block design: group 1's columns alone span z
        let d = 6;
        let mut h = Array2::zeros((6, d));
        h[[0, 0]] = 1.0; // group 0
        h[[1, 1]] = 1.0;
        h[[2, 2]] = 1.0; // group 1
        h[[3, 3]] = 1.0;
        h[[4, 4]] = 1.0; // group 2
        h[[5, 5]] = 1.0;
        let z = ndarray::array![0.0, 0.0, 1.0, 2.0, 0.0, 0.0];
        let bundle = EmbeddingBundle::new("g0000".to_string(), Readout::Sum, h, z).unwrap();
        let partition = Partition::new(vec![vec![0, 1], vec![2, 3], vec![4, 5]], 6).unwrap();
        let p = build_problem(&bundle, &partition).unwrap();
        let lambda = 0.3 * lambda_max(&p);
        let report = explain(&bundle, &partition, LambdaSpec::Fixed(lambda), 1e-5).unwrap();
        assert_eq!(report.selected_groups, vec![1]);
        assert_eq!(report.selected_nodes, vec![2, 3]);

        let oracle = ideal_support_oracle(&p, &OracleConfig::new(1e-6)).unwrap();
        assert_eq!(oracle.support, vec![1]);
    }

    #[test]
    fn planted_single_node_tops_the_lasso_scores() {
        // column 0 equals z, others orthogonal to it
        let mut h = Array2::zeros((4, 3));
        h[[0, 0]] = 2.0;
        h[[1, 1]] = 1.0;
        h[[2, 2]] = 1.0;
        h[[3, 2]] = -1.0;
        let z = ndarray::array![2.0, 0.0, 0.0];
        let bundle = EmbeddingBundle::new("g0000".to_string(), Readout::Sum, h, z).unwrap();
        let p = build_problem(&bundle, &singleton_partition(4)).unwrap();
        let report = explain_node_level(
            &bundle,
            LambdaSpec::Fixed(0.3 * lambda_max(&p)),
            DEFAULT_DELTA,
        )
        .unwrap();
        assert_eq!(report.method, "exel_node");
        let top = (0..4)
            .max_by(|&a, &b| report.alpha[a].abs().partial_cmp(&report.alpha[b].abs()).unwrap())
            .unwrap();
        assert_eq!(top, 0);
    }

    #[test]
    fn singleton_partition_equals_node_level_field_for_field() {
        let bundle = random_bundle(5, 6, 8, Readout::Mean);
        let via_explain = explain(
            &bundle,
            &singleton_partition(6),
            LambdaSpec::Fixed(0.02),
            DEFAULT_DELTA,
        )
        .unwrap();
        let via_node = explain_node_level(&bundle, LambdaSpec::Fixed(0.02), DEFAULT_DELTA).unwrap();
        assert_eq!(via_explain, via_node);
        assert_eq!(via_explain.method, "exel_node");
    }

    #[test]
    fn threshold_monotonicity() {
        let bundle = random_bundle(6, 8, 10, Readout::Sum);
        let partition = Partition::new(vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]], 8)
            .unwrap();
        let p = build_problem(&bundle, &partition).unwrap();
        let lambda = 0.1 * lambda_max(&p);
        let loose = explain(&bundle, &partition, LambdaSpec::Fixed(lambda), 1e-8).unwrap();
        let tight = explain(&bundle, &partition, LambdaSpec::Fixed(lambda), 1e-2).unwrap();
        for s in &tight.selected_groups {
            assert!(loose.selected_groups.contains(s), "S must shrink as delta grows");
        }
    }

    #[test]
    fn auto_cv_picks_a_grid_point_deterministically() {
        let bundle = random_bundle(7, 10, 16, Readout::Mean);
        let partition =
            Partition::new(vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8, 9]], 10).unwrap();
        let a = explain(&bundle, &partition, LambdaSpec::AutoCv, DEFAULT_DELTA).unwrap();
        let b = explain(&bundle, &partition, LambdaSpec::AutoCv, DEFAULT_DELTA).unwrap();
        assert_eq!(a, b);
        let p = build_problem(&bundle, &partition).unwrap();
        let grid = default_lambda_grid(&p);
        assert!(grid.iter().any(|&l| l == a.lambda));
    }

    #[test]
    fn lambda_spec_parses() {
        assert_eq!("auto".parse::<LambdaSpec>().unwrap(), LambdaSpec::AutoCv);
        assert_eq!(
            "0.25".parse::<LambdaSpec>().unwrap(),
            LambdaSpec::Fixed(0.25)
        );
        assert!("-1".parse::<LambdaSpec>().is_err());
        assert!("nan".parse::<LambdaSpec>().is_err());
        assert!("x".parse::<LambdaSpec>().is_err());
    }

    fn report_with(beta: Vec<f64>, groups: Vec<Vec<usize>>, n: usize) -> ImportanceReport {
        let delta = 1e-5;
        let selected_groups: Vec<usize> =
            (0..groups.len()).filter(|&s| beta[s].abs() > delta).collect();
        let mut selected_nodes: Vec<usize> = selected_groups
            .iter()
            .flat_map(|&s| groups[s].iter().copied())
            .collect();
        selected_nodes.sort_unstable();
        ImportanceReport {
            graph_id: "g0000".into(),
            alpha: vec![0.0; n],
            beta,
            selected_groups,
            selected_nodes,
            lambda: 0.1,
            delta,
            reconstruction_error: 0.0,
            method: "exel".into(),
            groups,
        }
    }

    #[test]
    fn coverage_walkthrough_selects_only_the_top_group() {
        // sizes (4,4,4) against n=10: the second group would overshoot 0.7
        let groups = vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7], vec![8, 9, 0, 1]];
        let report = report_with(vec![3.0, 2.0, 1.0], groups, 10);
        let nodes = select_by_coverage(&report, 0.70);
        assert_eq!(nodes, vec![0, 1, 2, 3]);
    }

    #[test]
    fn coverage_empty_selection_stays_empty() {
        let report = report_with(vec![0.0, 0.0], vec![vec![0, 1], vec![2, 3]], 4);
        assert!(select_by_coverage(&report, 0.70).is_empty());
    }

    #[test]
    fn coverage_fallback_returns_single_top_group() {
        // one group holding every node cannot fit under the cap
        let report = report_with(vec![1.0], vec![vec![0, 1, 2, 3]], 4);
        assert_eq!(select_by_coverage(&report, 0.70), vec![0, 1, 2, 3]);
    }

    #[test]
    fn coverage_tie_prefers_smaller_group_then_index() {
        let groups = vec![vec![0, 1, 2], vec![3, 4], vec![5, 6]];
        let report = report_with(vec![1.0, 1.0, 1.0], groups, 100);
        // budget is 5 nodes; equal scores order the scan 1, 2, 0 (small
        // groups first, index breaking the size tie); group 0 overflows
        let nodes = select_by_coverage(&report, 0.05);
        assert_eq!(nodes, vec![3, 4, 5, 6]);
    }

    #[test]
    fn top_fraction_defaults_and_ties() {
        let mut report = report_with(vec![0.0], vec![vec![0, 1, 2, 3]], 4);
        report.alpha = vec![0.0, 5.0, 5.0, 1.0];
        assert_eq!(top_fraction_nodes(&report, 0.5), vec![1, 2]);

        report.alpha = vec![0.3, 0.1, 0.2];
        assert_eq!(top_fraction_nodes(&report, 0.3), vec![0]); // k = max(1, floor(0.9))
    }

    #[test]
    fn report_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g0000.report.json");
        let bundle = random_bundle(8, 5, 4, Readout::Sum);
        let report = explain(
            &bundle,
            &singleton_partition(5),
            LambdaSpec::Fixed(0.1),
            DEFAULT_DELTA,
        )
        .unwrap();
        write_report(&path, &report).unwrap();
        let back = read_report(&path).unwrap();
        assert_eq!(report, back);

        let text = std::fs::read_to_string(&path).unwrap();
        for field in [
            "graph_id",
            "alpha",
            "beta",
            "selected_groups",
            "selected_nodes",
            "lambda",
            "delta",
            "reconstruction_error",
            "method",
        ] {
            assert!(text.contains(&format!("\"{field}\"")), "missing {field}");
        }
    }

    #[test]
    fn read_report_rejects_inconsistent_groups() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.report.json");
        let mut report = report_with(vec![1.0], vec![vec![0, 9]], 2);
        report.alpha = vec![0.5, 0.5];
        crate::io::write_json(&report, &path).unwrap();
        assert!(read_report(&path).is_err());
    }
}
