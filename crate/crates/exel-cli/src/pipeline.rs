//! Command implementations. Each one loads its inputs, does the work, writes
//! outputs atomically, and drops a run manifest next to them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use exel_core::eval::{self, F1Mode, MaskedPrediction};
use exel_core::explain::{self, ImportanceReport, LambdaSpec};
use exel_core::gnn::{
    self, finite_difference_check_scaled, Architecture, LayerKind, Readout, TrainConfig,
};
use exel_core::graph::{Dataset, Graph, Split};
use exel_core::io::{self, EmbeddingBundle};
use exel_core::partition::{partition_for, PartitionSource};
use exel_core::rng::Rng;
use exel_core::synth::{generate_dataset, SynthConfig};
use exel_core::Error;

use crate::manifest::{manifest_for_dir, manifest_for_file, ManifestBuilder};

/// Command failure, split by how it should surface to the shell.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: exits 2 like a clap parse error.
    Usage(String),
    /// Anything from the library: exits 1 for verification failures
    /// (diverged training, degenerate ground truth), 3 for I/O and schema.
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

pub type CmdResult = Result<i32, CliError>;

// ---------------------------------------------------------------- synth

pub fn cmd_synth(out: &Path, count: usize, base_nodes: usize, seed: u64) -> CmdResult {
    let mut manifest = ManifestBuilder::new("synth");
    manifest
        .seed(seed)
        .flag("out", out.display())
        .flag("count", count)
        .flag("base-nodes", base_nodes);

    let config = SynthConfig {
        base_nodes,
        ..SynthConfig::new(count, seed)
    };
    let dataset = generate_dataset(&config)?;
    io::write_graph_bundle(&dataset, out)?;
    manifest.output(out).write(&manifest_for_file(out))?;
    println!(
        "wrote {} graphs ({} train / {} test) to {}",
        dataset.len(),
        dataset.indices_of(Split::Train).len(),
        dataset.indices_of(Split::Test).len(),
        out.display()
    );
    Ok(0)
}

// ---------------------------------------------------------------- train

/// Loss trace and final train accuracy, written beside the model.
#[derive(Serialize)]
struct TrainSummary {
    epochs: usize,
    final_train_accuracy: f64,
    loss: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_train(
    data: &Path,
    arch: LayerKind,
    readout: Readout,
    dims: &[usize],
    epochs: usize,
    lr: f64,
    seed: u64,
    out: &Path,
) -> CmdResult {
    let mut manifest = ManifestBuilder::new("train");
    manifest
        .seed(seed)
        .flag("data", data.display())
        .flag("arch", arch)
        .flag("readout", readout)
        .flag("dims", join_dims(dims))
        .flag("epochs", epochs)
        .flag("lr", lr)
        .flag("out", out.display());
    manifest.input(data);

    let dataset = io::read_graph_bundle(data)?;
    let train_graphs: Vec<&Graph> = dataset
        .indices_of(Split::Train)
        .into_iter()
        .map(|i| &dataset.graphs[i])
        .collect();
    if train_graphs.is_empty() {
        return Err(CliError::Usage("dataset has no train split".into()));
    }
    let input_dim = train_graphs[0].p();
    let architecture =
        Architecture::homogeneous(arch, input_dim, dims, readout, dataset.num_classes)?;
    let config = TrainConfig {
        epochs,
        learning_rate: lr,
        seed,
        ..TrainConfig::default()
    };
    let outcome = gnn::train(&architecture, &train_graphs, &config)?;
    let accuracy = gnn::accuracy(&outcome.model, train_graphs.iter().copied())?;

    io::write_model_params(&outcome.model, out)?;
    let loss_path = out.with_extension("loss.json");
    let summary = TrainSummary {
        epochs,
        final_train_accuracy: accuracy,
        loss: outcome.loss_trace,
    };
    io::write_json(&summary, &loss_path)?;
    manifest
        .output(out)
        .output(&loss_path)
        .write(&manifest_for_file(out))?;
    println!(
        "trained {arch}/{readout} on {} graphs for {epochs} epochs, train accuracy {accuracy:.4}",
        train_graphs.len()
    );
    Ok(0)
}

// ---------------------------------------------------------------- embed

/// `--split` argument: a dataset split or everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitArg {
    One(Split),
    All,
}

impl std::str::FromStr for SplitArg {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "all" => Ok(SplitArg::All),
            other => Ok(SplitArg::One(other.parse()?)),
        }
    }
}

impl std::fmt::Display for SplitArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SplitArg::One(s) => write!(f, "{s}"),
            SplitArg::All => write!(f, "all"),
        }
    }
}

fn split_indices(dataset: &Dataset, split: SplitArg) -> Vec<usize> {
    match split {
        SplitArg::One(s) => dataset.indices_of(s),
        SplitArg::All => (0..dataset.len()).collect(),
    }
}

pub fn cmd_embed(model: &Path, data: &Path, split: SplitArg, out_dir: &Path) -> CmdResult {
    let mut manifest = ManifestBuilder::new("embed");
    manifest
        .flag("model", model.display())
        .flag("data", data.display())
        .flag("split", split)
        .flag("out-dir", out_dir.display());
    manifest.input(model).input(data);

    let params = io::read_model_params(model)?;
    let dataset = io::read_graph_bundle(data)?;
    std::fs::create_dir_all(out_dir).map_err(Error::from)?;

    let indices = split_indices(&dataset, split);
    if indices.is_empty() {
        return Err(CliError::Usage(format!("no graphs in the {split} split")));
    }
    let bundles: Vec<EmbeddingBundle> = indices
        .par_iter()
        .map(|&i| -> Result<EmbeddingBundle, Error> {
            let graph = &dataset.graphs[i];
            let fwd = gnn::forward(&params, graph)?;
            EmbeddingBundle::new(
                graph.id.clone(),
                params.readout,
                fwd.node_embeddings,
                fwd.graph_embedding,
            )
        })
        .collect::<Result<_, _>>()?;

    for bundle in &bundles {
        let path = out_dir.join(format!("{}.embedding.json", bundle.graph_id));
        io::write_embedding_bundle(bundle, &path)?;
        manifest.output(&path);
    }
    manifest.write(&manifest_for_dir(out_dir))?;
    println!("wrote {} embedding bundles to {}", bundles.len(), out_dir.display());
    Ok(0)
}

// ---------------------------------------------------------------- explain

/// Penalty structure: grouped by partition, or a plain per-node Lasso.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyArg {
    Group,
    Lasso,
}

impl std::str::FromStr for PenaltyArg {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "group" => Ok(PenaltyArg::Group),
            "lasso" => Ok(PenaltyArg::Lasso),
            other => Err(Error::Invalid(format!(
                "unknown penalty {other:?} (expected group or lasso)"
            ))),
        }
    }
}

impl std::fmt::Display for PenaltyArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PenaltyArg::Group => "group",
            PenaltyArg::Lasso => "lasso",
        })
    }
}

fn lambda_display(spec: LambdaSpec) -> String {
    match spec {
        LambdaSpec::AutoCv => "auto".into(),
        LambdaSpec::Fixed(v) => v.to_string(),
    }
}

/// Reads every `*.embedding.json` in the directory, sorted by file name so
/// the run order (and any first-error report) is stable.
fn read_bundles_dir(dir: &Path) -> Result<Vec<EmbeddingBundle>, Error> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(Error::from)?
        .collect::<Result<Vec<_>, _>>()
        .map_err(Error::from)?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|f| f.to_str())
                .is_some_and(|f| f.ends_with(".embedding.json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::MissingFile {
            path: format!("{}/*.embedding.json", dir.display()),
        });
    }
    paths.iter().map(|p| io::read_embedding_bundle(p)).collect()
}

pub fn cmd_explain(
    embeddings: &Path,
    data: Option<&Path>,
    partition: &PartitionSource,
    penalty: PenaltyArg,
    lambda: LambdaSpec,
    delta: f64,
    out_dir: &Path,
) -> CmdResult {
    let mut manifest = ManifestBuilder::new("explain");
    manifest
        .flag("embeddings", embeddings.display())
        .flag("partition", format_partition_source(partition))
        .flag("penalty", penalty)
        .flag("lambda", lambda_display(lambda))
        .flag("delta", delta)
        .flag("out-dir", out_dir.display());
    manifest.input(embeddings);
    if let Some(d) = data {
        manifest.flag("data", d.display()).input(d);
    }

    let bundles = read_bundles_dir(embeddings)?;

    // The bridge partitioner reads graph structure, so it needs the dataset;
    // singleton and file partitions work from the bundles alone.
    let needs_graphs =
        penalty == PenaltyArg::Group && matches!(partition, PartitionSource::Bridges);
    let dataset = match data {
        Some(path) => Some(io::read_graph_bundle(path)?),
        None if needs_graphs => {
            return Err(CliError::Usage(
                "--partition bridges needs --data to read graph structure".into(),
            ));
        }
        None => None,
    };
    let graphs: BTreeMap<&str, &Graph> = dataset
        .as_ref()
        .map(|d| d.graphs.iter().map(|g| (g.id.as_str(), g)).collect())
        .unwrap_or_default();

    let reports: Vec<ImportanceReport> = bundles
        .par_iter()
        .map(|bundle| -> Result<ImportanceReport, Error> {
            if penalty == PenaltyArg::Lasso {
                return explain::explain_node_level(bundle, lambda, delta);
            }
            let part = match partition {
                PartitionSource::Singleton => {
                    exel_core::partition::singleton_partition(bundle.n())
                }
                _ => {
                    let graph = graphs.get(bundle.graph_id.as_str()).ok_or_else(|| {
                        Error::Consistency(format!(
                            "graph {} has embeddings but is not in the dataset",
                            bundle.graph_id
                        ))
                    })?;
                    let part = partition_for(graph, partition)?;
                    if part.n() != bundle.n() {
                        return Err(Error::Consistency(format!(
                            "partition for {} covers {} nodes, embeddings have {}",
                            bundle.graph_id,
                            part.n(),
                            bundle.n()
                        )));
                    }
                    part
                }
            };
            explain::explain(bundle, &part, lambda, delta)
        })
        .collect::<Result<_, _>>()?;

    std::fs::create_dir_all(out_dir).map_err(Error::from)?;
    for report in &reports {
        let path = out_dir.join(format!("{}.report.json", report.graph_id));
        explain::write_report(&path, report)?;
        manifest.output(&path);
    }
    manifest.write(&manifest_for_dir(out_dir))?;
    println!("wrote {} reports to {}", reports.len(), out_dir.display());
    Ok(0)
}

fn format_partition_source(source: &PartitionSource) -> String {
    match source {
        PartitionSource::Singleton => "singleton".into(),
        PartitionSource::Bridges => "bridges".into(),
        PartitionSource::File(p) => format!("file:{}", p.display()),
    }
}

// ---------------------------------------------------------------- fidelity

/// `--selection` argument: how a report's scores turn into a node set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionSpec {
    /// Selected groups by |beta| descending while total nodes stay within
    /// the given fraction of the graph.
    Coverage(f64),
    /// Top fraction of nodes by node score.
    TopFrac(f64),
    /// Every node in a group passing the report's delta threshold.
    Threshold,
}

impl std::str::FromStr for SelectionSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        if s == "threshold" {
            return Ok(SelectionSpec::Threshold);
        }
        let parse_frac = |v: &str, what: &str| -> Result<f64, Error> {
            let f: f64 = v
                .parse()
                .map_err(|_| Error::Invalid(format!("bad {what} fraction {v:?}")))?;
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Invalid(format!(
                    "{what} fraction must lie in [0, 1], got {f}"
                )));
            }
            Ok(f)
        };
        if let Some(v) = s.strip_prefix("coverage:") {
            return Ok(SelectionSpec::Coverage(parse_frac(v, "coverage")?));
        }
        if let Some(v) = s.strip_prefix("topfrac:") {
            return Ok(SelectionSpec::TopFrac(parse_frac(v, "topfrac")?));
        }
        Err(Error::Invalid(format!(
            "unknown selection {s:?} (expected coverage:F, topfrac:F, or threshold)"
        )))
    }
}

impl std::fmt::Display for SelectionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SelectionSpec::Coverage(c) => write!(f, "coverage:{c}"),
            SelectionSpec::TopFrac(t) => write!(f, "topfrac:{t}"),
            SelectionSpec::Threshold => write!(f, "threshold"),
        }
    }
}

/// Applies a selection rule to one report.
pub fn select_nodes(report: &ImportanceReport, spec: SelectionSpec) -> Vec<usize> {
    match spec {
        SelectionSpec::Coverage(cap) => explain::select_by_coverage(report, cap),
        SelectionSpec::TopFrac(f) => explain::top_fraction_nodes(report, f),
        SelectionSpec::Threshold => explain::select_by_threshold(report, report.delta),
    }
}

/// Reads every `*.report.json` in the directory, sorted by file name.
pub fn read_reports_dir(dir: &Path) -> Result<Vec<ImportanceReport>, Error> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(Error::from)?
        .collect::<Result<Vec<_>, _>>()
        .map_err(Error::from)?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|f| f.to_str())
                .is_some_and(|f| f.ends_with(".report.json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::MissingFile {
            path: format!("{}/*.report.json", dir.display()),
        });
    }
    paths.iter().map(|p| explain::read_report(p)).collect()
}

#[derive(Serialize)]
struct BaselineRecord {
    method: String,
    seed: u64,
    f1_original: f64,
    f1_masked: f64,
    fidelity: f64,
}

#[derive(Serialize)]
struct FidelityOutput {
    selection: String,
    f1_mode: String,
    method: String,
    f1_original: f64,
    f1_masked: f64,
    fidelity: f64,
    /// Mean masked-node fraction over the evaluated graphs; the random
    /// baseline below masks exactly as many nodes per graph.
    mean_masked_fraction: f64,
    baseline: Option<BaselineRecord>,
    per_graph: Vec<MaskedPrediction>,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_fidelity(
    model: &Path,
    data: &Path,
    reports_dir: &Path,
    selection: SelectionSpec,
    baseline: Option<&str>,
    seed: u64,
    per_graph_f1: bool,
    out: &Path,
) -> CmdResult {
    let mut manifest = ManifestBuilder::new("fidelity");
    manifest
        .seed(seed)
        .flag("model", model.display())
        .flag("data", data.display())
        .flag("reports", reports_dir.display())
        .flag("selection", selection)
        .flag("per-graph-f1", per_graph_f1)
        .flag("out", out.display());
    manifest.input(model).input(data).input(reports_dir);
    if let Some(b) = baseline {
        manifest.flag("baseline", b);
    }

    if let Some(b) = baseline {
        if b != "random" {
            return Err(CliError::Usage(format!(
                "unknown baseline {b:?} (only `random` is available)"
            )));
        }
    }

    let params = io::read_model_params(model)?;
    let dataset = io::read_graph_bundle(data)?;
    let reports = read_reports_dir(reports_dir)?;
    let by_id: BTreeMap<&str, &ImportanceReport> =
        reports.iter().map(|r| (r.graph_id.as_str(), r)).collect();
    let mode = if per_graph_f1 {
        F1Mode::PerGraphMean
    } else {
        F1Mode::DatasetLevel
    };

    // node sets for the test split, in sorted graph-id order
    let mut node_sets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for &i in &dataset.indices_of(Split::Test) {
        let graph = &dataset.graphs[i];
        let report = by_id.get(graph.id.as_str()).ok_or(Error::MissingNodeSet {
            graph_id: graph.id.clone(),
        })?;
        node_sets.insert(graph.id.clone(), select_nodes(report, selection));
    }

    let result = eval::fidelity_f1(&params, &dataset, Split::Test, &node_sets, mode)?;

    let mut frac_sum = 0.0f64;
    for &i in &dataset.indices_of(Split::Test) {
        let graph = &dataset.graphs[i];
        frac_sum += node_sets[&graph.id].len() as f64 / graph.n() as f64;
    }
    let mean_masked_fraction = frac_sum / dataset.indices_of(Split::Test).len() as f64;

    let baseline_record = match baseline {
        Some(_) => {
            // same graph order, same per-graph budget, fresh random nodes
            let mut rng = Rng::new(seed);
            let mut random_sets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
            for (id, nodes) in &node_sets {
                let n = dataset
                    .graphs
                    .iter()
                    .find(|g| &g.id == id)
                    .expect("node_sets built from dataset ids")
                    .n();
                random_sets.insert(id.clone(), eval::random_nodes_exact(n, nodes.len(), &mut rng));
            }
            let base = eval::fidelity_f1(&params, &dataset, Split::Test, &random_sets, mode)?;
            Some(BaselineRecord {
                method: "random".into(),
                seed,
                f1_original: base.f1_original,
                f1_masked: base.f1_masked,
                fidelity: base.fidelity,
            })
        }
        None => None,
    };

    let method = reports
        .first()
        .map(|r| r.method.clone())
        .unwrap_or_default();
    let output = FidelityOutput {
        selection: selection.to_string(),
        f1_mode: if per_graph_f1 { "per-graph-mean" } else { "dataset" }.into(),
        method,
        f1_original: result.f1_original,
        f1_masked: result.f1_masked,
        fidelity: result.fidelity,
        mean_masked_fraction,
        baseline: baseline_record,
        per_graph: result.per_graph,
    };
    io::write_json(&output, out)?;
    manifest.output(out).write(&manifest_for_file(out))?;
    match &output.baseline {
        Some(b) => println!(
            "fidelity {:+.4} (baseline {:+.4}) masking {:.1}% of nodes",
            output.fidelity,
            b.fidelity,
            100.0 * output.mean_masked_fraction
        ),
        None => println!(
            "fidelity {:+.4} masking {:.1}% of nodes",
            output.fidelity,
            100.0 * output.mean_masked_fraction
        ),
    }
    Ok(0)
}

// ---------------------------------------------------------------- eval-gt

#[derive(Serialize)]
struct GtRecord {
    graph_id: String,
    roc_auc: f64,
    pr_auc: f64,
}

#[derive(Serialize)]
struct GtOutput {
    mean_roc_auc: f64,
    mean_pr_auc: f64,
    graph_count: usize,
    /// Graphs skipped for missing or single-class ground-truth masks.
    skipped: Vec<String>,
    per_graph: Vec<GtRecord>,
}

/// Per-node importance scores implied by a report: each node inherits the
/// absolute group score |beta| of its group.
pub fn node_scores(report: &ImportanceReport) -> Vec<f64> {
    let n: usize = report.groups.iter().map(|g| g.len()).sum();
    let mut scores = vec![0.0f64; n];
    for (s, group) in report.groups.iter().enumerate() {
        for &j in group {
            scores[j] = report.beta[s].abs();
        }
    }
    scores
}

pub fn cmd_eval_gt(reports_dir: &Path, data: &Path, out: &Path) -> CmdResult {
    let mut manifest = ManifestBuilder::new("eval-gt");
    manifest
        .flag("reports", reports_dir.display())
        .flag("data", data.display())
        .flag("out", out.display());
    manifest.input(reports_dir).input(data);

    let reports = read_reports_dir(reports_dir)?;
    let dataset = io::read_graph_bundle(data)?;
    let graphs: BTreeMap<&str, &Graph> =
        dataset.graphs.iter().map(|g| (g.id.as_str(), g)).collect();

    let mut per_graph = Vec::new();
    let mut skipped = Vec::new();
    for report in &reports {
        let graph = graphs.get(report.graph_id.as_str()).ok_or_else(|| {
            Error::Consistency(format!(
                "report {} has no matching graph in the dataset",
                report.graph_id
            ))
        })?;
        let mask = match &graph.gt_mask {
            Some(m) if m.iter().any(|&b| b) && m.iter().any(|&b| !b) => m,
            _ => {
                skipped.push(report.graph_id.clone());
                continue;
            }
        };
        let scores = node_scores(report);
        if scores.len() != mask.len() {
            return Err(CliError::Core(Error::Consistency(format!(
                "report {} scores {} nodes, graph has {}",
                report.graph_id,
                scores.len(),
                mask.len()
            ))));
        }
        // both AUCs exist: the mask has both classes by the check above
        let roc = eval::roc_auc(&scores, mask).expect("mask has both classes");
        let pr = eval::pr_auc(&scores, mask).expect("mask has both classes");
        per_graph.push(GtRecord {
            graph_id: report.graph_id.clone(),
            roc_auc: roc,
            pr_auc: pr,
        });
    }

    if per_graph.is_empty() {
        return Err(CliError::Core(Error::DegenerateLabels {
            graph_ids: skipped,
        }));
    }

    let count = per_graph.len() as f64;
    let output = GtOutput {
        mean_roc_auc: per_graph.iter().map(|r| r.roc_auc).sum::<f64>() / count,
        mean_pr_auc: per_graph.iter().map(|r| r.pr_auc).sum::<f64>() / count,
        graph_count: per_graph.len(),
        skipped,
        per_graph,
    };
    io::write_json(&output, out)?;
    manifest.output(out).write(&manifest_for_file(out))?;
    println!(
        "mean ROC-AUC {:.4}, mean PR-AUC {:.4} over {} graphs ({} skipped)",
        output.mean_roc_auc,
        output.mean_pr_auc,
        output.graph_count,
        output.skipped.len()
    );
    Ok(0)
}

// ---------------------------------------------------------------- gradcheck

#[derive(Serialize)]
struct GradCheckRecord {
    arch: String,
    readout: String,
    max_rel_error: f64,
    worst_coordinate: String,
    passed: bool,
}

#[derive(Serialize)]
struct GradCheckOutput {
    tolerance: f64,
    step: f64,
    injected_bug: bool,
    all_passed: bool,
    combos: Vec<GradCheckRecord>,
}

/// A small random connected graph for gradient checking: a path backbone
/// plus random extra edges, features uniform in [-1, 1].
fn gradcheck_graph(n: usize, p: usize, rng: &mut Rng) -> Graph {
    let mut edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    for i in 0..n {
        for j in (i + 2)..n {
            if rng.next_f64() < 0.3 {
                edges.push((i, j));
            }
        }
    }
    let features = ndarray::Array2::from_shape_fn((n, p), |_| rng.uniform(-1.0, 1.0));
    Graph::from_edges("gradcheck", features, &edges).expect("valid fixture graph")
}

pub fn cmd_gradcheck(
    seed: u64,
    step: f64,
    tolerance: f64,
    inject_bug: bool,
    out: Option<&Path>,
) -> CmdResult {
    let mut manifest = ManifestBuilder::new("gradcheck");
    manifest
        .seed(seed)
        .flag("step", step)
        .flag("tolerance", tolerance)
        .flag("inject-bug", inject_bug);

    let scale = if inject_bug { 1.01 } else { 1.0 };
    let archs = [LayerKind::Gcn, LayerKind::Gin, LayerKind::Sage];
    let readouts = [Readout::Mean, Readout::Sum, Readout::Max];
    let mut combos = Vec::new();
    let mut all_passed = true;

    for (k, &arch) in archs.iter().enumerate() {
        for (r, &readout) in readouts.iter().enumerate() {
            let combo_seed = seed ^ ((k * 3 + r) as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let mut rng = Rng::new(combo_seed);
            let graph = gradcheck_graph(4, 3, &mut rng);
            let label = rng.gen_range(2);
            let architecture = Architecture::homogeneous(arch, 3, &[4, 3], readout, 2)
                .expect("fixture dims are valid");
            let model = gnn::init_model(&architecture.layers, readout, 2, combo_seed, 0.5)?;
            let report = finite_difference_check_scaled(&model, &graph, label, step, scale)?;
            let passed = report.max_rel_error <= tolerance;
            all_passed &= passed;
            println!(
                "{arch}/{readout}  max_rel_error {:.3e} at {}  {}",
                report.max_rel_error,
                report.worst_coordinate,
                if passed { "ok" } else { "FAIL" }
            );
            combos.push(GradCheckRecord {
                arch: arch.to_string(),
                readout: readout.to_string(),
                max_rel_error: report.max_rel_error,
                worst_coordinate: report.worst_coordinate,
                passed,
            });
        }
    }

    let output = GradCheckOutput {
        tolerance,
        step,
        injected_bug: inject_bug,
        all_passed,
        combos,
    };
    if let Some(path) = out {
        io::write_json(&output, path)?;
        manifest
            .flag("out", path.display())
            .output(path)
            .write(&manifest_for_file(path))?;
    }
    Ok(if all_passed { 0 } else { 1 })
}

// ---------------------------------------------------------------- import-tu

pub fn cmd_import_tu(dir: &Path, name: &str, out: &Path) -> CmdResult {
    let mut manifest = ManifestBuilder::new("import-tu");
    manifest
        .flag("dir", dir.display())
        .flag("name", name)
        .flag("out", out.display());
    manifest.input(dir);

    let dataset = io::parse_tu_dataset(dir, name)?;
    io::write_graph_bundle(&dataset, out)?;
    manifest.output(out).write(&manifest_for_file(out))?;
    println!(
        "imported {} graphs ({} classes) to {}",
        dataset.len(),
        dataset.num_classes,
        out.display()
    );
    Ok(0)
}

pub fn join_dims(dims: &[usize]) -> String {
    dims.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",")
}
