//! Crate-wide error type.

use thiserror::Error;

/// All failure modes surfaced by the library.
///
/// Validation errors are raised eagerly at construction or load time so the
/// numeric code can assume well-formed inputs.
#[derive(Debug, Error)]
pub enum Error {
    // graph / dataset construction
    #[error("self-loop on node {node}")]
    SelfLoop { node: usize },
    #[error("adjacency matrix is not symmetric at ({i}, {j})")]
    AsymmetricAdjacency { i: usize, j: usize },
    #[error("feature matrix has {rows} rows but the graph has {nodes} nodes")]
    FeatureShapeMismatch { rows: usize, nodes: usize },
    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeIndexOutOfRange { index: usize, n: usize },
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("graph {graph_id} has no label")]
    MissingLabel { graph_id: String },

    // partition validation
    #[error("group {group} is empty")]
    EmptyGroup { group: usize },
    #[error("node {node} appears in more than one group")]
    OverlappingGroups { node: usize },
    #[error("node {node} is not covered by any group")]
    IncompleteCover { node: usize },

    // i/o and schemas
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("missing file {path}")]
    MissingFile { path: String },
    #[error("{path}:{line}: {msg}")]
    MalformedLine {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}:{line}: edge ({u}, {v}) crosses graph boundaries")]
    DanglingEdge {
        path: String,
        line: usize,
        u: usize,
        v: usize,
    },
    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),
    #[error("unsupported bundle version {found} (expected {expected})")]
    UnknownVersion { found: u64, expected: u64 },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("consistency check failed: {0}")]
    Consistency(String),

    // gnn engine
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite loss at epoch {epoch} on graph {graph_id} (loss trace: {trace:?})")]
    NonFiniteLoss {
        epoch: usize,
        graph_id: String,
        trace: Vec<f64>,
    },

    // solver
    #[error("{rows} response rows cannot be split into {folds} folds")]
    TooFewRows { rows: usize, folds: usize },
    #[error("support enumeration over {groups} groups exceeds the cap of {max}")]
    TooManyGroups { groups: usize, max: usize },
    #[error("lambda grid is empty")]
    EmptyLambdaGrid,

    // evaluation
    #[error("no node set provided for test graph {graph_id}")]
    MissingNodeSet { graph_id: String },
    #[error("ground-truth labels are degenerate for every graph: {}", graph_ids.join(", "))]
    DegenerateLabels { graph_ids: Vec<String> },

    // cross-cutting
    #[error("{0}")]
    Invalid(String),
}
