//! Synthetic two-class benchmark: preferential-attachment base graphs with a
//! planted 5-node motif per graph. Class 0 carries a plain 5-cycle, class 1
//! a house (5-cycle plus a chord closing a roof triangle), so the class is
//! decidable from the motif alone and the motif nodes are the ground truth.
//!
//! The motif hangs off the base by a single edge, which makes that edge a
//! bridge: the bridge partitioner recovers the motif as one group, aligning
//! the planted truth with the group structure the estimator uses.

use crate::graph::{Dataset, Graph, Split};
use crate::rng::Rng;
use crate::{Error, Result};
use ndarray::Array2;

pub const MOTIF_SIZE: usize = 5;
/// Degrees are one-hot encoded and clipped at this value.
pub const DEGREE_FEATURE_CAP: usize = 10;

/// Which motif gets planted; doubles as the class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motif {
    /// 5-cycle, class 0.
    Cycle5,
    /// 5-cycle plus the (0,2) chord, class 1.
    House5,
}

impl Motif {
    fn label(self) -> usize {
        match self {
            Motif::Cycle5 => 0,
            Motif::House5 => 1,
        }
    }

    /// Edges among the 5 motif nodes, in motif-local indices.
    fn edges(self) -> Vec<(usize, usize)> {
        let mut edges = vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)];
        if let Motif::House5 = self {
            edges.push((0, 2));
        }
        edges
    }
}

/// Generator settings.
#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub graph_count: usize,
    pub base_nodes: usize,
    pub ba_attach: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(graph_count: usize, seed: u64) -> Self {
        SynthConfig {
            graph_count,
            base_nodes: 20,
            ba_attach: 1,
            seed,
        }
    }
}

/// Barabasi-Albert-style edge list: node 0 starts alone, each later node
/// attaches to `attach` distinct existing nodes drawn with probability
/// proportional to degree+1 (the +1 keeps the first draw well defined).
/// Connected by construction for attach >= 1.
fn ba_edges(n: usize, attach: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    assert!(attach >= 1, "attachment count must be positive");
    let mut degree = vec![0usize; n];
    let mut edges = Vec::new();
    for new in 1..n {
        let mut chosen: Vec<usize> = Vec::new();
        let take = attach.min(new);
        while chosen.len() < take {
            let total: usize = (0..new)
                .filter(|v| !chosen.contains(v))
                .map(|v| degree[v] + 1)
                .sum();
            let mut ticket = rng.gen_range(total);
            let mut pick = usize::MAX;
            for v in 0..new {
                if chosen.contains(&v) {
                    continue;
                }
                let w = degree[v] + 1;
                if ticket < w {
                    pick = v;
                    break;
                }
                ticket -= w;
            }
            chosen.push(pick);
        }
        for &v in &chosen {
            edges.push((v, new));
            degree[v] += 1;
            degree[new] += 1;
        }
    }
    edges
}

/// A base graph without features or label; features are attached later once
/// the final degrees are known.
pub fn ba_graph(n: usize, attach: usize, rng: &mut Rng) -> Result<Graph> {
    if n == 0 {
        return Err(Error::Invalid("graph needs at least one node".into()));
    }
    let edges = ba_edges(n, attach, rng);
    let features = Array2::zeros((n, 1));
    Graph::from_edges("ba", features, &edges)
}

/// Appends the 5 motif nodes to a base edge list and wires one uniformly
/// chosen motif node to one uniformly chosen base node. Returns the combined
/// edges and the ground-truth mask (true exactly on the motif nodes).
fn attach_motif_edges(
    base_n: usize,
    base_edges: &[(usize, usize)],
    motif: Motif,
    rng: &mut Rng,
) -> (Vec<(usize, usize)>, Vec<bool>) {
    let mut edges = base_edges.to_vec();
    for (a, b) in motif.edges() {
        edges.push((base_n + a, base_n + b));
    }
    let motif_node = base_n + rng.gen_range(MOTIF_SIZE);
    let base_node = rng.gen_range(base_n);
    edges.push((base_node, motif_node));

    let mut mask = vec![false; base_n + MOTIF_SIZE];
    for entry in mask.iter_mut().skip(base_n) {
        *entry = true;
    }
    (edges, mask)
}

/// Builds one labeled benchmark graph: BA base, planted motif, degree
/// one-hot features, ground-truth mask.
pub fn motif_graph(
    id: impl Into<String>,
    base_nodes: usize,
    ba_attach: usize,
    motif: Motif,
    rng: &mut Rng,
) -> Result<Graph> {
    let base_edges = ba_edges(base_nodes, ba_attach, rng);
    let (edges, mask) = attach_motif_edges(base_nodes, &base_edges, motif, rng);
    let n = base_nodes + MOTIF_SIZE;
    // features need the final degrees; build with placeholders first
    let skeleton = Graph::from_edges(id, Array2::zeros((n, 1)), &edges)?;
    let features = crate::graph::degree_onehot_features(&skeleton, DEGREE_FEATURE_CAP);
    Ok(Graph {
        features,
        ..skeleton
    }
    .with_label(motif.label())
    .with_gt_mask(mask)?)
}

/// Generates the full dataset: alternating classes, degree one-hot features,
/// seeded stratified 80/20 train/test split.
pub fn generate_dataset(config: &SynthConfig) -> Result<Dataset> {
    if config.graph_count < 2 {
        return Err(Error::Invalid("need at least 2 graphs".into()));
    }
    if config.base_nodes < MOTIF_SIZE {
        return Err(Error::Invalid(format!(
            "base_nodes must be at least the motif size {MOTIF_SIZE}"
        )));
    }
    if config.ba_attach == 0 {
        return Err(Error::Invalid("ba_attach must be positive".into()));
    }

    let mut rng = Rng::new(config.seed);
    let mut graphs = Vec::with_capacity(config.graph_count);
    for g in 0..config.graph_count {
        let motif = if g % 2 == 0 { Motif::Cycle5 } else { Motif::House5 };
        graphs.push(motif_graph(
            format!("g{g:04}"),
            config.base_nodes,
            config.ba_attach,
            motif,
            &mut rng,
        )?);
    }

    // stratified split: per class, round(20%) of the graphs go to test
    let mut splits = vec![Split::Train; graphs.len()];
    for class in 0..2 {
        let members: Vec<usize> = (0..graphs.len())
            .filter(|&g| graphs[g].label == Some(class))
            .collect();
        let test_count = (0.2 * members.len() as f64 + 0.5).floor() as usize;
        for local in rng.sample_indices(members.len(), test_count) {
            splits[members[local]] = Split::Test;
        }
    }

    Dataset::new(graphs, 2, splits)
}
