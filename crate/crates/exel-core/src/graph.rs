//! Core graph data types: [`Graph`], [`Partition`], [`Dataset`], plus the
//! elementary transforms every other module shares.
//!
//! Adjacency is stored dense. Graphs here are desk-scale (tens to a few
//! hundred nodes) and dense storage keeps the numeric code simple and exactly
//! reproducible. Self-loops are never stored; they are added only inside
//! [`normalized_adjacency`].

use crate::{Error, Result};
use ndarray::{Array1, Array2};

/// Train/test membership tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Schema(format!("unknown split tag {other:?}"))),
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// An undirected graph with node features, optional class label, and an
/// optional ground-truth importance mask.
///
/// Invariants enforced at construction: adjacency is symmetric 0/1 with a
/// zero diagonal, features have one row per node, n >= 1, and the mask (when
/// present) has length n.
#[derive(Debug, Clone)]
pub struct Graph {
    pub id: String,
    /// n x p feature matrix X.
    pub features: Array2<f64>,
    /// n x n symmetric 0/1 adjacency A with zero diagonal.
    pub adjacency: Array2<f64>,
    pub label: Option<usize>,
    pub gt_mask: Option<Vec<bool>>,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Duplicate edges collapse;
    /// self-loops are rejected.
    pub fn from_edges(
        id: impl Into<String>,
        features: Array2<f64>,
        edges: &[(usize, usize)],
    ) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::Invalid("graph must have at least one node".into()));
        }
        let mut adjacency = Array2::<f64>::zeros((n, n));
        for &(u, v) in edges {
            if u == v {
                return Err(Error::SelfLoop { node: u });
            }
            for node in [u, v] {
                if node >= n {
                    return Err(Error::NodeIndexOutOfRange { index: node, n });
                }
            }
            adjacency[[u, v]] = 1.0;
            adjacency[[v, u]] = 1.0;
        }
        Ok(Graph {
            id: id.into(),
            features,
            adjacency,
            label: None,
            gt_mask: None,
        })
    }

    /// Builds a graph from an explicit adjacency matrix, validating symmetry,
    /// zero diagonal, 0/1 entries, and the feature row count.
    pub fn from_adjacency(
        id: impl Into<String>,
        features: Array2<f64>,
        adjacency: Array2<f64>,
    ) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 {
            return Err(Error::Invalid("graph must have at least one node".into()));
        }
        if adjacency.ncols() != n {
            return Err(Error::Invalid(format!(
                "adjacency must be square, got {}x{}",
                n,
                adjacency.ncols()
            )));
        }
        for i in 0..n {
            if adjacency[[i, i]] != 0.0 {
                return Err(Error::SelfLoop { node: i });
            }
            for j in 0..n {
                let a = adjacency[[i, j]];
                if a != adjacency[[j, i]] {
                    return Err(Error::AsymmetricAdjacency { i, j });
                }
                if a != 0.0 && a != 1.0 {
                    return Err(Error::Invalid(format!(
                        "adjacency entries must be 0 or 1, got {a} at ({i}, {j})"
                    )));
                }
            }
        }
        if features.nrows() != n {
            return Err(Error::FeatureShapeMismatch {
                rows: features.nrows(),
                nodes: n,
            });
        }
        Ok(Graph {
            id: id.into(),
            features,
            adjacency,
            label: None,
            gt_mask: None,
        })
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_gt_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.n() {
            return Err(Error::Invalid(format!(
                "gt mask length {} does not match node count {}",
                mask.len(),
                self.n()
            )));
        }
        self.gt_mask = Some(mask);
        Ok(self)
    }

    /// Node count.
    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    /// Feature width.
    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency.row(node).sum() as usize
    }

    /// Undirected edge list with i < j, sorted ascending.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adjacency[[i, j]] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Relabels nodes: old node i becomes new node perm[i]. `perm` must be a
    /// permutation of 0..n. Used by permutation-equivariance tests.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::Invalid("permutation length mismatch".into()));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::Invalid("not a permutation".into()));
            }
            seen[p] = true;
        }
        let mut features = Array2::<f64>::zeros(self.features.dim());
        let mut adjacency = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for (k, &v) in self.features.row(i).iter().enumerate() {
                features[[perm[i], k]] = v;
            }
            for j in 0..n {
                adjacency[[perm[i], perm[j]]] = self.adjacency[[i, j]];
            }
        }
        let gt_mask = self.gt_mask.as_ref().map(|m| {
            let mut out = vec![false; n];
            for i in 0..n {
                out[perm[i]] = m[i];
            }
            out
        });
        Ok(Graph {
            id: self.id.clone(),
            features,
            adjacency,
            label: self.label,
            gt_mask,
        })
    }
}

/// Disjoint covering node groups I_1..I_m over {0..n-1}.
///
/// Group order and within-group order are preserved as given (file-loaded
/// partitions round-trip untouched); validation only checks the partition
/// laws.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    groups: Vec<Vec<usize>>,
    n: usize,
}

impl Partition {
    pub fn new(groups: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        validate_partition(&groups, n)?;
        Ok(Partition { groups, n })
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Number of groups m.
    pub fn m(&self) -> usize {
        self.groups.len()
    }

    /// Node count the partition refers to.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Inverse map: node index -> group index.
    pub fn node_to_group(&self) -> Vec<usize> {
        let mut out = vec![0usize; self.n];
        for (g, members) in self.groups.iter().enumerate() {
            for &i in members {
                out[i] = g;
            }
        }
        out
    }
}

/// Checks that `groups` forms an m-partition of {0..n-1}: groups non-empty,
/// pairwise disjoint, and covering every index exactly once.
pub fn validate_partition(groups: &[Vec<usize>], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Invalid("partition must cover at least one node".into()));
    }
    let mut seen = vec![false; n];
    for (g, members) in groups.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::EmptyGroup { group: g });
        }
        for &i in members {
            if i >= n {
                return Err(Error::NodeIndexOutOfRange { index: i, n });
            }
            if seen[i] {
                return Err(Error::OverlappingGroups { node: i });
            }
            seen[i] = true;
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::IncompleteCover { node: missing });
    }
    Ok(())
}

/// A labeled graph collection with a train/test split and optional per-graph
/// partitions carried through from bundle files.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graphs: Vec<Graph>,
    pub num_classes: usize,
    pub splits: Vec<Split>,
    /// Parallel to `graphs`; populated when the source bundle embeds
    /// partitions, None otherwise.
    pub partitions: Vec<Option<Partition>>,
}

impl Dataset {
    pub fn new(graphs: Vec<Graph>, num_classes: usize, splits: Vec<Split>) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::Invalid("num_classes must be positive".into()));
        }
        if splits.len() != graphs.len() {
            return Err(Error::Invalid(format!(
                "{} split tags for {} graphs",
                splits.len(),
                graphs.len()
            )));
        }
        for g in &graphs {
            if let Some(label) = g.label {
                if label >= num_classes {
                    return Err(Error::LabelOutOfRange {
                        label,
                        num_classes,
                    });
                }
            }
        }
        let partitions = vec![None; graphs.len()];
        Ok(Dataset {
            graphs,
            num_classes,
            splits,
            partitions,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn indices_of(&self, split: Split) -> Vec<usize> {
        (0..self.graphs.len())
            .filter(|&i| self.splits[i] == split)
            .collect()
    }
}

/// GCN propagation operator with self-loops, D̃^{-1/2}(A+I)D̃^{-1/2}.
///
/// Every node gains a self-loop, so degrees are strictly positive and no
/// division guard is needed.
pub fn normalized_adjacency(graph: &Graph) -> Array2<f64> {
    let n = graph.n();
    let mut a_tilde = graph.adjacency.clone();
    for i in 0..n {
        a_tilde[[i, i]] += 1.0;
    }
    let inv_sqrt_deg: Array1<f64> = a_tilde
        .rows()
        .into_iter()
        .map(|r| 1.0 / r.sum().sqrt())
        .collect();
    for i in 0..n {
        for j in 0..n {
            a_tilde[[i, j]] *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
        }
    }
    a_tilde
}

/// One-hot degree features: row i indicates min(degree(i), cap), width cap+1.
pub fn degree_onehot_features(graph: &Graph, cap: usize) -> Array2<f64> {
    let n = graph.n();
    let mut out = Array2::<f64>::zeros((n, cap + 1));
    for i in 0..n {
        let d = graph.degree(i).min(cap);
        out[[i, d]] = 1.0;
    }
    out
}
