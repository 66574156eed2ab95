//! Dataset, embedding, model, and partition serialization, plus the TU
//! flat-file parser.
//!
//! Everything on disk is JSON (one exception: TU corpora, which are read
//! only). Writers are deterministic: identical in-memory data produces
//! byte-identical files, with floats printed at full round-trip precision.
//! All writes go through a write-temp-then-rename so readers never observe
//! a partial file.
//!
//! Graph bundle schema (version 1):
//! `{version, num_classes, graphs: [{id, features, edges, label?,
//! partition?, gt_mask?, split?}]}`. A graph without a split tag defaults
//! to train.

use crate::gnn::{LayerParams, ModelParams, Readout};
use crate::graph::{Dataset, Graph, Partition, Split};
use crate::{Error, Result};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeSet;
use std::path::Path;

const BUNDLE_VERSION: u64 = 1;

/// Writes bytes to `path` atomically (temp file in the same directory, then
/// rename). Concurrent writers of *different* paths never interfere.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Invalid(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Serializes a value as one JSON document with a trailing newline and writes
/// it atomically.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Reads and deserializes a whole JSON file, attaching the path to schema
/// errors.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {}", path.display(), e)))
}

fn rows_from_matrix(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    if rows.is_empty() {
        return Err(Error::Schema(format!("{what}: must have at least one row")));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Schema(format!("{what}: ragged rows")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), width), flat)
        .map_err(|e| Error::Schema(format!("{what}: {e}")))
}

// ---------------------------------------------------------------------------
// graph bundles

#[derive(Serialize)]
struct GraphOut<'a> {
    id: &'a str,
    features: Vec<Vec<f64>>,
    edges: Vec<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    partition: Option<&'a [Vec<usize>]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gt_mask: Option<&'a [bool]>,
    split: Split,
}

#[derive(Serialize)]
struct BundleOut<'a> {
    version: u64,
    num_classes: usize,
    graphs: Vec<GraphOut<'a>>,
}

pub fn write_graph_bundle(dataset: &Dataset, path: &Path) -> Result<()> {
    let graphs = dataset
        .graphs
        .iter()
        .enumerate()
        .map(|(i, g)| GraphOut {
            id: &g.id,
            features: rows_from_matrix(&g.features),
            edges: g.edges().into_iter().map(|(u, v)| [u, v]).collect(),
            label: g.label,
            partition: dataset.partitions[i].as_ref().map(|p| p.groups()),
            gt_mask: g.gt_mask.as_deref(),
            split: dataset.splits[i],
        })
        .collect();
    let out = BundleOut {
        version: BUNDLE_VERSION,
        num_classes: dataset.num_classes,
        graphs,
    };
    write_json(&out, path)
}

// Bundle reading walks the JSON tree by hand so schema errors can name the
// exact path (e.g. "graphs[3].features").

fn field<'v>(obj: &'v Value, at: &str, key: &str) -> Result<&'v Value> {
    obj.as_object()
        .ok_or_else(|| Error::Schema(format!("{at}: expected object")))?
        .get(key)
        .ok_or_else(|| Error::Schema(format!("{at}.{key}: missing field")))
}

fn opt_field<'v>(obj: &'v Value, at: &str, key: &str) -> Result<Option<&'v Value>> {
    Ok(obj
        .as_object()
        .ok_or_else(|| Error::Schema(format!("{at}: expected object")))?
        .get(key)
        .filter(|v| !v.is_null()))
}

fn as_array<'v>(v: &'v Value, at: &str) -> Result<&'v Vec<Value>> {
    v.as_array()
        .ok_or_else(|| Error::Schema(format!("{at}: expected array")))
}

fn as_usize(v: &Value, at: &str) -> Result<usize> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| Error::Schema(format!("{at}: expected nonnegative integer")))
}

fn as_f64(v: &Value, at: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::Schema(format!("{at}: expected number")))
}

pub fn read_graph_bundle(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let root: Value = serde_json::from_str(&text)?;

    let version = as_usize(field(&root, "$", "version")?, "$.version")? as u64;
    if version != BUNDLE_VERSION {
        return Err(Error::UnknownVersion {
            found: version,
            expected: BUNDLE_VERSION,
        });
    }
    let num_classes = as_usize(field(&root, "$", "num_classes")?, "$.num_classes")?;
    let graphs_v = as_array(field(&root, "$", "graphs")?, "$.graphs")?;

    let mut graphs = Vec::with_capacity(graphs_v.len());
    let mut splits = Vec::with_capacity(graphs_v.len());
    let mut partitions = Vec::with_capacity(graphs_v.len());
    for (gi, gv) in graphs_v.iter().enumerate() {
        let at = format!("graphs[{gi}]");
        let id = field(gv, &at, "id")?
            .as_str()
            .ok_or_else(|| Error::Schema(format!("{at}.id: expected string")))?
            .to_string();

        let feat_rows: Vec<Vec<f64>> = {
            let fat = format!("{at}.features");
            let rows = as_array(field(gv, &at, "features")?, &fat)?;
            rows.iter()
                .enumerate()
                .map(|(ri, rv)| {
                    let rat = format!("{fat}[{ri}]");
                    as_array(rv, &rat)?
                        .iter()
                        .enumerate()
                        .map(|(ci, cv)| as_f64(cv, &format!("{rat}[{ci}]")))
                        .collect()
                })
                .collect::<Result<_>>()?
        };
        let features = matrix_from_rows(&feat_rows, &format!("{at}.features"))?;
        let n = features.nrows();

        let edges: Vec<(usize, usize)> = {
            let eat = format!("{at}.edges");
            as_array(field(gv, &at, "edges")?, &eat)?
                .iter()
                .enumerate()
                .map(|(ei, ev)| {
                    let pat = format!("{eat}[{ei}]");
                    let pair = as_array(ev, &pat)?;
                    if pair.len() != 2 {
                        return Err(Error::Schema(format!("{pat}: expected [u, v]")));
                    }
                    Ok((
                        as_usize(&pair[0], &format!("{pat}[0]"))?,
                        as_usize(&pair[1], &format!("{pat}[1]"))?,
                    ))
                })
                .collect::<Result<_>>()?
        };

        let mut graph = Graph::from_edges(id, features, &edges)?;
        if let Some(lv) = opt_field(gv, &at, "label")? {
            graph = graph.with_label(as_usize(lv, &format!("{at}.label"))?);
        }
        if let Some(mv) = opt_field(gv, &at, "gt_mask")? {
            let mat = format!("{at}.gt_mask");
            let mask = as_array(mv, &mat)?
                .iter()
                .enumerate()
                .map(|(mi, b)| {
                    b.as_bool()
                        .ok_or_else(|| Error::Schema(format!("{mat}[{mi}]: expected bool")))
                })
                .collect::<Result<Vec<bool>>>()?;
            graph = graph.with_gt_mask(mask)?;
        }
        let partition = match opt_field(gv, &at, "partition")? {
            Some(pv) => {
                let pat = format!("{at}.partition");
                let groups = as_array(pv, &pat)?
                    .iter()
                    .enumerate()
                    .map(|(si, sv)| {
                        let sat = format!("{pat}[{si}]");
                        as_array(sv, &sat)?
                            .iter()
                            .enumerate()
                            .map(|(ni, nv)| as_usize(nv, &format!("{sat}[{ni}]")))
                            .collect()
                    })
                    .collect::<Result<Vec<Vec<usize>>>>()?;
                Some(Partition::new(groups, n)?)
            }
            None => None,
        };
        let split = match opt_field(gv, &at, "split")? {
            Some(sv) => sv
                .as_str()
                .ok_or_else(|| Error::Schema(format!("{at}.split: expected string")))?
                .parse::<Split>()?,
            None => Split::Train,
        };

        graphs.push(graph);
        splits.push(split);
        partitions.push(partition);
    }

    let mut dataset = Dataset::new(graphs, num_classes, splits)?;
    dataset.partitions = partitions;
    Ok(dataset)
}

// ---------------------------------------------------------------------------
// embedding bundles

/// Per-graph embeddings exported by a model (or by an external GNN): the
/// final-layer node embedding matrix and the pooled graph embedding.
#[derive(Debug, Clone)]
pub struct EmbeddingBundle {
    pub graph_id: String,
    pub readout_kind: Readout,
    /// n x d, row i = node i's embedding.
    pub node_embeddings: Array2<f64>,
    /// length d.
    pub graph_embedding: Array1<f64>,
}

impl EmbeddingBundle {
    pub fn new(
        graph_id: impl Into<String>,
        readout_kind: Readout,
        node_embeddings: Array2<f64>,
        graph_embedding: Array1<f64>,
    ) -> Result<Self> {
        if node_embeddings.nrows() == 0 {
            return Err(Error::Invalid("embedding bundle with zero nodes".into()));
        }
        if node_embeddings.ncols() != graph_embedding.len() {
            return Err(Error::Consistency(format!(
                "node embeddings have width {} but graph embedding has length {}",
                node_embeddings.ncols(),
                graph_embedding.len()
            )));
        }
        Ok(EmbeddingBundle {
            graph_id: graph_id.into(),
            readout_kind,
            node_embeddings,
            graph_embedding,
        })
    }

    pub fn n(&self) -> usize {
        self.node_embeddings.nrows()
    }

    pub fn d(&self) -> usize {
        self.graph_embedding.len()
    }
}

#[derive(Serialize, Deserialize)]
struct EmbeddingDto {
    graph_id: String,
    readout_kind: Readout,
    node_embeddings: Vec<Vec<f64>>,
    graph_embedding: Vec<f64>,
}

pub fn write_embedding_bundle(bundle: &EmbeddingBundle, path: &Path) -> Result<()> {
    let dto = EmbeddingDto {
        graph_id: bundle.graph_id.clone(),
        readout_kind: bundle.readout_kind,
        node_embeddings: rows_from_matrix(&bundle.node_embeddings),
        graph_embedding: bundle.graph_embedding.to_vec(),
    };
    write_json(&dto, path)
}

/// Reads an embedding bundle. A bundle flagged as mean readout is verified:
/// the stored graph embedding must equal the column mean of the node
/// embeddings to 1e-9 per entry.
pub fn read_embedding_bundle(path: &Path) -> Result<EmbeddingBundle> {
    let dto: EmbeddingDto = read_json(path)?;
    let node_embeddings = matrix_from_rows(&dto.node_embeddings, "node_embeddings")?;
    let bundle = EmbeddingBundle::new(
        dto.graph_id,
        dto.readout_kind,
        node_embeddings,
        Array1::from_vec(dto.graph_embedding),
    )?;
    if bundle.readout_kind == Readout::Mean {
        let n = bundle.n() as f64;
        for c in 0..bundle.d() {
            let mean = bundle.node_embeddings.column(c).sum() / n;
            if (mean - bundle.graph_embedding[c]).abs() > 1e-9 {
                return Err(Error::Consistency(format!(
                    "graph {} is flagged mean readout but graph_embedding[{c}] = {} \
                     differs from the column mean {}",
                    bundle.graph_id, bundle.graph_embedding[c], mean
                )));
            }
        }
    }
    Ok(bundle)
}

// ---------------------------------------------------------------------------
// model parameters

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LayerDto {
    Gcn {
        w: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    Gin {
        eps: f64,
        w1: Vec<Vec<f64>>,
        b1: Vec<f64>,
        w2: Vec<Vec<f64>>,
        b2: Vec<f64>,
    },
    Sage {
        w: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
}

#[derive(Serialize, Deserialize)]
struct ModelDto {
    readout: Readout,
    layers: Vec<LayerDto>,
    w_out: Vec<Vec<f64>>,
    b_out: Vec<f64>,
}

pub fn write_model_params(model: &ModelParams, path: &Path) -> Result<()> {
    let layers = model
        .layers
        .iter()
        .map(|l| match l {
            LayerParams::Gcn { w, b } => LayerDto::Gcn {
                w: rows_from_matrix(w),
                b: b.to_vec(),
            },
            LayerParams::Gin {
                eps,
                w1,
                b1,
                w2,
                b2,
            } => LayerDto::Gin {
                eps: *eps,
                w1: rows_from_matrix(w1),
                b1: b1.to_vec(),
                w2: rows_from_matrix(w2),
                b2: b2.to_vec(),
            },
            LayerParams::Sage { w, b } => LayerDto::Sage {
                w: rows_from_matrix(w),
                b: b.to_vec(),
            },
        })
        .collect();
    let dto = ModelDto {
        readout: model.readout,
        layers,
        w_out: rows_from_matrix(&model.w_out),
        b_out: model.b_out.to_vec(),
    };
    write_json(&dto, path)
}

fn linear_from_dto(w: &[Vec<f64>], b: &[f64], what: &str) -> Result<(Array2<f64>, Array1<f64>)> {
    let w = matrix_from_rows(w, what)?;
    if b.len() != w.ncols() {
        return Err(Error::Schema(format!(
            "{what}: bias length {} does not match weight columns {}",
            b.len(),
            w.ncols()
        )));
    }
    Ok((w, Array1::from_vec(b.to_vec())))
}

pub fn read_model_params(path: &Path) -> Result<ModelParams> {
    let dto: ModelDto = read_json(path)?;
    let mut layers = Vec::with_capacity(dto.layers.len());
    for (i, l) in dto.layers.iter().enumerate() {
        let at = format!("layers[{i}]");
        let layer = match l {
            LayerDto::Gcn { w, b } => {
                let (w, b) = linear_from_dto(w, b, &at)?;
                LayerParams::Gcn { w, b }
            }
            LayerDto::Gin {
                eps,
                w1,
                b1,
                w2,
                b2,
            } => {
                let (w1, b1) = linear_from_dto(w1, b1, &at)?;
                let (w2, b2) = linear_from_dto(w2, b2, &at)?;
                if w2.nrows() != w1.ncols() {
                    return Err(Error::Schema(format!(
                        "{at}: perceptron widths do not chain ({} vs {})",
                        w1.ncols(),
                        w2.nrows()
                    )));
                }
                LayerParams::Gin {
                    eps: *eps,
                    w1,
                    b1,
                    w2,
                    b2,
                }
            }
            LayerDto::Sage { w, b } => {
                let (w, b) = linear_from_dto(w, b, &at)?;
                if w.nrows() % 2 != 0 {
                    return Err(Error::Schema(format!(
                        "{at}: sage weight must have an even row count"
                    )));
                }
                LayerParams::Sage { w, b }
            }
        };
        layers.push(layer);
    }
    let (w_out, b_out) = linear_from_dto(&dto.w_out, &dto.b_out, "head")?;
    // the stack must chain into the head
    let mut prev: Option<usize> = None;
    for (i, l) in layers.iter().enumerate() {
        if let Some(p) = prev {
            if l.in_dim() != p {
                return Err(Error::Schema(format!(
                    "layers[{i}]: input width {} does not chain from previous output {}",
                    l.in_dim(),
                    p
                )));
            }
        }
        prev = Some(l.out_dim());
    }
    if let Some(d) = prev {
        if d != w_out.nrows() {
            return Err(Error::Schema(format!(
                "head: input width {} does not match final layer output {}",
                w_out.nrows(),
                d
            )));
        }
    }
    Ok(ModelParams {
        layers,
        readout: dto.readout,
        w_out,
        b_out,
    })
}

// ---------------------------------------------------------------------------
// partitions

#[derive(Serialize, Deserialize)]
struct PartitionDto {
    n: usize,
    groups: Vec<Vec<usize>>,
}

pub fn write_partition(partition: &Partition, path: &Path) -> Result<()> {
    let dto = PartitionDto {
        n: partition.n(),
        groups: partition.groups().to_vec(),
    };
    write_json(&dto, path)
}

pub fn read_partition(path: &Path) -> Result<Partition> {
    let dto: PartitionDto = read_json(path)?;
    Partition::new(dto.groups, dto.n)
}

// ---------------------------------------------------------------------------
// TU flat files

fn read_lines(path: &Path) -> Result<Vec<String>> {
    if !path.exists() {
        return Err(Error::MissingFile {
            path: path.display().to_string(),
        });
    }
    Ok(std::fs::read_to_string(path)?
        .lines()
        .map(|l| l.to_string())
        .collect())
}

fn parse_int(token: &str, path: &Path, line: usize, what: &str) -> Result<i64> {
    token.trim().parse::<i64>().map_err(|_| Error::MalformedLine {
        path: path.display().to_string(),
        line,
        msg: format!("expected {what}, got {token:?}"),
    })
}

/// Parses a TU-style corpus: `<DS>_A.txt` (global 1-based edges),
/// `<DS>_graph_indicator.txt`, `<DS>_graph_labels.txt`, and the optional
/// `<DS>_node_labels.txt` / `<DS>_node_attributes.txt`.
///
/// Node labels become one-hot features; attributes append as-is; when both
/// exist they are concatenated (one-hot first); with neither, every node
/// gets a single constant-1 feature. Raw graph labels remap onto {0..C-1}
/// by sorted order. Duplicate directed edge lines collapse to one undirected
/// edge. All graphs are tagged train; re-splitting is the caller's job.
pub fn parse_tu_dataset(dir: &Path, name: &str) -> Result<Dataset> {
    let a_path = dir.join(format!("{name}_A.txt"));
    let ind_path = dir.join(format!("{name}_graph_indicator.txt"));
    let lab_path = dir.join(format!("{name}_graph_labels.txt"));
    let nl_path = dir.join(format!("{name}_node_labels.txt"));
    let na_path = dir.join(format!("{name}_node_attributes.txt"));

    // graph indicator: global node -> graph index
    let ind_lines = read_lines(&ind_path)?;
    let mut node_graph = Vec::new(); // 0-based graph id per global node
    for (li, line) in ind_lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let gid = parse_int(line, &ind_path, li + 1, "a graph id")?;
        if gid < 1 {
            return Err(Error::MalformedLine {
                path: ind_path.display().to_string(),
                line: li + 1,
                msg: format!("graph ids are 1-based, got {gid}"),
            });
        }
        node_graph.push((gid - 1) as usize);
    }
    let total_nodes = node_graph.len();
    if total_nodes == 0 {
        return Err(Error::InconsistentCounts("indicator file has no nodes".into()));
    }
    let graph_count = node_graph.iter().max().unwrap() + 1;

    // local index of each global node within its graph
    let mut sizes = vec![0usize; graph_count];
    let mut local = Vec::with_capacity(total_nodes);
    for &g in &node_graph {
        local.push(sizes[g]);
        sizes[g] += 1;
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::InconsistentCounts(format!(
            "graph {} has no nodes",
            empty + 1
        )));
    }

    // graph labels, remapped by sorted distinct raw value
    let lab_lines = read_lines(&lab_path)?;
    let mut raw_labels = Vec::new();
    for (li, line) in lab_lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        raw_labels.push(parse_int(line, &lab_path, li + 1, "a graph label")?);
    }
    if raw_labels.len() != graph_count {
        return Err(Error::InconsistentCounts(format!(
            "{} graph labels for {} graphs",
            raw_labels.len(),
            graph_count
        )));
    }
    let mut distinct: Vec<i64> = raw_labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|r| distinct.binary_search(r).unwrap())
        .collect();
    let num_classes = distinct.len();

    // edges
    let mut edge_sets: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); graph_count];
    let a_lines = read_lines(&a_path)?;
    let mut edge_lines = 0usize;
    for (li, line) in a_lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        edge_lines += 1;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::MalformedLine {
                path: a_path.display().to_string(),
                line: li + 1,
                msg: format!("expected \"i, j\", got {line:?}"),
            });
        }
        let u = parse_int(parts[0], &a_path, li + 1, "a node id")?;
        let v = parse_int(parts[1], &a_path, li + 1, "a node id")?;
        if u < 1 || v < 1 || u as usize > total_nodes || v as usize > total_nodes {
            return Err(Error::MalformedLine {
                path: a_path.display().to_string(),
                line: li + 1,
                msg: format!("node id out of range 1..={total_nodes}"),
            });
        }
        let (u, v) = (u as usize - 1, v as usize - 1);
        if u == v {
            return Err(Error::MalformedLine {
                path: a_path.display().to_string(),
                line: li + 1,
                msg: "self-loop".into(),
            });
        }
        if node_graph[u] != node_graph[v] {
            return Err(Error::DanglingEdge {
                path: a_path.display().to_string(),
                line: li + 1,
                u: u + 1,
                v: v + 1,
            });
        }
        let g = node_graph[u];
        let (a, b) = (local[u].min(local[v]), local[u].max(local[v]));
        edge_sets[g].insert((a, b));
    }
    debug_assert!(edge_lines >= edge_sets.iter().map(|s| s.len()).sum::<usize>());

    // node features
    let node_label_values: Option<Vec<i64>> = if nl_path.exists() {
        let lines = read_lines(&nl_path)?;
        let mut vals = Vec::new();
        for (li, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            vals.push(parse_int(line, &nl_path, li + 1, "a node label")?);
        }
        if vals.len() != total_nodes {
            return Err(Error::InconsistentCounts(format!(
                "{} node labels for {} nodes",
                vals.len(),
                total_nodes
            )));
        }
        Some(vals)
    } else {
        None
    };
    let node_attr_rows: Option<Vec<Vec<f64>>> = if na_path.exists() {
        let lines = read_lines(&na_path)?;
        let mut rows = Vec::new();
        for (li, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|t| {
                    t.trim().parse::<f64>().map_err(|_| Error::MalformedLine {
                        path: na_path.display().to_string(),
                        line: li + 1,
                        msg: format!("expected a real number, got {t:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            if let Some(first) = rows.first() {
                let w: &Vec<f64> = first;
                if row.len() != w.len() {
                    return Err(Error::MalformedLine {
                        path: na_path.display().to_string(),
                        line: li + 1,
                        msg: format!("expected {} attributes, got {}", w.len(), row.len()),
                    });
                }
            }
            rows.push(row);
        }
        if rows.len() != total_nodes {
            return Err(Error::InconsistentCounts(format!(
                "{} attribute rows for {} nodes",
                rows.len(),
                total_nodes
            )));
        }
        Some(rows)
    } else {
        None
    };

    let label_onehot: Option<(Vec<i64>, usize)> = node_label_values.as_ref().map(|vals| {
        let mut d: Vec<i64> = vals.clone();
        d.sort_unstable();
        d.dedup();
        let width = d.len();
        (d, width)
    });
    let attr_width = node_attr_rows.as_ref().map(|r| r[0].len()).unwrap_or(0);
    let onehot_width = label_onehot.as_ref().map(|(_, w)| *w).unwrap_or(0);
    let width = if onehot_width + attr_width == 0 {
        1
    } else {
        onehot_width + attr_width
    };

    let mut features: Vec<Array2<f64>> = sizes
        .iter()
        .map(|&n| Array2::<f64>::zeros((n, width)))
        .collect();
    for global in 0..total_nodes {
        let (g, i) = (node_graph[global], local[global]);
        let mut col = 0usize;
        if let (Some(vals), Some((distinct, _))) = (&node_label_values, &label_onehot) {
            let pos = distinct.binary_search(&vals[global]).unwrap();
            features[g][[i, pos]] = 1.0;
            col = onehot_width;
        }
        if let Some(rows) = &node_attr_rows {
            for (k, &v) in rows[global].iter().enumerate() {
                features[g][[i, col + k]] = v;
            }
        } else if node_label_values.is_none() {
            features[g][[i, 0]] = 1.0;
        }
    }

    let mut graphs = Vec::with_capacity(graph_count);
    for g in 0..graph_count {
        let edges: Vec<(usize, usize)> = edge_sets[g].iter().copied().collect();
        let graph = Graph::from_edges(
            format!("{name}_{g}"),
            std::mem::take(&mut features[g]),
            &edges,
        )?
        .with_label(labels[g]);
        graphs.push(graph);
    }
    let splits = vec![Split::Train; graph_count];
    Dataset::new(graphs, num_classes, splits)
}
