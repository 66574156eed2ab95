//! Minimal deterministic GNN engine: GCN / GIN / GraphSAGE layer stacks, a
//! permutation-invariant readout, a linear classification head, manual
//! backpropagation, and full-batch training.
//!
//! Shapes follow one convention throughout: node matrices are n x dim, layer
//! weights are in x out, the head maps the pooled d-vector to C logits.
//! Every layer applies ReLU as its final nonlinearity. The derivative of
//! ReLU at exactly 0 is taken as 0.

mod backprop;
mod train;

pub use backprop::{
    finite_difference_check, finite_difference_check_scaled, lipschitz_check,
    loss_and_gradients, loss_from_embedding, saliency, GradCheckReport, Gradients,
    LipschitzCheck,
};
pub use train::{
    init_model, model_flat, model_set_flat, train, train_from, Architecture, TrainConfig,
    TrainOutcome,
};

use crate::graph::{normalized_adjacency, Graph};
use crate::{Error, Result};
use ndarray::{Array1, Array2, Axis};

/// Which message-passing rule a layer uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Gcn,
    Gin,
    Sage,
}

impl std::str::FromStr for LayerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(LayerKind::Gcn),
            "gin" => Ok(LayerKind::Gin),
            "sage" => Ok(LayerKind::Sage),
            other => Err(Error::Invalid(format!("unknown architecture {other:?}"))),
        }
    }
}

impl std::fmt::Display for LayerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LayerKind::Gcn => "gcn",
            LayerKind::Gin => "gin",
            LayerKind::Sage => "sage",
        })
    }
}

/// Architecture of one layer before parameters exist.
#[derive(Debug, Clone, Copy)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
    /// GIN self-mixing scalar; fixed, not trained. Ignored by other kinds.
    pub gin_eps: f64,
}

impl LayerSpec {
    pub fn new(kind: LayerKind, in_dim: usize, out_dim: usize) -> Self {
        LayerSpec {
            kind,
            in_dim,
            out_dim,
            gin_eps: 0.0,
        }
    }
}

/// Graph-level pooling applied to the final node embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    Mean,
    Sum,
    Max,
}

impl std::str::FromStr for Readout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Readout::Mean),
            "sum" => Ok(Readout::Sum),
            "max" => Ok(Readout::Max),
            other => Err(Error::Invalid(format!("unknown readout {other:?}"))),
        }
    }
}

impl std::fmt::Display for Readout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Readout::Mean => "mean",
            Readout::Sum => "sum",
            Readout::Max => "max",
        })
    }
}

/// Parameters of one layer.
///
/// GIN applies a 2-layer perceptron to (1+eps)H + AH; GCN and SAGE are a
/// single linear map (SAGE over the concatenation [H ‖ neighbor-mean(H)],
/// so its weight has 2*in rows).
#[derive(Debug, Clone)]
pub enum LayerParams {
    Gcn {
        w: Array2<f64>,
        b: Array1<f64>,
    },
    Gin {
        eps: f64,
        w1: Array2<f64>,
        b1: Array1<f64>,
        w2: Array2<f64>,
        b2: Array1<f64>,
    },
    Sage {
        w: Array2<f64>,
        b: Array1<f64>,
    },
}

impl LayerParams {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerParams::Gcn { .. } => LayerKind::Gcn,
            LayerParams::Gin { .. } => LayerKind::Gin,
            LayerParams::Sage { .. } => LayerKind::Sage,
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            LayerParams::Gcn { w, .. } => w.nrows(),
            LayerParams::Gin { w1, .. } => w1.nrows(),
            LayerParams::Sage { w, .. } => w.nrows() / 2,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            LayerParams::Gcn { w, .. } => w.ncols(),
            LayerParams::Gin { w2, .. } => w2.ncols(),
            LayerParams::Sage { w, .. } => w.ncols(),
        }
    }
}

/// Full model: layer stack, readout choice, and the linear output head.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub layers: Vec<LayerParams>,
    pub readout: Readout,
    /// d x C head weight.
    pub w_out: Array2<f64>,
    /// length-C head bias.
    pub b_out: Array1<f64>,
}

impl ModelParams {
    /// Embedding dimension d fed to the readout (and regressed on later).
    pub fn embedding_dim(&self) -> usize {
        self.w_out.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.w_out.ncols()
    }

    /// Feature width the model expects; None for a model with no layers
    /// (then inputs feed the head directly and must have width d).
    pub fn input_dim(&self) -> Option<usize> {
        self.layers.first().map(|l| l.in_dim())
    }
}

/// Column-wise mean, sum, or max of the node embedding matrix.
pub fn readout(h: &Array2<f64>, kind: Readout) -> Array1<f64> {
    match kind {
        Readout::Mean => h.mean_axis(Axis(0)).expect("n >= 1"),
        Readout::Sum => h.sum_axis(Axis(0)),
        Readout::Max => readout_max(h).0,
    }
}

/// Max readout plus the row index achieving each column's max (ties broken
/// to the lowest row index; the same rows receive the gradient).
fn readout_max(h: &Array2<f64>) -> (Array1<f64>, Vec<usize>) {
    let (n, d) = h.dim();
    debug_assert!(n >= 1);
    let mut z = Array1::<f64>::zeros(d);
    let mut arg = vec![0usize; d];
    for c in 0..d {
        let mut best = h[[0, c]];
        let mut best_i = 0usize;
        for i in 1..n {
            if h[[i, c]] > best {
                best = h[[i, c]];
                best_i = i;
            }
        }
        z[c] = best;
        arg[c] = best_i;
    }
    (z, arg)
}

/// Everything the backward pass needs from one forward evaluation.
pub(crate) struct Trace {
    /// hs[l] is the input to layer l; hs[L] is the final embedding matrix.
    pub hs: Vec<Array2<f64>>,
    pub caches: Vec<LayerCache>,
    /// GCN propagation operator, built once per graph when needed.
    pub norm_adj: Option<Array2<f64>>,
    pub z: Array1<f64>,
    /// Argmax rows for max readout.
    pub max_arg: Option<Vec<usize>>,
    pub logits: Array1<f64>,
}

pub(crate) enum LayerCache {
    /// p = Â·H (pre-weight), m = p·W + b (pre-activation)
    Gcn { p: Array2<f64>, m: Array2<f64> },
    /// p = (1+eps)H + AH, m1/u first linear + ReLU, m2 second pre-activation
    Gin {
        p: Array2<f64>,
        m1: Array2<f64>,
        u: Array2<f64>,
        m2: Array2<f64>,
    },
    /// cc = [H ‖ neighbor-mean(H)], m = cc·W + b
    Sage { cc: Array2<f64>, m: Array2<f64> },
}

fn relu(m: &Array2<f64>) -> Array2<f64> {
    m.mapv(|v| if v > 0.0 { v } else { 0.0 })
}

/// Row-normalized neighbor aggregation for SAGE: row i is the mean of i's
/// neighbors' rows, or zero when i is isolated. Self is excluded.
fn neighbor_mean(graph: &Graph, h: &Array2<f64>) -> Array2<f64> {
    let mut nm = graph.adjacency.dot(h);
    for (i, mut row) in nm.rows_mut().into_iter().enumerate() {
        let deg = graph.degree(i);
        if deg > 0 {
            row /= deg as f64;
        } else {
            row.fill(0.0);
        }
    }
    nm
}

pub(crate) fn forward_trace(model: &ModelParams, graph: &Graph) -> Result<Trace> {
    let expected = model.input_dim().unwrap_or(model.embedding_dim());
    if graph.p() != expected {
        return Err(Error::ShapeMismatch(format!(
            "graph {} has feature width {} but the model expects {}",
            graph.id,
            graph.p(),
            expected
        )));
    }

    let needs_norm_adj = model
        .layers
        .iter()
        .any(|l| matches!(l, LayerParams::Gcn { .. }));
    let norm_adj = needs_norm_adj.then(|| normalized_adjacency(graph));

    let mut hs = Vec::with_capacity(model.layers.len() + 1);
    hs.push(graph.features.clone());
    let mut caches = Vec::with_capacity(model.layers.len());

    for layer in &model.layers {
        let h = hs.last().unwrap();
        if h.ncols() != layer.in_dim() {
            return Err(Error::ShapeMismatch(format!(
                "layer expects input width {}, got {}",
                layer.in_dim(),
                h.ncols()
            )));
        }
        let (y, cache) = match layer {
            LayerParams::Gcn { w, b } => {
                let p = norm_adj.as_ref().unwrap().dot(h);
                let m = p.dot(w) + b;
                (relu(&m), LayerCache::Gcn { p, m })
            }
            LayerParams::Gin {
                eps,
                w1,
                b1,
                w2,
                b2,
            } => {
                let p = h * (1.0 + eps) + graph.adjacency.dot(h);
                let m1 = p.dot(w1) + b1;
                let u = relu(&m1);
                let m2 = u.dot(w2) + b2;
                (relu(&m2), LayerCache::Gin { p, m1, u, m2 })
            }
            LayerParams::Sage { w, b } => {
                let nm = neighbor_mean(graph, h);
                let cc = ndarray::concatenate(Axis(1), &[h.view(), nm.view()])
                    .expect("row counts match");
                let m = cc.dot(w) + b;
                (relu(&m), LayerCache::Sage { cc, m })
            }
        };
        hs.push(y);
        caches.push(cache);
    }

    let final_h = hs.last().unwrap();
    if final_h.ncols() != model.embedding_dim() {
        return Err(Error::ShapeMismatch(format!(
            "final embedding width {} does not match head input {}",
            final_h.ncols(),
            model.embedding_dim()
        )));
    }
    let (z, max_arg) = match model.readout {
        Readout::Max => {
            let (z, arg) = readout_max(final_h);
            (z, Some(arg))
        }
        kind => (readout(final_h, kind), None),
    };
    let logits = z.dot(&model.w_out) + &model.b_out;
    Ok(Trace {
        hs,
        caches,
        norm_adj,
        z,
        max_arg,
        logits,
    })
}

/// One forward evaluation: final node embeddings H, pooled embedding z,
/// logits, and softmax probabilities.
pub struct Forward {
    pub node_embeddings: Array2<f64>,
    pub graph_embedding: Array1<f64>,
    pub logits: Array1<f64>,
    pub probabilities: Array1<f64>,
}

/// Numerically stable softmax.
pub fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

pub fn forward(model: &ModelParams, graph: &Graph) -> Result<Forward> {
    let trace = forward_trace(model, graph)?;
    let probabilities = softmax(&trace.logits);
    let mut hs = trace.hs;
    Ok(Forward {
        node_embeddings: hs.pop().unwrap(),
        graph_embedding: trace.z,
        logits: trace.logits,
        probabilities,
    })
}

/// Predicted class: argmax logit, ties to the lowest index.
pub fn predict(model: &ModelParams, graph: &Graph) -> Result<usize> {
    let f = forward(model, graph)?;
    let mut best = 0usize;
    for c in 1..f.logits.len() {
        if f.logits[c] > f.logits[best] {
            best = c;
        }
    }
    Ok(best)
}

/// Fraction of graphs whose predicted class equals the label.
pub fn accuracy<'a, I>(model: &ModelParams, graphs: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a Graph>,
{
    let mut correct = 0usize;
    let mut total = 0usize;
    for g in graphs {
        let label = g.label.ok_or_else(|| Error::MissingLabel {
            graph_id: g.id.clone(),
        })?;
        if predict(model, g)? == label {
            correct += 1;
        }
        total += 1;
    }
    Ok(if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    })
}
