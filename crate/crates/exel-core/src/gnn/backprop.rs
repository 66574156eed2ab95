//! Manual reverse-mode differentiation through the head, readout, and layer
//! stack, plus the diagnostics built on it: finite-difference verification,
//! gradient saliency, and the embedding-space Lipschitz check.

use super::train::flatten_params;
use super::{forward_trace, softmax, LayerCache, LayerParams, ModelParams, Readout};
use crate::graph::Graph;
use crate::linalg::spectral_norm;
use crate::rng::Rng;
use crate::{Error, Result};
use ndarray::{s, Array1, Array2, Axis};

/// Loss and every gradient of one labeled graph.
pub struct Gradients {
    pub loss: f64,
    /// Flat parameter gradient, aligned with `ModelParams::flat`.
    pub d_params: Vec<f64>,
    /// d loss / d node_features, n x p.
    pub d_input: Array2<f64>,
    /// d loss / d final-layer embeddings, n x d.
    pub d_final_h: Array2<f64>,
}

fn relu_mask(pre: &Array2<f64>, grad: &Array2<f64>) -> Array2<f64> {
    let mut out = grad.clone();
    out.zip_mut_with(pre, |g, &m| {
        if m <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

/// Cross-entropy loss −log softmax(logits)[label] via log-sum-exp.
fn cross_entropy(logits: &Array1<f64>, label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.mapv(|v| (v - max).exp()).sum().ln();
    lse - logits[label]
}

/// Forward + full backward pass for one labeled graph.
pub fn loss_and_gradients(model: &ModelParams, graph: &Graph, label: usize) -> Result<Gradients> {
    let c = model.num_classes();
    if label >= c {
        return Err(Error::LabelOutOfRange {
            label,
            num_classes: c,
        });
    }
    let trace = forward_trace(model, graph)?;
    let loss = cross_entropy(&trace.logits, label);

    // head: d logits = softmax(logits) − one_hot(label)
    let mut d_logits = softmax(&trace.logits);
    d_logits[label] -= 1.0;
    let z_col = trace.z.view().insert_axis(Axis(1)); // d x 1
    let dl_row = d_logits.view().insert_axis(Axis(0)); // 1 x C
    let d_w_out = z_col.dot(&dl_row); // d x C
    let d_b_out = d_logits.clone();
    let d_z = model.w_out.dot(&d_logits); // d

    // readout backward
    let final_h = trace.hs.last().unwrap();
    let (n, d) = final_h.dim();
    let mut d_h = Array2::<f64>::zeros((n, d));
    match model.readout {
        Readout::Mean => {
            let per_row = &d_z / n as f64;
            for mut row in d_h.rows_mut() {
                row.assign(&per_row);
            }
        }
        Readout::Sum => {
            for mut row in d_h.rows_mut() {
                row.assign(&d_z);
            }
        }
        Readout::Max => {
            let arg = trace.max_arg.as_ref().expect("max readout records argmax");
            for col in 0..d {
                d_h[[arg[col], col]] += d_z[col];
            }
        }
    }

    // layers, in reverse
    let mut d_layers: Vec<LayerParams> = Vec::with_capacity(model.layers.len());
    let mut d_y = d_h.clone();
    for (l, layer) in model.layers.iter().enumerate().rev() {
        let cache = &trace.caches[l];
        let (d_layer, d_h_in) = match (layer, cache) {
            (LayerParams::Gcn { w, .. }, LayerCache::Gcn { p, m }) => {
                let d_m = relu_mask(m, &d_y);
                let d_w = p.t().dot(&d_m);
                let d_b = d_m.sum_axis(Axis(0));
                let d_p = d_m.dot(&w.t());
                // Â is symmetric, so the adjoint is Â again
                let d_h_in = trace.norm_adj.as_ref().unwrap().dot(&d_p);
                (LayerParams::Gcn { w: d_w, b: d_b }, d_h_in)
            }
            (
                LayerParams::Gin {
                    eps, w1, w2, ..
                },
                LayerCache::Gin { p, m1, u, m2 },
            ) => {
                let d_m2 = relu_mask(m2, &d_y);
                let d_w2 = u.t().dot(&d_m2);
                let d_b2 = d_m2.sum_axis(Axis(0));
                let d_u = d_m2.dot(&w2.t());
                let d_m1 = relu_mask(m1, &d_u);
                let d_w1 = p.t().dot(&d_m1);
                let d_b1 = d_m1.sum_axis(Axis(0));
                let d_p = d_m1.dot(&w1.t());
                let d_h_in = &d_p * (1.0 + eps) + graph.adjacency.dot(&d_p);
                (
                    LayerParams::Gin {
                        eps: *eps,
                        w1: d_w1,
                        b1: d_b1,
                        w2: d_w2,
                        b2: d_b2,
                    },
                    d_h_in,
                )
            }
            (LayerParams::Sage { w, .. }, LayerCache::Sage { cc, m }) => {
                let in_dim = layer.in_dim();
                let d_m = relu_mask(m, &d_y);
                let d_w = cc.t().dot(&d_m);
                let d_b = d_m.sum_axis(Axis(0));
                let d_cc = d_m.dot(&w.t());
                let d_self = d_cc.slice(s![.., ..in_dim]).to_owned();
                let mut d_nm = d_cc.slice(s![.., in_dim..]).to_owned();
                // adjoint of row-normalized aggregation: scale rows by 1/deg,
                // then propagate through the symmetric A
                for (i, mut row) in d_nm.rows_mut().into_iter().enumerate() {
                    let deg = graph.degree(i);
                    if deg > 0 {
                        row /= deg as f64;
                    } else {
                        row.fill(0.0);
                    }
                }
                let d_h_in = d_self + graph.adjacency.dot(&d_nm);
                (LayerParams::Sage { w: d_w, b: d_b }, d_h_in)
            }
            _ => unreachable!("cache kind always matches layer kind"),
        };
        d_layers.push(d_layer);
        d_y = d_h_in;
    }
    d_layers.reverse();

    let d_params = flatten_params(&d_layers, &d_w_out, &d_b_out);
    Ok(Gradients {
        loss,
        d_params,
        d_input: d_y,
        d_final_h: d_h,
    })
}

/// Cross-entropy loss as a function of the pooled embedding alone.
pub fn loss_from_embedding(model: &ModelParams, z: &Array1<f64>, label: usize) -> f64 {
    let logits = z.dot(&model.w_out) + &model.b_out;
    cross_entropy(&logits, label)
}

/// Per-node gradient-saliency scores: L2 norm of each row of dX.
///
/// Unlabeled graphs are scored against the model's own prediction.
pub fn saliency(model: &ModelParams, graph: &Graph) -> Result<Vec<f64>> {
    let label = match graph.label {
        Some(l) => l,
        None => super::predict(model, graph)?,
    };
    let grads = loss_and_gradients(model, graph, label)?;
    Ok(grads
        .d_input
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .collect())
}

/// Result of the embedding-space Lipschitz verification.
pub struct LipschitzCheck {
    /// Largest observed |L(z1,y) − L(z2,y)| / ‖z1 − z2‖.
    pub max_ratio: f64,
    /// Theoretical constant K = √2 · σ_max(W_out).
    pub bound: f64,
}

/// Samples random embedding pairs and verifies the loss difference never
/// exceeds K·‖z1−z2‖ with K = √2·σ_max(W_out).
pub fn lipschitz_check(model: &ModelParams, pair_count: usize, seed: u64) -> LipschitzCheck {
    let bound = (2.0f64).sqrt() * spectral_norm(model.w_out.view(), 100, 0xA11CE);
    let d = model.embedding_dim();
    let c = model.num_classes();
    let mut rng = Rng::new(seed);
    let mut max_ratio = 0.0f64;
    for _ in 0..pair_count {
        let z1 = Array1::from_shape_fn(d, |_| rng.uniform(-1.0, 1.0));
        let z2 = Array1::from_shape_fn(d, |_| rng.uniform(-1.0, 1.0));
        let y = rng.gen_range(c);
        let diff = &z1 - &z2;
        let dist = diff.dot(&diff).sqrt();
        if dist == 0.0 {
            continue;
        }
        let ratio = (loss_from_embedding(model, &z1, y) - loss_from_embedding(model, &z2, y))
            .abs()
            / dist;
        max_ratio = max_ratio.max(ratio);
    }
    LipschitzCheck { max_ratio, bound }
}

/// Outcome of one finite-difference comparison.
pub struct GradCheckReport {
    /// Largest relative error over all parameters and feature entries.
    pub max_rel_error: f64,
    /// Where it occurred: "param[i]" or "input[i][j]".
    pub worst_coordinate: String,
}

/// Compares analytic gradients against central finite differences over every
/// parameter and every input feature entry.
///
/// Relative error denominators are floored at 1e-3 so that coordinates with
/// near-zero gradients are compared absolutely; difference-quotient noise at
/// step 1e-5 sits around 1e-10, far below the floor times any meaningful
/// tolerance.
pub fn finite_difference_check(
    model: &ModelParams,
    graph: &Graph,
    label: usize,
    step: f64,
) -> Result<GradCheckReport> {
    finite_difference_check_scaled(model, graph, label, step, 1.0)
}

/// Same as [`finite_difference_check`] but with the analytic gradient scaled
/// by `analytic_scale` first. A scale of 1.0 is the honest check; anything
/// else is a deliberately injected fault for negative-control testing.
pub fn finite_difference_check_scaled(
    model: &ModelParams,
    graph: &Graph,
    label: usize,
    step: f64,
    analytic_scale: f64,
) -> Result<GradCheckReport> {
    let analytic = loss_and_gradients(model, graph, label)?;
    let mut max_rel = 0.0f64;
    let mut worst = String::from("none");

    let consider = |a: f64, n: f64, coord: String, max_rel: &mut f64, worst: &mut String| {
        let denom = a.abs().max(n.abs()).max(1e-3);
        let rel = (a - n).abs() / denom;
        if rel > *max_rel {
            *max_rel = rel;
            *worst = coord;
        }
    };

    // parameters
    let flat = super::train::model_flat(model);
    for i in 0..flat.len() {
        let mut plus = model.clone();
        let mut minus = model.clone();
        let mut fp = flat.clone();
        fp[i] += step;
        super::train::model_set_flat(&mut plus, &fp);
        fp[i] -= 2.0 * step;
        super::train::model_set_flat(&mut minus, &fp);
        let lp = loss_and_gradients(&plus, graph, label)?.loss;
        let lm = loss_and_gradients(&minus, graph, label)?.loss;
        let numeric = (lp - lm) / (2.0 * step);
        consider(
            analytic.d_params[i] * analytic_scale,
            numeric,
            format!("param[{i}]"),
            &mut max_rel,
            &mut worst,
        );
    }

    // input features
    let (n, p) = graph.features.dim();
    for i in 0..n {
        for j in 0..p {
            let mut plus = graph.clone();
            plus.features[[i, j]] += step;
            let mut minus = graph.clone();
            minus.features[[i, j]] -= step;
            let lp = loss_and_gradients(model, &plus, label)?.loss;
            let lm = loss_and_gradients(model, &minus, label)?.loss;
            let numeric = (lp - lm) / (2.0 * step);
            consider(
                analytic.d_input[[i, j]] * analytic_scale,
                numeric,
                format!("input[{i}][{j}]"),
                &mut max_rel,
                &mut worst,
            );
        }
    }

    Ok(GradCheckReport {
        max_rel_error: max_rel,
        worst_coordinate: worst,
    })
}
