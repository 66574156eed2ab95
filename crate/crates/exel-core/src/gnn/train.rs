//! Seeded parameter initialization, flat parameter views, and full-batch
//! gradient-descent training.
//!
//! The flat parameter order is pinned and shared by initialization, the
//! optimizer, and gradient flattening: for each layer in stack order, weight
//! matrices row-major then biases (GIN: w1, b1, w2, b2), followed by the head
//! w_out row-major and b_out. Seeded initialization draws in exactly this
//! order, one uniform(-init_scale, +init_scale) value per parameter.

use super::{LayerKind, LayerParams, LayerSpec, ModelParams, Readout};
use crate::graph::Graph;
use crate::rng::Rng;
use crate::{Error, Result};
use ndarray::{Array1, Array2};

/// Model architecture: the layer stack plus readout and class count.
/// This is a model minus its numbers.
#[derive(Debug, Clone)]
pub struct Architecture {
    pub layers: Vec<LayerSpec>,
    pub readout: Readout,
    pub num_classes: usize,
}

impl Architecture {
    /// A homogeneous stack: `dims` chains input -> hidden -> ... -> d.
    pub fn homogeneous(
        kind: LayerKind,
        input_dim: usize,
        dims: &[usize],
        readout: Readout,
        num_classes: usize,
    ) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Invalid("at least one layer dimension required".into()));
        }
        let mut layers = Vec::with_capacity(dims.len());
        let mut prev = input_dim;
        for &d in dims {
            layers.push(LayerSpec::new(kind, prev, d));
            prev = d;
        }
        Ok(Architecture {
            layers,
            readout,
            num_classes,
        })
    }

    /// Embedding dimension d produced by the stack.
    pub fn embedding_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }
}

/// Draws a fresh parameter set for the given architecture, every value
/// uniform in [-init_scale, +init_scale] from a splitmix64/xoshiro stream.
pub fn init_model(
    specs: &[LayerSpec],
    readout: Readout,
    num_classes: usize,
    seed: u64,
    init_scale: f64,
) -> Result<ModelParams> {
    if specs.is_empty() {
        return Err(Error::Invalid("model needs at least one layer".into()));
    }
    if num_classes == 0 {
        return Err(Error::Invalid("num_classes must be positive".into()));
    }
    for w in specs.windows(2) {
        if w[0].out_dim != w[1].in_dim {
            return Err(Error::ShapeMismatch(format!(
                "layer output width {} does not chain into next input width {}",
                w[0].out_dim, w[1].in_dim
            )));
        }
    }
    if specs.iter().any(|s| s.in_dim == 0 || s.out_dim == 0) {
        return Err(Error::Invalid("layer dimensions must be positive".into()));
    }

    let mut rng = Rng::new(seed);
    let draw_mat =
        |rows: usize, cols: usize, rng: &mut Rng| -> Array2<f64> {
            Array2::from_shape_fn((rows, cols), |_| rng.uniform(-init_scale, init_scale))
        };
    let draw_vec = |len: usize, rng: &mut Rng| -> Array1<f64> {
        Array1::from_shape_fn(len, |_| rng.uniform(-init_scale, init_scale))
    };

    let mut layers = Vec::with_capacity(specs.len());
    for spec in specs {
        let layer = match spec.kind {
            LayerKind::Gcn => LayerParams::Gcn {
                w: draw_mat(spec.in_dim, spec.out_dim, &mut rng),
                b: draw_vec(spec.out_dim, &mut rng),
            },
            LayerKind::Gin => LayerParams::Gin {
                eps: spec.gin_eps,
                w1: draw_mat(spec.in_dim, spec.out_dim, &mut rng),
                b1: draw_vec(spec.out_dim, &mut rng),
                w2: draw_mat(spec.out_dim, spec.out_dim, &mut rng),
                b2: draw_vec(spec.out_dim, &mut rng),
            },
            LayerKind::Sage => LayerParams::Sage {
                w: draw_mat(2 * spec.in_dim, spec.out_dim, &mut rng),
                b: draw_vec(spec.out_dim, &mut rng),
            },
        };
        layers.push(layer);
    }
    let d = specs.last().unwrap().out_dim;
    let w_out = draw_mat(d, num_classes, &mut rng);
    let b_out = draw_vec(num_classes, &mut rng);
    Ok(ModelParams {
        layers,
        readout,
        w_out,
        b_out,
    })
}

/// Flattens layer parameters plus a head into one vector in the pinned order.
/// Gradient containers reuse this so gradients align with `model_flat`.
pub(crate) fn flatten_params(
    layers: &[LayerParams],
    w_out: &Array2<f64>,
    b_out: &Array1<f64>,
) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in layers {
        match layer {
            LayerParams::Gcn { w, b } | LayerParams::Sage { w, b } => {
                out.extend(w.iter());
                out.extend(b.iter());
            }
            LayerParams::Gin {
                w1, b1, w2, b2, ..
            } => {
                out.extend(w1.iter());
                out.extend(b1.iter());
                out.extend(w2.iter());
                out.extend(b2.iter());
            }
        }
    }
    out.extend(w_out.iter());
    out.extend(b_out.iter());
    out
}

/// All trainable parameters of the model as one flat vector.
pub fn model_flat(model: &ModelParams) -> Vec<f64> {
    flatten_params(&model.layers, &model.w_out, &model.b_out)
}

/// Writes a flat vector back into the model. Panics on length mismatch
/// (caller bug: flat vectors only come from `model_flat`-shaped sources).
pub fn model_set_flat(model: &mut ModelParams, flat: &[f64]) {
    let mut it = flat.iter();
    let fill2 = |m: &mut Array2<f64>, it: &mut std::slice::Iter<f64>| {
        for v in m.iter_mut() {
            *v = *it.next().expect("flat vector too short");
        }
    };
    let fill1 = |v: &mut Array1<f64>, it: &mut std::slice::Iter<f64>| {
        for x in v.iter_mut() {
            *x = *it.next().expect("flat vector too short");
        }
    };
    for layer in &mut model.layers {
        match layer {
            LayerParams::Gcn { w, b } | LayerParams::Sage { w, b } => {
                fill2(w, &mut it);
                fill1(b, &mut it);
            }
            LayerParams::Gin {
                w1, b1, w2, b2, ..
            } => {
                fill2(w1, &mut it);
                fill1(b1, &mut it);
                fill2(w2, &mut it);
                fill1(b2, &mut it);
            }
        }
    }
    fill2(&mut model.w_out, &mut it);
    fill1(&mut model.b_out, &mut it);
    assert!(it.next().is_none(), "flat vector too long");
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            learning_rate: 0.05,
            seed: 0,
            // Uniform(-0.7, 0.7): small inits leave degree-feature models
            // stuck near the symmetric saddle for hundreds of epochs.
            init_scale: 0.7,
        }
    }
}

/// A trained model plus the mean loss recorded at the start of each epoch.
pub struct TrainOutcome {
    pub model: ModelParams,
    pub loss_trace: Vec<f64>,
}

/// Seeded init followed by [`train_from`].
pub fn train(arch: &Architecture, graphs: &[&Graph], config: &TrainConfig) -> Result<TrainOutcome> {
    let model = init_model(
        &arch.layers,
        arch.readout,
        arch.num_classes,
        config.seed,
        config.init_scale,
    )?;
    train_from(model, graphs, config)
}

/// Full-batch gradient descent on the mean cross-entropy over `graphs`.
///
/// Per epoch: gradients are accumulated in graph-index order, the mean loss
/// is recorded, then one step is taken. A non-finite loss aborts with the
/// trace collected so far. `epochs: 0` returns the model untouched.
pub fn train_from(
    mut model: ModelParams,
    graphs: &[&Graph],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if graphs.is_empty() {
        return Err(Error::Invalid("no training graphs".into()));
    }
    if config.learning_rate < 0.0 {
        return Err(Error::Invalid("learning_rate must be nonnegative".into()));
    }
    let labels: Vec<usize> = graphs
        .iter()
        .map(|g| {
            g.label.ok_or_else(|| Error::MissingLabel {
                graph_id: g.id.clone(),
            })
        })
        .collect::<Result<_>>()?;

    let mut flat = model_flat(&model);
    let mut trace = Vec::with_capacity(config.epochs);
    let count = graphs.len() as f64;

    for epoch in 0..config.epochs {
        let mut grad_sum = vec![0.0f64; flat.len()];
        let mut loss_sum = 0.0f64;
        for (g, &label) in graphs.iter().zip(&labels) {
            let grads = super::loss_and_gradients(&model, g, label)?;
            if !grads.loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    graph_id: g.id.clone(),
                    trace,
                });
            }
            loss_sum += grads.loss;
            for (s, d) in grad_sum.iter_mut().zip(&grads.d_params) {
                *s += d;
            }
        }
        trace.push(loss_sum / count);
        for (w, g) in flat.iter_mut().zip(&grad_sum) {
            *w -= config.learning_rate * g / count;
        }
        model_set_flat(&mut model, &flat);
    }

    Ok(TrainOutcome {
        model,
        loss_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn tiny_dataset(rng: &mut Rng, count: usize, n: usize, p: usize) -> Vec<Graph> {
        (0..count)
            .map(|k| {
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        if rng.next_f64() < 0.5 {
                            edges.push((i, j));
                        }
                    }
                }
                let feats = Array2::from_shape_fn((n, p), |_| rng.uniform(-1.0, 1.0));
                Graph::from_edges(format!("g{k}"), feats, &edges)
                    .unwrap()
                    .with_label(k % 2)
            })
            .collect()
    }

    #[test]
    fn init_is_deterministic_and_order_pinned() {
        let specs = [
            LayerSpec::new(LayerKind::Gin, 3, 4),
            LayerSpec::new(LayerKind::Gcn, 4, 2),
        ];
        let a = init_model(&specs, Readout::Mean, 2, 7, 0.5).unwrap();
        let b = init_model(&specs, Readout::Mean, 2, 7, 0.5).unwrap();
        assert_eq!(model_flat(&a), model_flat(&b));
        // first drawn value lands in w1[0][0] of the GIN layer
        let mut rng = Rng::new(7);
        let first = rng.uniform(-0.5, 0.5);
        match &a.layers[0] {
            LayerParams::Gin { w1, .. } => assert_eq!(w1[[0, 0]], first),
            _ => unreachable!(),
        }
    }

    #[test]
    fn init_rejects_bad_chains() {
        let specs = [
            LayerSpec::new(LayerKind::Gcn, 3, 4),
            LayerSpec::new(LayerKind::Gcn, 5, 2),
        ];
        assert!(init_model(&specs, Readout::Mean, 2, 0, 0.1).is_err());
        assert!(init_model(&[], Readout::Mean, 2, 0, 0.1).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let specs = [
            LayerSpec::new(LayerKind::Sage, 2, 3),
            LayerSpec::new(LayerKind::Gin, 3, 2),
        ];
        let model = init_model(&specs, Readout::Max, 3, 5, 0.8).unwrap();
        let flat = model_flat(&model);
        let mut other = init_model(&specs, Readout::Max, 3, 99, 0.8).unwrap();
        model_set_flat(&mut other, &flat);
        assert_eq!(model_flat(&other), flat);
    }

    #[test]
    fn zero_epochs_returns_seeded_init() {
        let arch = Architecture::homogeneous(LayerKind::Gcn, 2, &[3], Readout::Mean, 2).unwrap();
        let mut rng = Rng::new(50);
        let data = tiny_dataset(&mut rng, 4, 4, 2);
        let refs: Vec<&Graph> = data.iter().collect();
        let config = TrainConfig {
            epochs: 0,
            seed: 123,
            ..TrainConfig::default()
        };
        let outcome = train(&arch, &refs, &config).unwrap();
        let init = init_model(&arch.layers, arch.readout, 2, 123, config.init_scale).unwrap();
        assert_eq!(model_flat(&outcome.model), model_flat(&init));
        assert!(outcome.loss_trace.is_empty());
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let arch = Architecture::homogeneous(LayerKind::Sage, 2, &[3], Readout::Sum, 2).unwrap();
        let mut rng = Rng::new(51);
        let data = tiny_dataset(&mut rng, 4, 4, 2);
        let refs: Vec<&Graph> = data.iter().collect();
        let config = TrainConfig {
            epochs: 5,
            learning_rate: 0.0,
            seed: 9,
            init_scale: 0.3,
        };
        let outcome = train(&arch, &refs, &config).unwrap();
        let init = init_model(&arch.layers, arch.readout, 2, 9, 0.3).unwrap();
        assert_eq!(model_flat(&outcome.model), model_flat(&init));
        assert_eq!(outcome.loss_trace.len(), 5);
        // constant parameters: every epoch sees the same loss
        for w in outcome.loss_trace.windows(2) {
            assert_eq!(w[0], w[1]);
        }
    }

    #[test]
    fn one_step_matches_hand_chain_rule() {
        // isolated node, scalar GCN layer, mean readout, 2 classes
        let w0 = 0.6;
        let x = 1.1;
        let v = [0.5, -0.2];
        let model = ModelParams {
            layers: vec![LayerParams::Gcn {
                w: array![[w0]],
                b: array![0.0],
            }],
            readout: Readout::Mean,
            w_out: array![[v[0], v[1]]],
            b_out: array![0.0, 0.0],
        };
        let g = Graph::from_edges("g", array![[x]], &[])
            .unwrap()
            .with_label(0);
        let lr = 0.1;
        let config = TrainConfig {
            epochs: 1,
            learning_rate: lr,
            seed: 0,
            init_scale: 0.0,
        };
        let outcome = train_from(model, &[&g], &config).unwrap();

        // hand gradient: h = w·x, z = h, logits = z·v, dlogits = p − e0
        let h = w0 * x;
        let logits = [h * v[0], h * v[1]];
        let m = logits[0].max(logits[1]);
        let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
        let p = [e[0] / (e[0] + e[1]), e[1] / (e[0] + e[1])];
        let dlog = [p[0] - 1.0, p[1]];
        let dz = v[0] * dlog[0] + v[1] * dlog[1];
        let dw = x * dz; // dW = pᵀ·dM with p = Â·x = x
        let expected_w = w0 - lr * dw;
        match &outcome.model.layers[0] {
            LayerParams::Gcn { w, .. } => {
                assert_relative_eq!(w[[0, 0]], expected_w, epsilon = 1e-14)
            }
            _ => unreachable!(),
        }
        // head gradient: dW_out = zᵀ·dlogits
        let expected_v0 = v[0] - lr * h * dlog[0];
        let expected_v1 = v[1] - lr * h * dlog[1];
        assert_relative_eq!(outcome.model.w_out[[0, 0]], expected_v0, epsilon = 1e-14);
        assert_relative_eq!(outcome.model.w_out[[0, 1]], expected_v1, epsilon = 1e-14);
    }

    #[test]
    fn small_lr_decreases_loss() {
        let arch = Architecture::homogeneous(LayerKind::Gcn, 3, &[4], Readout::Mean, 2).unwrap();
        let mut rng = Rng::new(52);
        let data = tiny_dataset(&mut rng, 8, 5, 3);
        let refs: Vec<&Graph> = data.iter().collect();
        let config = TrainConfig {
            epochs: 12,
            learning_rate: 1e-3,
            seed: 3,
            init_scale: 0.5,
        };
        let outcome = train(&arch, &refs, &config).unwrap();
        assert!(outcome.loss_trace[10] < outcome.loss_trace[0]);
    }

    #[test]
    fn divergence_aborts_with_non_finite_loss() {
        // handcrafted blow-up: extreme features and a unit learning rate send
        // the first-layer weight to -2e160 after one step; the node with the
        // negative feature then produces +inf through the ReLU and the loss
        // turns non-finite at epoch 1
        let graph = Graph::from_edges(
            "g0",
            ndarray::array![[1e160], [-1e160]],
            &[],
        )
        .unwrap()
        .with_label(1);
        let model = ModelParams {
            layers: vec![LayerParams::Gcn {
                w: ndarray::array![[1.0]],
                b: ndarray::Array1::zeros(1),
            }],
            readout: Readout::Sum,
            w_out: ndarray::array![[1.0, -1.0]],
            b_out: ndarray::Array1::zeros(2),
        };
        let config = TrainConfig {
            epochs: 50,
            learning_rate: 1.0,
            seed: 1,
            init_scale: 0.5,
        };
        match train_from(model, &[&graph], &config) {
            Err(Error::NonFiniteLoss { epoch, trace, .. }) => {
                assert!(epoch > 0);
                assert!(trace.iter().all(|l| l.is_finite()));
            }
            Err(e) => panic!("expected NonFiniteLoss, got {e}"),
            Ok(_) => panic!("expected NonFiniteLoss, training finished"),
        }
    }

    #[test]
    fn unlabeled_graph_rejected() {
        let arch = Architecture::homogeneous(LayerKind::Gcn, 2, &[3], Readout::Mean, 2).unwrap();
        let g = Graph::from_edges("u", Array2::zeros((2, 2)), &[(0, 1)]).unwrap();
        let config = TrainConfig::default();
        assert!(matches!(
            train(&arch, &[&g], &config),
            Err(Error::MissingLabel { .. })
        ));
    }
}
