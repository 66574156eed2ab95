//! Evaluation harness: fidelity of explanations under node masking, and
//! ROC/PR agreement with ground-truth node masks.
//!
//! Fidelity asks how much the classifier's F1 drops when the features of the
//! selected nodes are zeroed out. Large drops mean the selection actually
//! carried the signal the model used.

use crate::gnn::{predict, ModelParams};
use crate::graph::{Dataset, Graph, Split};
use crate::rng::Rng;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Masks a node selection out of a graph: the listed feature rows become
/// zero, the adjacency stays untouched.
pub fn mask_nodes(graph: &Graph, nodes: &[usize]) -> Result<Graph> {
    let mut masked = graph.clone();
    for &j in nodes {
        if j >= graph.n() {
            return Err(Error::NodeIndexOutOfRange {
                index: j,
                n: graph.n(),
            });
        }
        masked.features.row_mut(j).fill(0.0);
    }
    Ok(masked)
}

/// Binary F1 for one positive class: 2TP/(2TP+FP+FN), 0 on an empty
/// denominator.
pub fn f1_score(predictions: &[usize], labels: &[usize], positive_class: usize) -> f64 {
    assert_eq!(predictions.len(), labels.len());
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p == positive_class, y == positive_class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Macro F1: the unweighted mean of per-class binary F1 over all classes.
pub fn macro_f1(predictions: &[usize], labels: &[usize], num_classes: usize) -> f64 {
    assert!(num_classes > 0);
    (0..num_classes)
        .map(|c| f1_score(predictions, labels, c))
        .sum::<f64>()
        / num_classes as f64
}

/// The score used throughout: binary F1 on class 1 for two-class data,
/// macro F1 otherwise.
fn dataset_f1(predictions: &[usize], labels: &[usize], num_classes: usize) -> f64 {
    if num_classes == 2 {
        f1_score(predictions, labels, 1)
    } else {
        macro_f1(predictions, labels, num_classes)
    }
}

/// How the F1 pair is aggregated across the split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum F1Mode {
    /// One confusion count over the whole split (the default reading).
    #[default]
    DatasetLevel,
    /// Per-graph F1 values averaged afterwards (alternative reading, kept
    /// for comparison).
    PerGraphMean,
}

/// One graph's prediction before and after masking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskedPrediction {
    pub graph_id: String,
    pub label: usize,
    pub predicted: usize,
    pub predicted_masked: usize,
    pub masked_node_count: usize,
}

/// Fidelity outcome; `fidelity` is stored as the exact difference of the two
/// F1 numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityResult {
    pub f1_original: f64,
    pub f1_masked: f64,
    pub fidelity: f64,
    pub per_graph: Vec<MaskedPrediction>,
}

/// Computes fidelity on one split: F1 of the model's predictions minus F1
/// after masking each graph's node set. Every graph in the split must have
/// an entry in `node_sets` (empty sets are fine).
pub fn fidelity_f1(
    model: &ModelParams,
    dataset: &Dataset,
    split: Split,
    node_sets: &BTreeMap<String, Vec<usize>>,
    mode: F1Mode,
) -> Result<FidelityResult> {
    let indices = dataset.indices_of(split);
    if indices.is_empty() {
        return Err(Error::Invalid(format!("no graphs in the {split} split")));
    }

    let mut labels = Vec::with_capacity(indices.len());
    let mut original = Vec::with_capacity(indices.len());
    let mut masked = Vec::with_capacity(indices.len());
    let mut per_graph = Vec::with_capacity(indices.len());
    for &i in &indices {
        let graph = &dataset.graphs[i];
        let label = graph.label.ok_or(Error::MissingLabel {
            graph_id: graph.id.clone(),
        })?;
        let nodes = node_sets
            .get(&graph.id)
            .ok_or_else(|| Error::MissingNodeSet {
                graph_id: graph.id.clone(),
            })?;
        let pred = predict(model, graph)?;
        let pred_masked = predict(model, &mask_nodes(graph, nodes)?)?;
        labels.push(label);
        original.push(pred);
        masked.push(pred_masked);
        per_graph.push(MaskedPrediction {
            graph_id: graph.id.clone(),
            label,
            predicted: pred,
            predicted_masked: pred_masked,
            masked_node_count: nodes.len(),
        });
    }

    let (f1_original, f1_masked) = match mode {
        F1Mode::DatasetLevel => (
            dataset_f1(&original, &labels, dataset.num_classes),
            dataset_f1(&masked, &labels, dataset.num_classes),
        ),
        F1Mode::PerGraphMean => {
            let mean_of = |preds: &[usize]| -> f64 {
                preds
                    .iter()
                    .zip(&labels)
                    .map(|(&p, &y)| dataset_f1(&[p], &[y], dataset.num_classes))
                    .sum::<f64>()
                    / preds.len() as f64
            };
            (mean_of(&original), mean_of(&masked))
        }
    };

    Ok(FidelityResult {
        f1_original,
        f1_masked,
        fidelity: f1_original - f1_masked,
        per_graph,
    })
}

/// ROC-AUC by Mann-Whitney pair counting: the fraction of
/// (positive, negative) pairs ranked correctly, ties earning half credit.
/// Returns None when either class is absent.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let positives: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(&s, _)| s)
        .collect();
    let negatives: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| !l)
        .map(|(&s, _)| s)
        .collect();
    if positives.is_empty() || negatives.is_empty() {
        return None;
    }
    let mut credit = 0.0;
    for &p in &positives {
        for &n in &negatives {
            if p > n {
                credit += 1.0;
            } else if p == n {
                credit += 0.5;
            }
        }
    }
    Some(credit / (positives.len() * negatives.len()) as f64)
}

/// PR-AUC as average precision: sum over descending unique score thresholds
/// of (recall step) x (precision at that threshold). Returns None when
/// either class is absent.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let total_pos = labels.iter().filter(|&&l| l).count();
    let total_neg = labels.len() - total_pos;
    if total_pos == 0 || total_neg == 0 {
        return None;
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_recall = 0.0;
    let mut k = 0;
    while k < order.len() {
        // absorb the whole tie batch before evaluating precision/recall
        let threshold = scores[order[k]];
        while k < order.len() && scores[order[k]] == threshold {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Some(ap)
}

/// Uniformly random selection of exactly `count` nodes, seeded. The control
/// arm for fidelity comparisons: matched size, no information.
pub fn random_nodes_exact(n: usize, count: usize, rng: &mut Rng) -> Vec<usize> {
    rng.sample_indices(n, count.min(n))
}

/// A metric record row, one per (method, readout) cell of a results table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub method: String,
    pub model: String,
    pub dataset: String,
    pub readout: String,
    pub fidelity: f64,
    pub f1_original: f64,
    pub f1_masked: f64,
}

/// Arithmetic mean of per-readout fidelity values (the aggregation used for
/// cross-readout summaries).
pub fn mean_fidelity(records: &[EvalRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().map(|r| r.fidelity).sum::<f64>() / records.len() as f64
}
