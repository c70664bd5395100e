//! Logistic model on graph nodes: loss, empirical risk, the regularized
//! objective, prediction and accuracy metrics.

use crate::error::{invalid, Result};
use crate::graph::EmpiricalGraph;
use crate::signal::{dot, norm, PrimalSignal};

/// Crossover for the stable sigmoid and loss branches.
const STABLE_CROSSOVER: f64 = 40.0;

/// Tolerance on `||x|| = 1` for datasets flagged as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Negative => -1,
            Label::Positive => 1,
        }
    }

    pub fn from_i64(v: i64) -> Option<Self> {
        match v {
            -1 => Some(Label::Negative),
            1 => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }
}

/// Per-node features, optional labels and the labeled training set.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeDataset {
    features: PrimalSignal,
    labels: Vec<Option<Label>>,
    training_set: Vec<usize>,
    normalized: bool,
}

impl NodeDataset {
    /// `training_set` is sorted and deduplicated. Every training node must carry
    /// a label; with `normalized` set every feature vector must have unit norm.
    pub fn new(
        features: PrimalSignal,
        labels: Vec<Option<Label>>,
        training_set: impl IntoIterator<Item = usize>,
        normalized: bool,
    ) -> Result<Self> {
        let n = features.num_blocks();
        if labels.len() != n {
            return Err(invalid(format!(
                "{} labels for {n} feature vectors",
                labels.len()
            )));
        }
        let mut training_set: Vec<usize> = training_set.into_iter().collect();
        training_set.sort_unstable();
        training_set.dedup();
        if training_set.is_empty() {
            return Err(invalid("training set is empty"));
        }
        for &i in &training_set {
            if i >= n {
                return Err(invalid(format!("training node {i} out of range 0..{n}")));
            }
            if labels[i].is_none() {
                return Err(invalid(format!("training node {i} has no label")));
            }
        }
        if normalized {
            for (i, x) in features.blocks().enumerate() {
                if (norm(x) - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(invalid(format!(
                        "feature of node {i} has norm {}, expected 1",
                        norm(x)
                    )));
                }
            }
        }
        Ok(Self {
            features,
            labels,
            training_set,
            normalized,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.num_blocks()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn features(&self) -> &PrimalSignal {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        self.features.block(i)
    }

    pub fn labels(&self) -> &[Option<Label>] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Option<Label> {
        self.labels[i]
    }

    pub fn training_set(&self) -> &[usize] {
        &self.training_set
    }

    /// `M = |training set|`.
    pub fn num_training(&self) -> usize {
        self.training_set.len()
    }

    pub fn is_training(&self, i: usize) -> bool {
        self.training_set.binary_search(&i).is_ok()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// `y_i x_i`; `None` for unlabeled nodes.
    pub fn signed_feature(&self, i: usize) -> Option<Vec<f64>> {
        let y = self.labels[i]?.sign();
        Some(self.feature(i).iter().map(|x| y * x).collect())
    }

    /// A copy with a different training set and labels, same features.
    pub fn with_labels(
        &self,
        labels: Vec<Option<Label>>,
        training_set: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        Self::new(self.features.clone(), labels, training_set, self.normalized)
    }

    pub(crate) fn check_primal(&self, w: &PrimalSignal) -> Result<()> {
        if w.num_blocks() != self.num_nodes() || w.dim() != self.dim() {
            return Err(invalid(format!(
                "signal shape {}x{} does not match dataset {}x{}",
                w.num_blocks(),
                w.dim(),
                self.num_nodes(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Scales every block to unit Euclidean norm. Zero blocks are rejected.
pub fn normalize_features(features: &mut PrimalSignal) -> Result<()> {
    let dim = features.dim();
    for (i, block) in features.as_mut_slice().chunks_exact_mut(dim).enumerate() {
        let n = norm(block);
        if n == 0.0 {
            return Err(invalid(format!("feature of node {i} is zero")));
        }
        block.iter_mut().for_each(|x| *x /= n);
    }
    Ok(())
}

/// `1 / (1 + exp(-z))` without overflow for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z < -STABLE_CROSSOVER {
        let e = z.exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + (-z).exp())
    }
}

/// `log(1 + exp(-z))`.
pub fn logistic_loss(z: f64) -> f64 {
    if z < -STABLE_CROSSOVER {
        -z + z.exp().ln_1p()
    } else {
        (-z).exp().ln_1p()
    }
}

/// Mean logistic loss of `w_i . (y_i x_i)` over the training set.
pub fn empirical_risk(dataset: &NodeDataset, w: &PrimalSignal) -> Result<f64> {
    dataset.check_primal(w)?;
    Ok(empirical_risk_unchecked(dataset, w))
}

pub(crate) fn empirical_risk_unchecked(dataset: &NodeDataset, w: &PrimalSignal) -> f64 {
    let total: f64 = dataset
        .training_set
        .iter()
        .map(|&i| {
            let y = dataset.labels[i].expect("training node is labeled").sign();
            logistic_loss(y * dot(w.block(i), dataset.feature(i)))
        })
        .sum();
    total / dataset.num_training() as f64
}

/// Block gradient of [`empirical_risk`]: `-(1/M) x~_i sigmoid(-w_i . x~_i)` on
/// training nodes, zero elsewhere.
pub fn empirical_risk_gradient(dataset: &NodeDataset, w: &PrimalSignal) -> Result<PrimalSignal> {
    dataset.check_primal(w)?;
    let m = dataset.num_training() as f64;
    let mut grad = PrimalSignal::zeros(dataset.num_nodes(), dataset.dim());
    for &i in &dataset.training_set {
        let y = dataset.labels[i].expect("training node is labeled").sign();
        let x = dataset.feature(i);
        let s = sigmoid(-y * dot(w.block(i), x));
        for (g, xk) in grad.block_mut(i).iter_mut().zip(x) {
            *g = -y * xk * s / m;
        }
    }
    Ok(grad)
}

/// The regularized objective `risk(w) + lambda * TV(w)`.
#[derive(Clone, Copy, Debug)]
pub struct Objective<'a> {
    pub graph: &'a EmpiricalGraph,
    pub dataset: &'a NodeDataset,
    lambda: f64,
}

impl<'a> Objective<'a> {
    pub fn new(graph: &'a EmpiricalGraph, dataset: &'a NodeDataset, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        if graph.num_nodes() != dataset.num_nodes() {
            return Err(invalid(format!(
                "graph has {} nodes, dataset has {}",
                graph.num_nodes(),
                dataset.num_nodes()
            )));
        }
        Ok(Self {
            graph,
            dataset,
            lambda,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn value(&self, w: &PrimalSignal) -> Result<f64> {
        self.dataset.check_primal(w)?;
        Ok(self.value_unchecked(w))
    }

    pub(crate) fn value_unchecked(&self, w: &PrimalSignal) -> f64 {
        empirical_risk_unchecked(self.dataset, w) + self.lambda * self.graph.tv_norm_unchecked(w)
    }
}

/// `+1` where `w_i . x_i > 0`, `-1` otherwise (ties included).
pub fn predict(dataset: &NodeDataset, w: &PrimalSignal) -> Result<Vec<Label>> {
    dataset.check_primal(w)?;
    Ok(predict_unchecked(dataset, w))
}

pub(crate) fn predict_unchecked(dataset: &NodeDataset, w: &PrimalSignal) -> Vec<Label> {
    w.blocks()
        .zip(dataset.features.blocks())
        .map(|(wi, xi)| {
            if dot(wi, xi) > 0.0 {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect()
}

/// Fraction of nodes outside the training set whose prediction is correct.
pub fn accuracy_unlabeled(
    dataset: &NodeDataset,
    predicted: &[Label],
    true_labels: &[Label],
) -> Result<f64> {
    let n = dataset.num_nodes();
    if predicted.len() != n || true_labels.len() != n {
        return Err(invalid(format!(
            "expected {n} labels, got {} predicted and {} true",
            predicted.len(),
            true_labels.len()
        )));
    }
    let unlabeled = n - dataset.num_training();
    if unlabeled == 0 {
        return Err(invalid("every node is in the training set"));
    }
    let correct = (0..n)
        .filter(|&i| !dataset.is_training(i) && predicted[i] == true_labels[i])
        .count();
    Ok(correct as f64 / unlabeled as f64)
}

/// Mean over nodes of `max(p_i, 1 - p_i)` with `p_i = sigmoid(w_i . x_i)`.
pub fn bayes_accuracy(dataset: &NodeDataset, true_weights: &PrimalSignal) -> Result<f64> {
    dataset.check_primal(true_weights)?;
    let total: f64 = true_weights
        .blocks()
        .zip(dataset.features.blocks())
        .map(|(w, x)| {
            let p = sigmoid(dot(w, x));
            p.max(1.0 - p)
        })
        .sum();
    Ok(total / dataset.num_nodes() as f64)
}
