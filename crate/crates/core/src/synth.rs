//! Seeded chain and grid datasets with cluster-wise constant true weights.
//!
//! Random numbers come from ChaCha20 keyed with four SplitMix64 outputs of the
//! seed (little-endian). Each quantity has its own stream so that redrawing
//! labels never perturbs weights or features:
//!
//! | stream | contents |
//! |--------|----------|
//! | 0 | cluster weights, cluster by cluster, `d` normals each |
//! | 1 | features, node by node, `d` uniforms each |
//! | 2 | labels, one uniform per node, `y = +1` iff `u < p_i` |
//! | 3 + a | training mask on attempt `a`, node `i` kept iff `u < rate` |
//!
//! A uniform is `(next_u64 >> 11) * 2^-53`. Normals use Box-Muller on
//! consecutive uniforms `u1, u2`: `r = sqrt(-2 ln(1 - u1))`, emitting
//! `r cos(2 pi u2)` then `r sin(2 pi u2)`.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{invalid, Result};
use crate::graph::EmpiricalGraph;
use crate::model::{normalize_features, sigmoid, Label, NodeDataset};
use crate::seed::{expand_key, unit_f64};
use crate::signal::{dot, PrimalSignal};

const WEIGHT_STREAM: u64 = 0;
const FEATURE_STREAM: u64 = 1;
const LABEL_STREAM: u64 = 2;
const TRAINING_STREAM: u64 = 3;
const MAX_TRAINING_REDRAWS: u32 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    /// Path `0 - 1 - ... - (num_nodes - 1)` cut into `num_clusters` consecutive blocks.
    Chain { num_nodes: usize, num_clusters: usize },
    /// `side x side` lattice with 4-neighbour edges, cut into
    /// `blocks_per_side^2` square blocks. Node id is `row * side + col`.
    Grid { side: usize, blocks_per_side: usize },
}

impl Topology {
    /// 400 nodes in 8 contiguous clusters of 50.
    pub fn standard_chain() -> Self {
        Topology::Chain {
            num_nodes: 400,
            num_clusters: 8,
        }
    }

    /// 20 x 20 grid split into 2 x 2 square blocks.
    pub fn standard_grid() -> Self {
        Topology::Grid {
            side: 20,
            blocks_per_side: 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Topology::Chain { .. } => "chain",
            Topology::Grid { .. } => "grid",
        }
    }

    pub fn num_nodes(&self) -> usize {
        match *self {
            Topology::Chain { num_nodes, .. } => num_nodes,
            Topology::Grid { side, .. } => side * side,
        }
    }

    pub fn num_clusters(&self) -> usize {
        match *self {
            Topology::Chain { num_clusters, .. } => num_clusters,
            Topology::Grid {
                blocks_per_side, ..
            } => blocks_per_side * blocks_per_side,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Topology::Chain {
                num_nodes,
                num_clusters,
            } => {
                if num_nodes < 2 || num_clusters == 0 || num_nodes % num_clusters != 0 {
                    return Err(invalid(format!(
                        "chain of {num_nodes} nodes cannot be split into {num_clusters} equal clusters"
                    )));
                }
            }
            Topology::Grid {
                side,
                blocks_per_side,
            } => {
                if side < 2 || blocks_per_side == 0 || side % blocks_per_side != 0 {
                    return Err(invalid(format!(
                        "grid of side {side} cannot be split into {blocks_per_side} blocks per side"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn cluster_of(&self, node: usize) -> usize {
        match *self {
            Topology::Chain {
                num_nodes,
                num_clusters,
            } => node / (num_nodes / num_clusters),
            Topology::Grid {
                side,
                blocks_per_side,
            } => {
                let block = side / blocks_per_side;
                let (row, col) = (node / side, node % side);
                (row / block) * blocks_per_side + col / block
            }
        }
    }

    /// Unweighted edge list in canonical orientation.
    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        match *self {
            Topology::Chain { num_nodes, .. } => (0..num_nodes - 1).map(|i| (i, i + 1)).collect(),
            Topology::Grid { side, .. } => {
                let mut pairs = Vec::with_capacity(2 * side * (side - 1));
                for row in 0..side {
                    for col in 0..side {
                        let i = row * side + col;
                        if col + 1 < side {
                            pairs.push((i, i + 1));
                        }
                        if row + 1 < side {
                            pairs.push((i, i + side));
                        }
                    }
                }
                pairs
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub topology: Topology,
    pub intra_weight: f64,
    pub inter_weight: f64,
    pub feature_dim: usize,
    pub labeling_rate: f64,
    pub seed: u64,
    pub normalize_features: bool,
}

impl SyntheticSpec {
    pub fn new(topology: Topology, labeling_rate: f64, seed: u64) -> Self {
        Self {
            topology,
            intra_weight: 100.0,
            inter_weight: 1.0,
            feature_dim: 3,
            labeling_rate,
            seed,
            normalize_features: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        if !(self.inter_weight > 0.0 && self.intra_weight > self.inter_weight)
            || !self.intra_weight.is_finite()
        {
            return Err(invalid(format!(
                "need intra_weight > inter_weight > 0, got {} and {}",
                self.intra_weight, self.inter_weight
            )));
        }
        if self.feature_dim == 0 {
            return Err(invalid("feature dimension must be positive"));
        }
        if !(self.labeling_rate > 0.0 && self.labeling_rate <= 1.0) {
            return Err(invalid(format!(
                "labeling rate must lie in (0, 1], got {}",
                self.labeling_rate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticInstance {
    pub spec: SyntheticSpec,
    pub graph: EmpiricalGraph,
    /// Features, sampled labels on every node, and the training set.
    pub dataset: NodeDataset,
    pub true_weights: PrimalSignal,
    pub true_probabilities: Vec<f64>,
    pub true_labels: Vec<Label>,
    pub cluster_assignment: Vec<usize>,
    /// Number of times the training mask came out empty and was redrawn on
    /// the next stream.
    pub training_redraws: u32,
}

struct Streams {
    key: [u8; 32],
}

impl Streams {
    fn new(seed: u64) -> Self {
        Self {
            key: expand_key(seed),
        }
    }

    fn stream(&self, id: u64) -> UniformStream {
        let mut rng = ChaCha20Rng::from_seed(self.key);
        rng.set_stream(id);
        UniformStream { rng }
    }
}

struct UniformStream {
    rng: ChaCha20Rng,
}

impl UniformStream {
    fn uniform(&mut self) -> f64 {
        unit_f64(self.rng.next_u64())
    }

    fn normals(&mut self, count: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(count + 1);
        while out.len() < count {
            let u1 = self.uniform();
            let u2 = self.uniform();
            let r = (-2.0 * (1.0 - u1).ln()).sqrt();
            let theta = 2.0 * std::f64::consts::PI * u2;
            out.push(r * theta.cos());
            out.push(r * theta.sin());
        }
        out.truncate(count);
        out
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticInstance> {
    spec.validate()?;
    let topo = spec.topology;
    let n = topo.num_nodes();
    let d = spec.feature_dim;
    let streams = Streams::new(spec.seed);

    let cluster_assignment: Vec<usize> = (0..n).map(|i| topo.cluster_of(i)).collect();
    let edges = topo.edge_pairs().into_iter().map(|(i, j)| {
        let w = if cluster_assignment[i] == cluster_assignment[j] {
            spec.intra_weight
        } else {
            spec.inter_weight
        };
        (i, j, w)
    });
    let graph = EmpiricalGraph::new(n, edges)?;

    let mut weight_rng = streams.stream(WEIGHT_STREAM);
    let cluster_weights: Vec<Vec<f64>> = (0..topo.num_clusters())
        .map(|_| weight_rng.normals(d))
        .collect();
    let true_weights = PrimalSignal::from_blocks(
        &cluster_assignment
            .iter()
            .map(|&c| cluster_weights[c].as_slice())
            .collect::<Vec<_>>(),
    )?;

    let mut feature_rng = streams.stream(FEATURE_STREAM);
    let raw: Vec<f64> = (0..n * d).map(|_| feature_rng.uniform()).collect();
    let mut features = PrimalSignal::from_vec(d, raw)?;
    if spec.normalize_features {
        normalize_features(&mut features)?;
    }

    let true_probabilities: Vec<f64> = true_weights
        .blocks()
        .zip(features.blocks())
        .map(|(w, x)| sigmoid(dot(w, x)))
        .collect();

    let (true_labels, training, redraws) =
        draw_labels_and_training(&streams, &true_probabilities, spec.labeling_rate)?;
    let dataset = NodeDataset::new(
        features,
        true_labels.iter().map(|&l| Some(l)).collect(),
        training,
        spec.normalize_features,
    )?;

    Ok(SyntheticInstance {
        spec: spec.clone(),
        graph,
        dataset,
        true_weights,
        true_probabilities,
        true_labels,
        cluster_assignment,
        training_redraws: redraws,
    })
}

/// Redraws labels and the training set from the stored probabilities using
/// `seed`; graph, features and true weights are kept.
pub fn resample_labels(instance: &SyntheticInstance, seed: u64) -> Result<SyntheticInstance> {
    let streams = Streams::new(seed);
    let (true_labels, training, redraws) = draw_labels_and_training(
        &streams,
        &instance.true_probabilities,
        instance.spec.labeling_rate,
    )?;
    let dataset = instance
        .dataset
        .with_labels(true_labels.iter().map(|&l| Some(l)).collect(), training)?;
    Ok(SyntheticInstance {
        spec: SyntheticSpec {
            seed,
            ..instance.spec.clone()
        },
        dataset,
        true_labels,
        training_redraws: redraws,
        ..instance.clone()
    })
}

fn draw_labels_and_training(
    streams: &Streams,
    probabilities: &[f64],
    rate: f64,
) -> Result<(Vec<Label>, Vec<usize>, u32)> {
    let mut label_rng = streams.stream(LABEL_STREAM);
    let labels = probabilities
        .iter()
        .map(|&p| {
            if label_rng.uniform() < p {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();

    for attempt in 0..MAX_TRAINING_REDRAWS {
        let mut mask_rng = streams.stream(TRAINING_STREAM + attempt as u64);
        let training: Vec<usize> = (0..probabilities.len())
            .filter(|_| mask_rng.uniform() < rate)
            .collect();
        if !training.is_empty() {
            return Ok((labels, training, attempt));
        }
    }
    Err(invalid(format!(
        "training set stayed empty after {MAX_TRAINING_REDRAWS} draws at rate {rate}"
    )))
}
