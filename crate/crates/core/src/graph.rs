//! Weighted undirected empirical graph and its matrix-free block incidence operator.
//!
//! Edges are stored in canonical orientation `lower < upper` and sorted
//! lexicographically. Block `e` of `D w` is `A_e (w[lower] - w[upper])`, so the
//! ordering of the edge list fixes the block order of every [`DualSignal`].

use std::collections::HashSet;

use crate::error::{invalid, Result};
use crate::seed::SplitMix64;
use crate::signal::{norm, DualSignal, PrimalSignal};

/// Number of power iterations used by callers that do not pick their own.
pub const DEFAULT_POWER_ITERS: usize = 200;

const POWER_ITER_SEED: u64 = 0x005e_ed0f_d1a6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub lower: usize,
    pub upper: usize,
    pub weight: f64,
}

/// Immutable weighted graph without self-loops, duplicate edges or isolated nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalGraph {
    num_nodes: usize,
    edges: Vec<Edge>,
    degrees: Vec<f64>,
}

impl EmpiricalGraph {
    /// Builds a graph from `(i, j, weight)` triples in either orientation.
    pub fn new<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if num_nodes == 0 {
            return Err(invalid("graph needs at least one node"));
        }
        let mut seen = HashSet::new();
        let mut list = Vec::new();
        for (i, j, weight) in edges {
            if i >= num_nodes || j >= num_nodes {
                return Err(invalid(format!(
                    "edge ({i}, {j}) references a node outside 0..{num_nodes}"
                )));
            }
            if i == j {
                return Err(invalid(format!("self-loop at node {i}")));
            }
            if !(weight.is_finite() && weight > 0.0) {
                return Err(invalid(format!(
                    "edge ({i}, {j}) has non-positive or non-finite weight {weight}"
                )));
            }
            let (lower, upper) = if i < j { (i, j) } else { (j, i) };
            if !seen.insert((lower, upper)) {
                return Err(invalid(format!("duplicate edge ({lower}, {upper})")));
            }
            list.push(Edge {
                lower,
                upper,
                weight,
            });
        }
        list.sort_by_key(|e| (e.lower, e.upper));

        let degrees = compute_degrees(num_nodes, &list);
        if let Some(node) = degrees.iter().position(|&d| d == 0.0) {
            return Err(invalid(format!("node {node} is isolated")));
        }
        Ok(Self {
            num_nodes,
            edges: list,
            degrees,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Weighted degree `sum_j A_ij` of every node.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Recomputes the weighted degrees and compares them with the cached ones.
    pub fn degrees_consistent(&self) -> bool {
        compute_degrees(self.num_nodes, &self.edges) == self.degrees
    }

    /// `D w`: block `e` is `A_e (w[lower] - w[upper])`.
    pub fn apply_incidence(&self, w: &PrimalSignal) -> Result<DualSignal> {
        self.check_primal(w)?;
        let mut out = vec![0.0; self.edges.len() * w.dim()];
        self.incidence_into(w.as_slice(), w.dim(), &mut out);
        Ok(DualSignal::from_raw(w.dim(), out))
    }

    /// `D^T u`: node `i` gathers `+A_e u_e` from edges where it is the lower
    /// endpoint and `-A_e u_e` where it is the upper one.
    pub fn apply_incidence_adjoint(&self, u: &DualSignal) -> Result<PrimalSignal> {
        self.check_dual(u)?;
        let mut out = vec![0.0; self.num_nodes * u.dim()];
        self.adjoint_into(u.as_slice(), u.dim(), &mut out);
        Ok(PrimalSignal::from_raw(u.dim(), out))
    }

    /// Total variation `sum_e A_e ||w[upper] - w[lower]||`.
    pub fn tv_norm(&self, w: &PrimalSignal) -> Result<f64> {
        self.check_primal(w)?;
        Ok(self.tv_norm_unchecked(w))
    }

    pub(crate) fn tv_norm_unchecked(&self, w: &PrimalSignal) -> f64 {
        let dim = w.dim();
        let mut diff = vec![0.0; dim];
        self.edges
            .iter()
            .map(|e| {
                let (a, b) = (w.block(e.lower), w.block(e.upper));
                for k in 0..dim {
                    diff[k] = a[k] - b[k];
                }
                e.weight * norm(&diff)
            })
            .sum()
    }

    pub(crate) fn incidence_into(&self, w: &[f64], dim: usize, out: &mut [f64]) {
        for (e, edge) in self.edges.iter().enumerate() {
            let a = &w[edge.lower * dim..(edge.lower + 1) * dim];
            let b = &w[edge.upper * dim..(edge.upper + 1) * dim];
            let dst = &mut out[e * dim..(e + 1) * dim];
            for k in 0..dim {
                dst[k] = edge.weight * (a[k] - b[k]);
            }
        }
    }

    pub(crate) fn adjoint_into(&self, u: &[f64], dim: usize, out: &mut [f64]) {
        out.fill(0.0);
        for (e, edge) in self.edges.iter().enumerate() {
            let src = &u[e * dim..(e + 1) * dim];
            for k in 0..dim {
                let v = edge.weight * src[k];
                out[edge.lower * dim + k] += v;
                out[edge.upper * dim + k] -= v;
            }
        }
    }

    pub(crate) fn check_primal(&self, w: &PrimalSignal) -> Result<()> {
        if w.num_blocks() != self.num_nodes {
            return Err(invalid(format!(
                "primal signal has {} blocks, graph has {} nodes",
                w.num_blocks(),
                self.num_nodes
            )));
        }
        Ok(())
    }

    pub(crate) fn check_dual(&self, u: &DualSignal) -> Result<()> {
        if u.num_blocks() != self.edges.len() {
            return Err(invalid(format!(
                "dual signal has {} blocks, graph has {} edges",
                u.num_blocks(),
                self.edges.len()
            )));
        }
        Ok(())
    }
}

fn compute_degrees(num_nodes: usize, edges: &[Edge]) -> Vec<f64> {
    let mut degrees = vec![0.0; num_nodes];
    for e in edges {
        degrees[e.lower] += e.weight;
        degrees[e.upper] += e.weight;
    }
    degrees
}

/// Power-iteration estimate of `||Sigma^{1/2} D T^{1/2}||^2` for diagonal
/// per-edge `sigma` and per-node `tau`.
///
/// The operator acts identically on every coordinate of a block, so the
/// estimate is computed with scalar blocks. The start vector is drawn from a
/// fixed seed, which makes the result deterministic.
pub fn estimate_precond_norm(
    graph: &EmpiricalGraph,
    sigma: &[f64],
    tau: &[f64],
    iters: usize,
) -> Result<f64> {
    if sigma.len() != graph.num_edges() || tau.len() != graph.num_nodes() {
        return Err(invalid(format!(
            "expected {} edge and {} node step sizes, got {} and {}",
            graph.num_edges(),
            graph.num_nodes(),
            sigma.len(),
            tau.len()
        )));
    }
    if sigma.iter().chain(tau).any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(invalid("step sizes must be positive and finite"));
    }
    if iters == 0 {
        return Err(invalid("power iteration needs at least one step"));
    }

    let n = graph.num_nodes();
    let sqrt_tau: Vec<f64> = tau.iter().map(|t| t.sqrt()).collect();
    let mut rng = SplitMix64::new(POWER_ITER_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
    let mut scaled = vec![0.0; n];
    let mut edge_buf = vec![0.0; graph.num_edges()];
    let mut next = vec![0.0; n];

    // v <- T^{1/2} D^T Sigma D T^{1/2} v, Rayleigh quotient on the normalized iterate.
    let mut estimate = 0.0;
    for _ in 0..iters {
        let nv = norm(&v);
        if nv == 0.0 {
            return Ok(0.0);
        }
        v.iter_mut().for_each(|x| *x /= nv);
        for i in 0..n {
            scaled[i] = sqrt_tau[i] * v[i];
        }
        graph.incidence_into(&scaled, 1, &mut edge_buf);
        for (x, s) in edge_buf.iter_mut().zip(sigma) {
            *x *= s;
        }
        graph.adjoint_into(&edge_buf, 1, &mut next);
        for i in 0..n {
            next[i] *= sqrt_tau[i];
        }
        estimate = crate::signal::dot(&v, &next);
        std::mem::swap(&mut v, &mut next);
    }
    Ok(estimate)
}
