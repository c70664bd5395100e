//! Stacked block vectors: one `dim`-sized block per node (primal) or per edge (dual).

use std::marker::PhantomData;

use crate::error::{invalid, Result};

/// Marker for signals indexed by node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeBlocks {}

/// Marker for signals indexed by edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeBlocks {}

/// A vector made of equally sized blocks, stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal<K> {
    dim: usize,
    values: Vec<f64>,
    _kind: PhantomData<K>,
}

/// Per-node weight vectors `w`, block `i` is the weight vector of node `i`.
pub type PrimalSignal = Signal<NodeBlocks>;

/// Per-edge dual vectors `u`, block `e` belongs to the `e`-th edge of the graph.
pub type DualSignal = Signal<EdgeBlocks>;

impl<K> Signal<K> {
    pub fn zeros(num_blocks: usize, dim: usize) -> Self {
        assert!(dim >= 1, "block dimension must be positive");
        Self {
            dim,
            values: vec![0.0; num_blocks * dim],
            _kind: PhantomData,
        }
    }

    /// Wraps a flat vector. The length must be a multiple of `dim` and all
    /// entries finite.
    pub fn from_vec(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("block dimension must be positive"));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(invalid(format!(
                "length {} is not a multiple of block dimension {dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite entry at position {pos}")));
        }
        Ok(Self {
            dim,
            values,
            _kind: PhantomData,
        })
    }

    /// Builds a signal from a list of blocks of identical length.
    pub fn from_blocks<B: AsRef<[f64]>>(blocks: &[B]) -> Result<Self> {
        let dim = blocks
            .first()
            .map(|b| b.as_ref().len())
            .ok_or_else(|| invalid("at least one block is required"))?;
        let mut values = Vec::with_capacity(blocks.len() * dim);
        for (idx, b) in blocks.iter().enumerate() {
            let b = b.as_ref();
            if b.len() != dim {
                return Err(invalid(format!(
                    "block {idx} has length {}, expected {dim}",
                    b.len()
                )));
            }
            values.extend_from_slice(b);
        }
        Self::from_vec(dim, values)
    }

    pub(crate) fn from_raw(dim: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len() % dim, 0);
        Self {
            dim,
            values,
            _kind: PhantomData,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_blocks(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn block(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn block_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.values[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn blocks(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Self) -> f64 {
        dot(&self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
