//! Preconditioned primal-dual solver for the logistic network Lasso.
//!
//! Each outer iteration `k` performs
//!
//! 1. `w_bar = w_k - T D^T u_k`
//! 2. on every training node, `n_k` steps of the contraction
//!    `v <- w_bar_i + (tau_i / M) x~_i sigmoid(-v . x~_i)` started at `w_bar_i`;
//!    unlabeled blocks keep `w_bar_i`
//! 3. `u_bar = u_k + Sigma D (2 w_{k+1} - w_k)`
//! 4. `u_{k+1}` = blockwise projection of `u_bar` onto the ball of radius `lambda`
//!
//! with `Sigma = diag(1 / (2 A_e))` and `T = diag(tau_scale / d_i)`. All loops
//! run in a fixed sequential order so results are bit-reproducible.

use crate::error::{invalid, Error, Result};
use crate::graph::{estimate_precond_norm, EmpiricalGraph};
use crate::model::{NodeDataset, Objective};
use crate::signal::{dot, norm, DualSignal, PrimalSignal};

pub const DEFAULT_TAU_SCALE: f64 = 0.9;
pub const DEFAULT_MAX_ITERS: usize = 1000;
pub const DEFAULT_REL_TOL: f64 = 1e-6;

/// Diagonal step sizes and per-training-node contraction factors.
#[derive(Clone, Debug, PartialEq)]
pub struct Preconditioners {
    /// `1 / (2 A_e)` per edge.
    pub sigma: Vec<f64>,
    /// `tau_scale / d_i` per node.
    pub tau: Vec<f64>,
    /// `tau_i ||x_i||^2 / M` per node; zero off the training set.
    pub beta: Vec<f64>,
}

pub fn build_preconditioners(
    graph: &EmpiricalGraph,
    dataset: &NodeDataset,
    tau_scale: f64,
) -> Result<Preconditioners> {
    if !(tau_scale > 0.0 && tau_scale < 1.0) {
        return Err(invalid(format!("tau_scale must lie in (0, 1), got {tau_scale}")));
    }
    if graph.num_nodes() != dataset.num_nodes() {
        return Err(invalid(format!(
            "graph has {} nodes, dataset has {}",
            graph.num_nodes(),
            dataset.num_nodes()
        )));
    }
    if let Some(i) = graph.degrees().iter().position(|&d| d <= 0.0) {
        return Err(invalid(format!("node {i} is isolated")));
    }
    let sigma = graph.edges().iter().map(|e| 0.5 / e.weight).collect();
    let tau: Vec<f64> = graph.degrees().iter().map(|d| tau_scale / d).collect();
    let m = dataset.num_training() as f64;
    let mut beta = vec![0.0; graph.num_nodes()];
    for &i in dataset.training_set() {
        let x = dataset.feature(i);
        beta[i] = tau[i] * dot(x, x) / m;
    }
    Ok(Preconditioners { sigma, tau, beta })
}

impl Preconditioners {
    /// Power-iteration estimate of `||Sigma^{1/2} D T^{1/2}||^2`; convergence
    /// requires a value below one.
    pub fn operator_norm_estimate(&self, graph: &EmpiricalGraph, iters: usize) -> Result<f64> {
        estimate_precond_norm(graph, &self.sigma, &self.tau, iters)
    }
}

/// How many contraction steps the inexact primal resolvent takes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InnerSchedule {
    /// `max(1, ceil(2 ln(max(k, 2)) / ln(1 / beta_i)))`, which keeps the
    /// resolvent error below `1 / k^2`.
    Logarithmic,
    /// A constant number of steps per outer iteration.
    Fixed(usize),
}

impl InnerSchedule {
    pub fn count(self, outer_iter: usize, beta: f64) -> usize {
        match self {
            InnerSchedule::Fixed(n) => n.max(1),
            InnerSchedule::Logarithmic => inner_count(outer_iter, beta),
        }
    }
}

/// `max(1, ceil(2 ln(max(k, 2)) / ln(1 / beta)))` (natural logarithms).
pub fn inner_count(outer_iter: usize, beta: f64) -> usize {
    let k = outer_iter.max(2) as f64;
    let steps = (2.0 * k.ln() / (1.0 / beta).ln()).ceil();
    if steps.is_finite() && steps >= 1.0 {
        steps as usize
    } else {
        1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop once `||w_{k+1} - w_k|| / max(1, ||w_k||)` drops below this.
    pub rel_tol: f64,
    pub tau_scale: f64,
    pub record_diagnostics: bool,
    pub inner: InnerSchedule,
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            max_iters: DEFAULT_MAX_ITERS,
            rel_tol: DEFAULT_REL_TOL,
            tau_scale: DEFAULT_TAU_SCALE,
            record_diagnostics: false,
            inner: InnerSchedule::Logarithmic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.tau_scale > 0.0 && self.tau_scale < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "tau_scale must lie in (0, 1), got {}",
                self.tau_scale
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if self.rel_tol.is_nan() || self.rel_tol < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "rel_tol must be non-negative, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// Diagnostics for the iterate produced by one outer iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    /// 1-based index of the iterate `w_iter`.
    pub iter: usize,
    pub objective: f64,
    pub primal_rel_change: f64,
    /// `max_e ||u_e|| - lambda`; non-positive after projection.
    pub dual_feas_margin: f64,
    /// Contraction steps summed over training nodes in this iteration.
    pub inner_iters_total: usize,
}

#[derive(Clone, Debug)]
pub struct SolverRun {
    pub final_primal: PrimalSignal,
    pub final_dual: DualSignal,
    pub iterations_used: usize,
    pub converged: bool,
    pub diagnostics: Vec<IterationRecord>,
}

/// Blockwise projection onto the Euclidean ball of radius `lambda`.
pub fn dual_prox(u_bar: &DualSignal, lambda: f64) -> DualSignal {
    let mut out = u_bar.clone();
    project_blocks(out.as_mut_slice(), u_bar.dim(), lambda);
    out
}

fn project_blocks(values: &mut [f64], dim: usize, lambda: f64) {
    for block in values.chunks_exact_mut(dim) {
        let n = norm(block);
        if n > lambda {
            let s = lambda / n;
            block.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// `count` applications of `v <- w_bar + step * xt * sigmoid(-v . xt)` starting at `w_bar`.
fn contract_into(w_bar: &[f64], xt: &[f64], step: f64, count: usize, out: &mut [f64]) {
    out.copy_from_slice(w_bar);
    for _ in 0..count {
        let s = step * crate::model::sigmoid(-dot(out, xt));
        for ((o, wb), x) in out.iter_mut().zip(w_bar).zip(xt) {
            *o = wb + s * x;
        }
    }
}

/// Approximate resolvent of the empirical risk at training node `node`:
/// the contraction map iterated `inner_count(outer_iter, beta)` times from `w_bar`.
pub fn primal_prox_inexact(
    w_bar: &[f64],
    node: usize,
    precond: &Preconditioners,
    dataset: &NodeDataset,
    outer_iter: usize,
) -> Result<Vec<f64>> {
    primal_prox_with_schedule(
        w_bar,
        node,
        precond,
        dataset,
        outer_iter,
        InnerSchedule::Logarithmic,
    )
}

pub fn primal_prox_with_schedule(
    w_bar: &[f64],
    node: usize,
    precond: &Preconditioners,
    dataset: &NodeDataset,
    outer_iter: usize,
    schedule: InnerSchedule,
) -> Result<Vec<f64>> {
    if !dataset.is_training(node) {
        return Err(invalid(format!("node {node} is not in the training set")));
    }
    if w_bar.len() != dataset.dim() {
        return Err(invalid(format!(
            "block has length {}, expected {}",
            w_bar.len(),
            dataset.dim()
        )));
    }
    let beta = precond.beta[node];
    if beta >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "contraction factor {beta} at node {node} is not below 1"
        )));
    }
    let xt = dataset.signed_feature(node).expect("training node is labeled");
    let step = precond.tau[node] / dataset.num_training() as f64;
    let mut out = vec![0.0; w_bar.len()];
    contract_into(w_bar, &xt, step, schedule.count(outer_iter, beta), &mut out);
    Ok(out)
}

/// A single outer iteration from `(w, u)` with outer index `k`, allocating the
/// result. [`Solver`] runs the same update in place.
pub fn primal_dual_iterate(
    w: &PrimalSignal,
    u: &DualSignal,
    graph: &EmpiricalGraph,
    dataset: &NodeDataset,
    precond: &Preconditioners,
    config: &SolverConfig,
    k: usize,
) -> Result<(PrimalSignal, DualSignal)> {
    let mut solver = Solver::with_preconditioners(graph, dataset, config, precond.clone())?;
    solver.warm_start(w.clone(), u.clone())?;
    solver.step(k)?;
    Ok((solver.w, solver.u))
}

/// Iteration state and scratch buffers for one solve.
pub struct Solver<'a> {
    graph: &'a EmpiricalGraph,
    dataset: &'a NodeDataset,
    config: SolverConfig,
    precond: Preconditioners,
    /// `(node, y_i x_i)` for every training node.
    signed: Vec<(usize, Vec<f64>)>,
    w: PrimalSignal,
    u: DualSignal,
    w_prev: Vec<f64>,
    node_buf: Vec<f64>,
    edge_buf: Vec<f64>,
    block_buf: Vec<f64>,
    last_inner_total: usize,
}

impl<'a> Solver<'a> {
    pub fn new(graph: &'a EmpiricalGraph, dataset: &'a NodeDataset, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let precond = build_preconditioners(graph, dataset, config.tau_scale)?;
        Self::with_preconditioners(graph, dataset, config, precond)
    }

    pub fn with_preconditioners(
        graph: &'a EmpiricalGraph,
        dataset: &'a NodeDataset,
        config: &SolverConfig,
        precond: Preconditioners,
    ) -> Result<Self> {
        config.validate()?;
        let (n, e, d) = (graph.num_nodes(), graph.num_edges(), dataset.dim());
        if dataset.num_nodes() != n {
            return Err(invalid(format!(
                "graph has {n} nodes, dataset has {}",
                dataset.num_nodes()
            )));
        }
        if precond.sigma.len() != e || precond.tau.len() != n || precond.beta.len() != n {
            return Err(invalid("preconditioner sizes do not match the graph"));
        }
        if let Some(&i) = dataset.training_set().iter().find(|&&i| precond.beta[i] >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "contraction factor {} at node {i} is not below 1; lower tau_scale",
                precond.beta[i]
            )));
        }
        let signed = dataset
            .training_set()
            .iter()
            .map(|&i| (i, dataset.signed_feature(i).expect("training node is labeled")))
            .collect();
        Ok(Self {
            graph,
            dataset,
            config: config.clone(),
            precond,
            signed,
            w: PrimalSignal::zeros(n, d),
            u: DualSignal::zeros(e, d),
            w_prev: vec![0.0; n * d],
            node_buf: vec![0.0; n * d],
            edge_buf: vec![0.0; e * d],
            block_buf: vec![0.0; d],
            last_inner_total: 0,
        })
    }

    /// Replaces the zero initialization, e.g. with the result of a neighbouring lambda.
    pub fn warm_start(&mut self, w: PrimalSignal, u: DualSignal) -> Result<()> {
        self.dataset.check_primal(&w)?;
        self.graph.check_dual(&u)?;
        if u.dim() != self.dataset.dim() {
            return Err(invalid("dual block dimension does not match the features"));
        }
        self.w = w;
        self.u = u;
        Ok(())
    }

    pub fn preconditioners(&self) -> &Preconditioners {
        &self.precond
    }

    pub fn primal(&self) -> &PrimalSignal {
        &self.w
    }

    pub fn dual(&self) -> &DualSignal {
        &self.u
    }

    /// One outer iteration with index `k`. Returns the relative primal change.
    pub fn step(&mut self, k: usize) -> Result<f64> {
        let d = self.dataset.dim();
        let m = self.dataset.num_training() as f64;
        let lambda = self.config.lambda;

        self.w_prev.copy_from_slice(self.w.as_slice());

        // w_bar = w_k - T D^T u_k
        self.graph.adjoint_into(self.u.as_slice(), d, &mut self.node_buf);
        for (i, (wb, g)) in self
            .w
            .as_mut_slice()
            .chunks_exact_mut(d)
            .zip(self.node_buf.chunks_exact(d))
            .enumerate()
        {
            let t = self.precond.tau[i];
            for (x, gk) in wb.iter_mut().zip(g) {
                *x -= t * gk;
            }
        }

        let mut inner_total = 0;
        for (i, xt) in &self.signed {
            let i = *i;
            let count = self.config.inner.count(k, self.precond.beta[i]);
            let step = self.precond.tau[i] / m;
            contract_into(self.w.block(i), xt, step, count, &mut self.block_buf);
            self.w.block_mut(i).copy_from_slice(&self.block_buf);
            inner_total += count;
        }
        self.last_inner_total = inner_total;

        // u_bar = u_k + Sigma D (2 w_{k+1} - w_k), then project.
        for ((ext, &wn), &wp) in self
            .node_buf
            .iter_mut()
            .zip(self.w.as_slice())
            .zip(&self.w_prev)
        {
            *ext = 2.0 * wn - wp;
        }
        self.graph.incidence_into(&self.node_buf, d, &mut self.edge_buf);
        for ((ub, de), &s) in self
            .u
            .as_mut_slice()
            .chunks_exact_mut(d)
            .zip(self.edge_buf.chunks_exact(d))
            .zip(&self.precond.sigma)
        {
            for (x, y) in ub.iter_mut().zip(de) {
                *x += s * y;
            }
        }
        project_blocks(self.u.as_mut_slice(), d, lambda);

        if !self.w.is_finite() || !self.u.is_finite() {
            return Err(Error::NumericalFailure {
                iteration: k + 1,
                what: "non-finite primal or dual iterate".into(),
            });
        }

        let change = self
            .w
            .as_slice()
            .iter()
            .zip(&self.w_prev)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        Ok(change / norm(&self.w_prev).max(1.0))
    }

    fn record(&self, iter: usize, rel_change: f64) -> IterationRecord {
        let objective = Objective::new(self.graph, self.dataset, self.config.lambda)
            .expect("validated config")
            .value_unchecked(&self.w);
        let max_dual = self.u.blocks().map(norm).fold(0.0, f64::max);
        IterationRecord {
            iter,
            objective,
            primal_rel_change: rel_change,
            dual_feas_margin: max_dual - self.config.lambda,
            inner_iters_total: self.last_inner_total,
        }
    }

    /// Runs until the relative primal change falls below `rel_tol` or
    /// `max_iters` is reached.
    pub fn run(self) -> Result<SolverRun> {
        self.run_with(|_, _, _| {})
    }

    /// Like [`Solver::run`], calling `observer(iter, w, u)` after every outer
    /// iteration with the 1-based index of the new iterate.
    pub fn run_with<F>(mut self, mut observer: F) -> Result<SolverRun>
    where
        F: FnMut(usize, &PrimalSignal, &DualSignal),
    {
        let mut diagnostics = Vec::new();
        let mut converged = false;
        let mut used = 0;
        for k in 0..self.config.max_iters {
            let rel_change = self.step(k)?;
            used = k + 1;
            if self.config.record_diagnostics {
                diagnostics.push(self.record(used, rel_change));
            }
            observer(used, &self.w, &self.u);
            if rel_change < self.config.rel_tol {
                converged = true;
                break;
            }
        }
        Ok(SolverRun {
            final_primal: self.w,
            final_dual: self.u,
            iterations_used: used,
            converged,
            diagnostics,
        })
    }
}

/// Cold-started solve from `w = 0`, `u = 0`.
pub fn solve(graph: &EmpiricalGraph, dataset: &NodeDataset, config: &SolverConfig) -> Result<SolverRun> {
    Solver::new(graph, dataset, config)?.run()
}
