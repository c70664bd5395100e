//! Labeling-rate / lambda sweeps over synthetic instances.
//!
//! Every `(p, rep)` pair gets its own instance seed
//! `derive_seed(master_seed, [p_index, rep])`, shared by all lambdas so that
//! lambda values are compared on identical data. With `freeze_instance` the
//! graph, weights and features come from `derive_seed(master_seed, [FROZEN])`
//! and only labels and training mask are redrawn per repetition.

use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::model::{accuracy_unlabeled, bayes_accuracy, predict};
use crate::seed::derive_seed;
use crate::signal::norm;
use crate::solver::{Solver, SolverConfig};
use crate::synth::{generate, resample_labels, SyntheticInstance, SyntheticSpec, Topology};

pub const EXPERIMENT_HEADER: &str = "p,lambda,rep,accuracy,bayes_accuracy";
pub const SUMMARY_HEADER: &str =
    "p,lambda,mean_accuracy,std_accuracy,mean_bayes_accuracy,reps,failed";
pub const CONVERGENCE_HEADER: &str = "lambda,iter,mean_accuracy";

pub const DEFAULT_P_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1];
pub const DEFAULT_REPETITIONS: usize = 20;

const FROZEN_INSTANCE: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    /// Generator settings; its `labeling_rate` and `seed` are overridden per cell.
    pub base: SyntheticSpec,
    pub p_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub repetitions: usize,
    /// Solver settings; `lambda` is overridden per cell.
    pub solver: SolverConfig,
    pub master_seed: u64,
    pub freeze_instance: bool,
}

impl ExperimentSpec {
    pub fn new(topology: Topology, master_seed: u64) -> Self {
        Self {
            base: SyntheticSpec::new(topology, 0.5, master_seed),
            p_grid: DEFAULT_P_GRID.to_vec(),
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            repetitions: DEFAULT_REPETITIONS,
            solver: SolverConfig::new(DEFAULT_LAMBDA_GRID[0]),
            master_seed,
            freeze_instance: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_grid.is_empty() || self.lambda_grid.is_empty() {
            return Err(invalid("p and lambda grids must be non-empty"));
        }
        if self.repetitions == 0 {
            return Err(invalid("repetitions must be at least 1"));
        }
        for &p in &self.p_grid {
            let mut s = self.base.clone();
            s.labeling_rate = p;
            s.validate()?;
        }
        for &lambda in &self.lambda_grid {
            SolverConfig {
                lambda,
                ..self.solver.clone()
            }
            .validate()?;
        }
        Ok(())
    }

    pub fn instance_seed(&self, p_index: usize, rep: usize) -> u64 {
        derive_seed(self.master_seed, &[p_index as u64, rep as u64])
    }

    /// The instance used for every lambda at `(p_grid[p_index], rep)`.
    pub fn instance(&self, p_index: usize, rep: usize) -> Result<SyntheticInstance> {
        let mut spec = self.base.clone();
        spec.labeling_rate = self.p_grid[p_index];
        let seed = self.instance_seed(p_index, rep);
        if self.freeze_instance {
            spec.seed = derive_seed(self.master_seed, &[FROZEN_INSTANCE]);
            resample_labels(&generate(&spec)?, seed)
        } else {
            spec.seed = seed;
            generate(&spec)
        }
    }

    fn solver_config(&self, lambda: f64) -> SolverConfig {
        SolverConfig {
            lambda,
            ..self.solver.clone()
        }
    }
}

/// Outcome of one `(p, lambda, rep)` solve.
#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub p: f64,
    pub lambda: f64,
    pub rep: usize,
    /// `None` when the solver failed.
    pub accuracy: Option<f64>,
    pub bayes_accuracy: f64,
    pub iterations_used: usize,
    /// `max_k max_e ||u_e|| - lambda` over all dual iterates.
    pub max_dual_feas_margin: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub p: f64,
    pub lambda: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_bayes_accuracy: f64,
    pub reps: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentTable {
    /// Ordered by p, then lambda, then rep.
    pub cells: Vec<CellResult>,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentTable> {
    spec.validate()?;
    let mut cells = Vec::with_capacity(spec.p_grid.len() * spec.lambda_grid.len() * spec.repetitions);
    let mut instances = Vec::with_capacity(spec.repetitions);
    for (pi, &p) in spec.p_grid.iter().enumerate() {
        instances.clear();
        for rep in 0..spec.repetitions {
            instances.push(spec.instance(pi, rep)?);
        }
        for &lambda in &spec.lambda_grid {
            let config = spec.solver_config(lambda);
            for (rep, inst) in instances.iter().enumerate() {
                cells.push(run_cell(inst, &config, p, rep));
            }
        }
    }
    Ok(ExperimentTable { cells })
}

fn run_cell(inst: &SyntheticInstance, config: &SolverConfig, p: f64, rep: usize) -> CellResult {
    let bayes = bayes_accuracy(&inst.dataset, &inst.true_weights).expect("instance shapes agree");
    let mut max_margin = f64::NEG_INFINITY;
    let outcome = Solver::new(&inst.graph, &inst.dataset, config).and_then(|s| {
        s.run_with(|_, _, u| {
            let m = u.blocks().map(norm).fold(0.0, f64::max) - config.lambda;
            max_margin = max_margin.max(m);
        })
    });
    let mut cell = CellResult {
        p,
        lambda: config.lambda,
        rep,
        accuracy: None,
        bayes_accuracy: bayes,
        iterations_used: 0,
        max_dual_feas_margin: max_margin,
        error: None,
    };
    match outcome {
        Ok(run) => {
            let predicted = predict(&inst.dataset, &run.final_primal).expect("shapes agree");
            cell.accuracy = Some(
                accuracy_unlabeled(&inst.dataset, &predicted, &inst.true_labels)
                    .expect("synthetic instances leave unlabeled nodes"),
            );
            cell.iterations_used = run.iterations_used;
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

impl ExperimentTable {
    /// Mean and sample standard deviation per `(p, lambda)`, in first-seen order.
    pub fn summary(&self) -> Vec<CellSummary> {
        let mut keys: Vec<(f64, f64)> = Vec::new();
        for c in &self.cells {
            if !keys.iter().any(|&(p, l)| p == c.p && l == c.lambda) {
                keys.push((c.p, c.lambda));
            }
        }
        keys.into_iter()
            .map(|(p, lambda)| {
                let group: Vec<&CellResult> = self
                    .cells
                    .iter()
                    .filter(|c| c.p == p && c.lambda == lambda)
                    .collect();
                let accs: Vec<f64> = group.iter().filter_map(|c| c.accuracy).collect();
                let (mean, std) = mean_std(&accs);
                let bayes: Vec<f64> = group.iter().map(|c| c.bayes_accuracy).collect();
                CellSummary {
                    p,
                    lambda,
                    mean_accuracy: mean,
                    std_accuracy: std,
                    mean_bayes_accuracy: mean_std(&bayes).0,
                    reps: group.len(),
                    failed: group.len() - accs.len(),
                }
            })
            .collect()
    }

    pub fn summary_for(&self, p: f64, lambda: f64) -> Option<CellSummary> {
        self.summary()
            .into_iter()
            .find(|s| s.p == p && s.lambda == lambda)
    }

    /// Long format, one row per solve; failed solves leave `accuracy` empty.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{EXPERIMENT_HEADER}\n");
        for c in &self.cells {
            let acc = c.accuracy.map(|a| a.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{acc},{}", c.p, c.lambda, c.rep, c.bayes_accuracy).unwrap();
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        summary_csv(&self.summary())
    }
}

pub fn summary_csv(rows: &[CellSummary]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.p, s.lambda, s.mean_accuracy, s.std_accuracy, s.mean_bayes_accuracy, s.reps, s.failed
        )
        .unwrap();
    }
    out
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean unlabeled-node accuracy after every outer iteration, one curve per lambda.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceCurves {
    pub p: f64,
    pub lambdas: Vec<f64>,
    /// `curves[l][k]` is the mean accuracy of iterate `k + 1` for `lambdas[l]`.
    pub curves: Vec<Vec<f64>>,
    pub mean_bayes_accuracy: f64,
    /// Failed `(rep, lambda)` solves; they are left out of the means.
    pub failed: usize,
}

/// Runs every lambda at the single labeling rate `spec.p_grid[0]`. Runs that
/// stop early on the tolerance keep their last accuracy up to `max_iters`.
pub fn run_convergence(spec: &ExperimentSpec) -> Result<ConvergenceCurves> {
    spec.validate()?;
    if spec.p_grid.len() != 1 {
        return Err(invalid(format!(
            "convergence runs take exactly one labeling rate, got {}",
            spec.p_grid.len()
        )));
    }
    let max_iters = spec.solver.max_iters;
    let reps = spec.repetitions as f64;
    let mut curves = vec![vec![0.0; max_iters]; spec.lambda_grid.len()];
    let mut bayes = 0.0;
    let mut succeeded = vec![0usize; spec.lambda_grid.len()];
    for rep in 0..spec.repetitions {
        let inst = spec.instance(0, rep)?;
        bayes += bayes_accuracy(&inst.dataset, &inst.true_weights)? / reps;
        for (li, &lambda) in spec.lambda_grid.iter().enumerate() {
            let config = spec.solver_config(lambda);
            let mut trace = Vec::with_capacity(max_iters);
            let outcome = Solver::new(&inst.graph, &inst.dataset, &config).and_then(|s| {
                s.run_with(|_, w, _| {
                    let predicted = predict(&inst.dataset, w).expect("shapes agree");
                    trace.push(
                        accuracy_unlabeled(&inst.dataset, &predicted, &inst.true_labels)
                            .expect("synthetic instances leave unlabeled nodes"),
                    );
                })
            });
            if outcome.is_err() {
                continue;
            }
            succeeded[li] += 1;
            let last = *trace.last().expect("at least one iteration");
            trace.resize(max_iters, last);
            for (acc, t) in curves[li].iter_mut().zip(&trace) {
                *acc += t;
            }
        }
    }
    for (curve, &ok) in curves.iter_mut().zip(&succeeded) {
        let denom = if ok == 0 { f64::NAN } else { ok as f64 };
        curve.iter_mut().for_each(|v| *v /= denom);
    }
    let failed = succeeded.iter().map(|&ok| spec.repetitions - ok).sum();
    Ok(ConvergenceCurves {
        p: spec.p_grid[0],
        lambdas: spec.lambda_grid.clone(),
        curves,
        mean_bayes_accuracy: bayes,
        failed,
    })
}

impl ConvergenceCurves {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CONVERGENCE_HEADER}\n");
        for (l, curve) in self.lambdas.iter().zip(&self.curves) {
            for (k, acc) in curve.iter().enumerate() {
                writeln!(out, "{l},{},{acc}", k + 1).unwrap();
            }
        }
        out
    }

    /// The curve of a single lambda, `iter,mean_accuracy`.
    pub fn curve_csv(&self, lambda_index: usize) -> String {
        let mut out = String::from("iter,mean_accuracy\n");
        for (k, acc) in self.curves[lambda_index].iter().enumerate() {
            writeln!(out, "{},{acc}", k + 1).unwrap();
        }
        out
    }
}
