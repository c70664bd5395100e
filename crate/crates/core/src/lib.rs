//! Logistic network Lasso: semi-supervised node classification on weighted
//! graphs by total-variation regularized logistic regression, solved with a
//! preconditioned primal-dual splitting method.

pub mod error;
pub mod experiment;
pub mod graph;
pub mod io;
pub mod model;
pub mod seed;
pub mod signal;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{estimate_precond_norm, Edge, EmpiricalGraph};
pub use model::{
    accuracy_unlabeled, bayes_accuracy, empirical_risk, empirical_risk_gradient, logistic_loss,
    predict, sigmoid, Label, NodeDataset, Objective,
};
pub use signal::{DualSignal, PrimalSignal};
pub use solver::{
    build_preconditioners, dual_prox, primal_dual_iterate, primal_prox_inexact, solve,
    InnerSchedule, IterationRecord, Preconditioners, Solver, SolverConfig, SolverRun,
};
pub use synth::{generate, resample_labels, SyntheticInstance, SyntheticSpec, Topology};
