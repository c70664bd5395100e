use lnlasso::experiment::{run_convergence, run_experiment, ExperimentSpec};
use lnlasso::{generate, resample_labels, Label, SyntheticSpec, Topology};

fn small_chain() -> Topology {
    Topology::Chain {
        num_nodes: 40,
        num_clusters: 4,
    }
}

#[test]
fn same_seed_same_instance() {
    for topo in [Topology::standard_chain(), Topology::standard_grid()] {
        let a = generate(&SyntheticSpec::new(topo, 0.3, 17)).unwrap();
        let b = generate(&SyntheticSpec::new(topo, 0.3, 17)).unwrap();
        assert_eq!(a, b);
        let c = generate(&SyntheticSpec::new(topo, 0.3, 18)).unwrap();
        assert_ne!(a.true_weights, c.true_weights);
    }
}

#[test]
fn features_are_unit_norm() {
    let inst = generate(&SyntheticSpec::new(Topology::standard_grid(), 0.5, 3)).unwrap();
    assert!(inst.dataset.is_normalized());
    for x in inst.dataset.features().blocks() {
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
    }
}

#[test]
fn raw_features_stay_in_unit_cube() {
    let mut spec = SyntheticSpec::new(Topology::standard_chain(), 0.5, 3);
    spec.normalize_features = false;
    let inst = generate(&spec).unwrap();
    assert!(!inst.dataset.is_normalized());
    assert!(inst.dataset.features().as_slice().iter().all(|&v| (0.0..1.0).contains(&v)));
}

#[test]
fn weights_are_constant_within_clusters() {
    let inst = generate(&SyntheticSpec::new(Topology::standard_chain(), 0.5, 4)).unwrap();
    for i in 1..400 {
        let same = inst.cluster_assignment[i] == inst.cluster_assignment[i - 1];
        assert_eq!(same, inst.true_weights.block(i) == inst.true_weights.block(i - 1));
    }
}

#[test]
fn labeling_rate_matches_on_average() {
    let p = 0.3;
    let n = 400.0;
    let seeds = 1000;
    let base = generate(&SyntheticSpec::new(Topology::standard_chain(), p, 0)).unwrap();
    let mean = (0..seeds)
        .map(|s| resample_labels(&base, s).unwrap().dataset.num_training() as f64 / n)
        .sum::<f64>()
        / seeds as f64;
    let se = (p * (1.0 - p) / (n * seeds as f64)).sqrt();
    assert!((mean - p).abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn labels_follow_true_probabilities() {
    let base = generate(&SyntheticSpec::new(Topology::standard_chain(), 0.5, 5)).unwrap();
    let seeds = 500;
    let mut positives = 0usize;
    for s in 0..seeds {
        let inst = resample_labels(&base, 1000 + s).unwrap();
        positives += inst.true_labels.iter().filter(|&&l| l == Label::Positive).count();
    }
    let total = (seeds as usize * 400) as f64;
    let freq = positives as f64 / total;
    let expected = base.true_probabilities.iter().sum::<f64>() / 400.0;
    let var: f64 = base.true_probabilities.iter().map(|p| p * (1.0 - p)).sum::<f64>() / 400.0;
    let se = (var / total).sqrt();
    assert!((freq - expected).abs() <= 3.0 * se, "freq {freq} vs {expected}");
}

#[test]
fn experiment_tables_are_reproducible() {
    let mut spec = ExperimentSpec::new(small_chain(), 77);
    spec.p_grid = vec![0.2, 0.6];
    spec.lambda_grid = vec![1e-3, 1e-1];
    spec.repetitions = 3;
    spec.solver.max_iters = 100;
    let a = run_experiment(&spec).unwrap();
    let b = run_experiment(&spec).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.summary_csv(), b.summary_csv());
    assert_eq!(a.cells.len(), 2 * 2 * 3);
    spec.master_seed = 78;
    assert_ne!(a.to_csv(), run_experiment(&spec).unwrap().to_csv());
}

#[test]
fn lambdas_share_instances() {
    let mut spec = ExperimentSpec::new(small_chain(), 5);
    spec.p_grid = vec![0.5];
    spec.lambda_grid = vec![1e-4, 1e-2];
    spec.repetitions = 4;
    spec.solver.max_iters = 50;
    let table = run_experiment(&spec).unwrap();
    let bayes: Vec<f64> = table.cells.iter().map(|c| c.bayes_accuracy).collect();
    assert_eq!(bayes[..4], bayes[4..]);
}

#[test]
fn convergence_curves_have_full_length() {
    let mut spec = ExperimentSpec::new(small_chain(), 9);
    spec.p_grid = vec![0.4];
    spec.lambda_grid = vec![1e-5, 1e-1];
    spec.repetitions = 3;
    spec.solver.max_iters = 80;
    let curves = run_convergence(&spec).unwrap();
    assert_eq!(curves.curves.len(), 2);
    assert!(curves.curves.iter().all(|c| c.len() == 80));
    assert!(curves.curves.iter().flatten().all(|a| (0.0..=1.0).contains(a)));
    assert_eq!(curves.failed, 0);
    let again = run_convergence(&spec).unwrap();
    assert_eq!(curves.to_csv(), again.to_csv());
}

#[test]
fn frozen_instance_keeps_graph_and_weights() {
    let mut spec = ExperimentSpec::new(small_chain(), 13);
    spec.freeze_instance = true;
    let a = spec.instance(0, 0).unwrap();
    let b = spec.instance(3, 7).unwrap();
    assert_eq!(a.true_weights, b.true_weights);
    assert_eq!(a.dataset.features(), b.dataset.features());
    assert_ne!(a.true_labels, b.true_labels);
}
