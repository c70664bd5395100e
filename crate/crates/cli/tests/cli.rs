use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lnlasso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lnlasso"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn generate_solve_figures_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = tmp.path().join("inst");
    let out = lnlasso(&["generate", "--topology", "chain", "--p", "0.3", "--seed", "4", "--out-dir", path(&inst)]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["edges.csv", "nodes.csv", "truth.csv"] {
        assert!(inst.join(f).exists(), "{f}");
    }
    let edges = fs::read_to_string(inst.join("edges.csv")).unwrap();
    assert!(edges.starts_with("i,j,weight\n"));
    assert_eq!(edges.lines().count(), 400);

    let sol = tmp.path().join("sol");
    let out = lnlasso(&["solve", "--instance-dir", path(&inst), "--lambda", "0.01", "--max-iters", "200", "--out-dir", path(&sol)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let solution = fs::read_to_string(sol.join("solution.csv")).unwrap();
    assert!(solution.starts_with("id,w0,w1,w2,y_hat\n"));
    assert_eq!(solution.lines().count(), 401);
    let diag = fs::read_to_string(sol.join("diagnostics.csv")).unwrap();
    assert!(diag.starts_with("iter,objective,primal_rel_change,dual_feas_margin,inner_iters_total\n"));
    assert_eq!(diag.lines().count(), 201);

    let exp = tmp.path().join("exp");
    let out = lnlasso(&[
        "experiment", "--p-grid", "0.2,0.6", "--lambda-grid", "1e-3,1e-1", "--reps", "2",
        "--max-iters", "50", "--seed", "3", "--out-dir", path(&exp),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = fs::read_to_string(exp.join("experiment.csv")).unwrap();
    assert!(table.starts_with("p,lambda,rep,accuracy,bayes_accuracy\n"));
    assert_eq!(table.lines().count(), 1 + 2 * 2 * 2);

    let conv = tmp.path().join("conv");
    let out = lnlasso(&[
        "convergence", "--p", "0.4", "--lambda-grid", "1e-5,1e-1", "--reps", "2",
        "--max-iters", "30", "--out-dir", path(&conv),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let curves = fs::read_to_string(conv.join("convergence.csv")).unwrap();
    assert!(curves.starts_with("lambda,iter,mean_accuracy\n"));
    assert_eq!(curves.lines().count(), 1 + 2 * 30);
    assert!(conv.join("curve_lambda_1e-5.csv").exists());

    let fig = tmp.path().join("fig");
    let out = lnlasso(&[
        "figures", "--experiment", path(&exp.join("experiment.csv")),
        "--convergence", path(&conv.join("convergence.csv")), "--out-dir", path(&fig),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(fig.join("figure_data.csv")).unwrap(), table);
    for f in ["accuracy_vs_p.svg", "accuracy_vs_iter.svg"] {
        let svg = fs::read_to_string(fig.join(f)).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("polyline"), "{f}");
    }
    let summary = fs::read_to_string(fig.join("figure_summary.csv")).unwrap();
    assert_eq!(summary, fs::read_to_string(exp.join("summary.csv")).unwrap());
}

#[test]
fn experiment_output_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let dir = tmp.path().join(name);
        let out = lnlasso(&[
            "experiment", "--p-grid", "0.5", "--lambda-grid", "1e-2", "--reps", "3",
            "--max-iters", "40", "--seed", "11", "--out-dir", path(&dir),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        fs::read(dir.join("experiment.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn malformed_edge_row_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("edges.csv"), "i,j,weight\n0,1,1\n1,2,2\n5,3,abc\n").unwrap();
    let mut nodes = String::from("id,label,in_training,f0\n");
    for i in 0..6 {
        nodes.push_str(&format!("{i},1,{},1\n", (i == 0) as u8));
    }
    fs::write(dir.join("nodes.csv"), nodes).unwrap();
    let out = lnlasso(&["solve", "--instance-dir", path(dir), "--lambda", "0.1", "--out-dir", path(dir)]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("edges.csv:4:"), "{err}");
    assert!(err.contains("abc"), "{err}");
}

/// The two-node instance: one edge of weight 2, unit features, node 0
/// labeled +1 and in the training set.
#[test]
fn hand_instance_first_iterate_in_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("edges.csv"), "i,j,weight\n1,0,2\n").unwrap();
    fs::write(dir.join("nodes.csv"), "id,label,in_training,f0\n0,1,1,1\n1,,0,1\n").unwrap();
    let out = lnlasso(&["solve", "--instance-dir", path(dir), "--lambda", "0.1", "--max-iters", "1", "--out-dir", path(dir)]);
    assert!(out.status.success(), "{}", stderr(&out));

    // tau = 0.45, two contraction steps from zero
    let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
    let mut v = 0.0;
    for _ in 0..2 {
        v = 0.45 * sig(-v);
    }
    let objective = (1.0 + (-v).exp()).ln() + 0.1 * 2.0 * v;

    let diag = fs::read_to_string(dir.join("diagnostics.csv")).unwrap();
    let row: Vec<&str> = diag.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "1");
    assert!((row[1].parse::<f64>().unwrap() - objective).abs() < 1e-15);
    // the dual block is projected onto the ball, so the margin is zero
    assert!(row[3].parse::<f64>().unwrap().abs() < 1e-15);
    assert_eq!(row[4], "2");

    let sol = fs::read_to_string(dir.join("solution.csv")).unwrap();
    let first: Vec<&str> = sol.lines().nth(1).unwrap().split(',').collect();
    assert!((first[1].parse::<f64>().unwrap() - v).abs() < 1e-15);
    assert_eq!(first[2], "1");
    // w1 stays at zero, and ties predict -1
    assert_eq!(sol.lines().nth(2).unwrap(), "1,0,-1");
}

#[test]
fn conflicting_flags_are_usage_errors() {
    let out = lnlasso(&["solve", "--instance-dir", "x", "--edges", "e.csv", "--nodes", "n.csv", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = lnlasso(&["convergence", "--p", "0.4", "--p-grid", "0.4"]);
    assert_eq!(out.status.code(), Some(2));
    let out = lnlasso(&["convergence", "--p-grid", "0.2,0.4"]);
    assert_eq!(out.status.code(), Some(2));
    let out = lnlasso(&["experiment", "--reps", "0", "--p-grid", "0.5", "--lambda-grid", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = lnlasso(&["solve", "--instance-dir", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_values_yield_to_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# small sweep\np-grid = 0.5\nlambda-grid = 1e-2\nreps = 2\nmax-iters = 20\nseed = 5\n").unwrap();
    let out_dir = tmp.path().join("out");
    let out = lnlasso(&["experiment", "--config", path(&cfg), "--reps", "3", "--out-dir", path(&out_dir)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = fs::read_to_string(out_dir.join("experiment.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 3);
    assert!(table.lines().skip(1).all(|l| l.starts_with("0.5,0.01,")));

    fs::write(&cfg, "mystery = 1\n").unwrap();
    let out = lnlasso(&["experiment", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_contractive_step_is_a_usage_error() {
    // degree 0.5 at the labeled node gives tau = 1.8 and a contraction
    // factor above one, which the solver refuses
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("edges.csv"), "i,j,weight\n0,1,0.5\n").unwrap();
    fs::write(dir.join("nodes.csv"), "id,label,in_training,f0\n0,1,1,1\n1,,0,1\n").unwrap();
    let out = lnlasso(&["solve", "--instance-dir", path(dir), "--lambda", "0.1", "--tau-scale", "0.9"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}
