use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lnlasso::experiment::{
    run_convergence, run_experiment, ExperimentSpec, ExperimentTable, DEFAULT_LAMBDA_GRID,
    DEFAULT_P_GRID, DEFAULT_REPETITIONS,
};
use lnlasso::io::{diagnostics_csv, read_graph_and_nodes, solution_csv, write_file, write_instance};
use lnlasso::solver::{DEFAULT_MAX_ITERS, DEFAULT_REL_TOL, DEFAULT_TAU_SCALE};
use lnlasso::{generate, predict, solve, Error, Objective, SolverConfig, SyntheticSpec, Topology};

mod config;
mod figures;
mod svg;

use config::ConfigFile;

/// Bad flags or config values; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Sub-run failures already written to disk; maps to exit code 3.
#[derive(Debug)]
struct PartialFailure(String);

impl std::fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for PartialFailure {}

#[derive(Parser, Debug)]
#[command(name = "lnlasso", version, about = "Logistic network Lasso on weighted graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic chain or grid instance (edges.csv, nodes.csv, truth.csv)
    Generate(GenerateArgs),
    /// Solve one instance (solution.csv, diagnostics.csv)
    Solve(SolveArgs),
    /// Sweep labeling rates and lambdas with repetitions (experiment.csv, summary.csv)
    Experiment(ExperimentArgs),
    /// Accuracy after every iteration at a single labeling rate (convergence.csv)
    Convergence(ConvergenceArgs),
    /// Figure-ready CSV and SVG charts from experiment outputs
    Figures(FiguresArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Flat `key = value` file mirroring the long flags; flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TopologyArg {
    Chain,
    Grid,
}

impl std::str::FromStr for TopologyArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

impl TopologyArg {
    fn topology(self) -> Topology {
        match self {
            Self::Chain => Topology::standard_chain(),
            Self::Grid => Topology::standard_grid(),
        }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    topology: Option<TopologyArg>,
    /// Labeling rate
    #[arg(long)]
    p: Option<f64>,
    /// Keep features in [0, 1)^3 instead of normalizing to unit length
    #[arg(long)]
    raw_features: bool,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Directory holding edges.csv and nodes.csv
    #[arg(long, conflicts_with_all = ["edges", "nodes"])]
    instance_dir: Option<PathBuf>,
    #[arg(long, requires = "nodes")]
    edges: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    nodes: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    tau_scale: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    topology: Option<TopologyArg>,
    /// Comma-separated lambdas
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Reuse one graph, feature set and weight draw; only labels and
    /// training sets change between repetitions
    #[arg(long)]
    freeze_instance: bool,
    #[arg(long)]
    raw_features: bool,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    /// Comma-separated labeling rates
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    /// Labeling rate (default 0.4)
    #[arg(long, conflicts_with = "p_grid")]
    p: Option<f64>,
    /// Same as --p; must hold exactly one value
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct FiguresArgs {
    /// experiment.csv files to aggregate, in order
    #[arg(long = "experiment", num_args = 1..)]
    experiments: Vec<PathBuf>,
    /// convergence.csv for the per-iteration chart
    #[arg(long)]
    convergence: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    if err.downcast_ref::<PartialFailure>().is_some() {
        return 3;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::NumericalFailure { .. }) => 3,
        Some(Error::InvalidArgument(_)) | Some(Error::InvalidConfig(_)) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Convergence(args) => cmd_convergence(args),
        Command::Figures(args) => cmd_figures(args),
    }
}

fn out_dir(cfg: &ConfigFile, cli: Option<PathBuf>) -> Result<PathBuf> {
    let dir = cfg.pick(cli, "out-dir")?.unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

fn save(dir: &Path, name: &str, contents: &str) -> Result<()> {
    write_file(&dir.join(name), contents)?;
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.common.config.as_deref())?;
    let topology = cfg.pick(args.topology, "topology")?.unwrap_or(TopologyArg::Chain);
    let p = cfg.pick(args.p, "p")?.unwrap_or(0.5);
    let seed = cfg.pick(args.common.seed, "seed")?.unwrap_or(0);
    let mut spec = SyntheticSpec::new(topology.topology(), p, seed);
    spec.normalize_features = !cfg.pick_flag(args.raw_features, "raw-features")?;
    let instance = generate(&spec)?;
    let dir = out_dir(&cfg, args.common.out_dir)?;
    write_instance(&dir, &instance)?;
    println!(
        "wrote {} nodes, {} edges, {} labeled for training to {}",
        instance.graph.num_nodes(),
        instance.graph.num_edges(),
        instance.dataset.num_training(),
        dir.display()
    );
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.common.config.as_deref())?;
    let (edges, nodes) = match (cfg.pick(args.instance_dir, "instance-dir")?, args.edges, args.nodes) {
        (_, Some(e), Some(n)) => (e, n),
        (Some(dir), _, _) => (dir.join("edges.csv"), dir.join("nodes.csv")),
        _ => bail!(UsageError("give --instance-dir or both --edges and --nodes".into())),
    };
    let Some(lambda) = cfg.pick(args.lambda, "lambda")? else {
        bail!(UsageError("--lambda is required".into()));
    };
    let config = SolverConfig {
        lambda,
        max_iters: cfg.pick(args.max_iters, "max-iters")?.unwrap_or(DEFAULT_MAX_ITERS),
        rel_tol: cfg.pick(args.rel_tol, "rel-tol")?.unwrap_or(DEFAULT_REL_TOL),
        tau_scale: cfg.pick(args.tau_scale, "tau-scale")?.unwrap_or(DEFAULT_TAU_SCALE),
        record_diagnostics: true,
        ..SolverConfig::new(lambda)
    };
    config.validate()?;

    let (graph, dataset) = read_graph_and_nodes(&edges, &nodes)?;
    let run = solve(&graph, &dataset, &config)?;
    let predicted = predict(&dataset, &run.final_primal)?;
    let dir = out_dir(&cfg, args.common.out_dir)?;
    save(&dir, "solution.csv", &solution_csv(&run.final_primal, &predicted))?;
    save(&dir, "diagnostics.csv", &diagnostics_csv(&run.diagnostics))?;
    let objective = Objective::new(&graph, &dataset, lambda)?.value(&run.final_primal)?;
    println!(
        "{} after {} iterations, objective {objective}",
        if run.converged { "converged" } else { "stopped" },
        run.iterations_used
    );
    Ok(())
}

fn sweep_spec(args: &SweepArgs, cfg: &ConfigFile) -> Result<ExperimentSpec> {
    let topology = cfg.pick(args.topology, "topology")?.unwrap_or(TopologyArg::Chain);
    let seed = cfg.pick(args.common.seed, "seed")?.unwrap_or(0);
    let mut spec = ExperimentSpec::new(topology.topology(), seed);
    spec.lambda_grid = cfg
        .pick_list(args.lambda_grid.clone(), "lambda-grid")?
        .unwrap_or_else(|| DEFAULT_LAMBDA_GRID.to_vec());
    spec.repetitions = cfg.pick(args.reps, "reps")?.unwrap_or(DEFAULT_REPETITIONS);
    spec.solver.max_iters = cfg.pick(args.max_iters, "max-iters")?.unwrap_or(DEFAULT_MAX_ITERS);
    spec.solver.rel_tol = cfg.pick(args.rel_tol, "rel-tol")?.unwrap_or(DEFAULT_REL_TOL);
    spec.freeze_instance = cfg.pick_flag(args.freeze_instance, "freeze-instance")?;
    spec.base.normalize_features = !cfg.pick_flag(args.raw_features, "raw-features")?;
    Ok(spec)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.sweep.common.config.as_deref())?;
    let mut spec = sweep_spec(&args.sweep, &cfg)?;
    spec.p_grid = cfg
        .pick_list(args.p_grid, "p-grid")?
        .unwrap_or_else(|| DEFAULT_P_GRID.to_vec());
    spec.validate()?;
    let dir = out_dir(&cfg, args.sweep.common.out_dir.clone())?;
    let table = run_experiment(&spec)?;
    save(&dir, "experiment.csv", &table.to_csv())?;
    save(&dir, "summary.csv", &table.summary_csv())?;
    for s in table.summary() {
        println!(
            "p={:<4} lambda={:<7e} accuracy {:.4} +- {:.4} (bayes {:.4})",
            s.p, s.lambda, s.mean_accuracy, s.std_accuracy, s.mean_bayes_accuracy
        );
    }
    let failed: Vec<_> = table.cells.iter().filter(|c| c.error.is_some()).collect();
    if let Some(first) = failed.first() {
        bail!(PartialFailure(format!(
            "{} of {} solves failed (first: p={} lambda={} rep={}: {})",
            failed.len(),
            table.cells.len(),
            first.p,
            first.lambda,
            first.rep,
            first.error.as_deref().unwrap_or("")
        )));
    }
    Ok(())
}

fn cmd_convergence(args: ConvergenceArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.sweep.common.config.as_deref())?;
    let mut spec = sweep_spec(&args.sweep, &cfg)?;
    let p_grid = match (cfg.pick(args.p, "p")?, cfg.pick_list(args.p_grid, "p-grid")?) {
        (Some(_), Some(_)) => bail!(UsageError("give either p or p-grid, not both".into())),
        (Some(p), None) => vec![p],
        (None, Some(grid)) => grid,
        (None, None) => vec![0.4],
    };
    if p_grid.len() != 1 {
        bail!(UsageError(format!(
            "convergence takes a single labeling rate, got {}",
            p_grid.len()
        )));
    }
    spec.p_grid = p_grid;
    spec.validate()?;
    let dir = out_dir(&cfg, args.sweep.common.out_dir.clone())?;
    let curves = run_convergence(&spec)?;
    save(&dir, "convergence.csv", &curves.to_csv())?;
    for (idx, lambda) in curves.lambdas.iter().enumerate() {
        save(&dir, &format!("curve_lambda_{lambda:e}.csv"), &curves.curve_csv(idx))?;
        let c = &curves.curves[idx];
        println!(
            "lambda={lambda:<7e} accuracy at iteration 1: {:.4}, final: {:.4}",
            c[0],
            c[c.len() - 1]
        );
    }
    println!("mean bayes accuracy {:.4}", curves.mean_bayes_accuracy);
    if curves.failed > 0 {
        bail!(PartialFailure(format!("{} solves failed", curves.failed)));
    }
    Ok(())
}

fn cmd_figures(args: FiguresArgs) -> Result<()> {
    if args.experiments.is_empty() && args.convergence.is_none() {
        bail!(UsageError("give at least one --experiment or --convergence file".into()));
    }
    let dir = args.out_dir.unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    if !args.experiments.is_empty() {
        let mut cells = Vec::new();
        for path in &args.experiments {
            cells.extend(figures::read_experiment(path)?);
        }
        let table = ExperimentTable { cells };
        save(&dir, "figure_data.csv", &table.to_csv())?;
        save(&dir, "figure_summary.csv", &table.summary_csv())?;
        save(&dir, "accuracy_vs_p.svg", &figures::accuracy_vs_p(&table).render())?;
    }
    if let Some(path) = &args.convergence {
        let rows = figures::read_convergence(path)?;
        save(&dir, "accuracy_vs_iter.svg", &figures::accuracy_vs_iter(&rows).render())?;
    }
    println!("wrote figures to {}", dir.display());
    Ok(())
}
