//! UTF-8 CSV formats for graphs, node data, ground truth, solutions and
//! solver diagnostics.
//!
//! Writers render into a `String` so callers can compare outputs byte for
//! byte; floats use Rust's shortest round-trip formatting.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::EmpiricalGraph;
use crate::model::{Label, NodeDataset, NORMALIZATION_TOL};
use crate::signal::{norm, PrimalSignal};
use crate::solver::IterationRecord;
use crate::synth::SyntheticInstance;

pub const EDGES_HEADER: &str = "i,j,weight";
pub const DIAGNOSTICS_HEADER: &str = "iter,objective,primal_rel_change,dual_feas_margin,inner_iters_total";

pub fn nodes_header(dim: usize) -> String {
    let mut h = String::from("id,label,in_training");
    for k in 0..dim {
        write!(h, ",f{k}").unwrap();
    }
    h
}

pub fn truth_header(dim: usize) -> String {
    let mut h = String::from("id,cluster,p_true");
    for k in 0..dim {
        write!(h, ",w{k}").unwrap();
    }
    h
}

pub fn solution_header(dim: usize) -> String {
    let mut h = String::from("id");
    for k in 0..dim {
        write!(h, ",w{k}").unwrap();
    }
    h.push_str(",y_hat");
    h
}

fn push_floats(line: &mut String, values: &[f64]) {
    for v in values {
        write!(line, ",{v}").unwrap();
    }
}

pub fn edges_csv(graph: &EmpiricalGraph) -> String {
    let mut out = format!("{EDGES_HEADER}\n");
    for e in graph.edges() {
        writeln!(out, "{},{},{}", e.lower, e.upper, e.weight).unwrap();
    }
    out
}

pub fn nodes_csv(dataset: &NodeDataset) -> String {
    let mut out = nodes_header(dataset.dim());
    out.push('\n');
    for i in 0..dataset.num_nodes() {
        let label = dataset
            .label(i)
            .map(|l| l.as_i8().to_string())
            .unwrap_or_default();
        write!(out, "{i},{label},{}", u8::from(dataset.is_training(i))).unwrap();
        push_floats(&mut out, dataset.feature(i));
        out.push('\n');
    }
    out
}

pub fn truth_csv(instance: &SyntheticInstance) -> String {
    let mut out = truth_header(instance.true_weights.dim());
    out.push('\n');
    for i in 0..instance.graph.num_nodes() {
        write!(
            out,
            "{i},{},{}",
            instance.cluster_assignment[i], instance.true_probabilities[i]
        )
        .unwrap();
        push_floats(&mut out, instance.true_weights.block(i));
        out.push('\n');
    }
    out
}

pub fn solution_csv(w: &PrimalSignal, predicted: &[Label]) -> String {
    let mut out = solution_header(w.dim());
    out.push('\n');
    for (i, (block, y)) in w.blocks().zip(predicted).enumerate() {
        write!(out, "{i}").unwrap();
        push_floats(&mut out, block);
        writeln!(out, ",{}", y.as_i8()).unwrap();
    }
    out
}

pub fn diagnostics_csv(records: &[IterationRecord]) -> String {
    let mut out = format!("{DIAGNOSTICS_HEADER}\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.iter, r.objective, r.primal_rel_change, r.dual_feas_margin, r.inner_iters_total
        )
        .unwrap();
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `edges.csv`, `nodes.csv` and `truth.csv` into `dir`.
pub fn write_instance(dir: &Path, instance: &SyntheticInstance) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_file(&dir.join("edges.csv"), &edges_csv(&instance.graph))?;
    write_file(&dir.join("nodes.csv"), &nodes_csv(&instance.dataset))?;
    write_file(&dir.join("truth.csv"), &truth_csv(instance))?;
    Ok(())
}

/// Row-by-row CSV reader that reports 1-based file line numbers.
pub struct CsvTable {
    path: PathBuf,
    pub header: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

impl CsvTable {
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(text.as_bytes());
        let err = |line: u64, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let header = reader
            .headers()
            .map_err(|e| err(1, e.to_string()))?
            .iter()
            .map(|s| s.trim().to_string())
            .collect::<Vec<_>>();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                err(line, e.to_string())
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != header.len() {
                return Err(err(
                    line,
                    format!("expected {} fields, found {}", header.len(), record.len()),
                ));
            }
            rows.push((line, record.iter().map(|s| s.trim().to_string()).collect()));
        }
        Ok(Self {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(path, &read_file(path)?)
    }

    pub fn error(&self, line: u64, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }

    pub fn expect_header(&self, expected: &str) -> Result<()> {
        if self.header.join(",") != expected {
            return Err(self.error(
                1,
                format!("expected header `{expected}`, found `{}`", self.header.join(",")),
            ));
        }
        Ok(())
    }

    pub fn rows(&self) -> impl Iterator<Item = (u64, &[String])> {
        self.rows.iter().map(|(l, r)| (*l, r.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn field<T: std::str::FromStr>(&self, line: u64, row: &[String], col: usize) -> Result<T> {
        row[col].parse().map_err(|_| {
            self.error(
                line,
                format!("cannot parse `{}` in column `{}`", row[col], self.header[col]),
            )
        })
    }
}

/// Parses an edge list; `num_nodes` comes from the matching node file.
pub fn parse_edges(path: &Path, text: &str, num_nodes: usize) -> Result<EmpiricalGraph> {
    let table = CsvTable::parse(path, text)?;
    table.expect_header(EDGES_HEADER)?;
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::with_capacity(table.len());
    for (line, row) in table.rows() {
        let i: usize = table.field(line, row, 0)?;
        let j: usize = table.field(line, row, 1)?;
        let w: f64 = table.field(line, row, 2)?;
        let key = (i.min(j), i.max(j));
        if !seen.insert(key) {
            return Err(table.error(line, format!("duplicate edge ({}, {})", key.0, key.1)));
        }
        if i >= num_nodes || j >= num_nodes {
            return Err(table.error(
                line,
                format!("edge ({i}, {j}) references a node outside 0..{num_nodes}"),
            ));
        }
        if i == j || !(w.is_finite() && w > 0.0) {
            return Err(table.error(line, format!("invalid edge ({i}, {j}, {w})")));
        }
        edges.push((i, j, w));
    }
    EmpiricalGraph::new(num_nodes, edges)
}

/// Parses a node file. The dataset is flagged normalized when every feature
/// vector has unit norm.
pub fn parse_nodes(path: &Path, text: &str) -> Result<NodeDataset> {
    let table = CsvTable::parse(path, text)?;
    let dim = table.header.len().saturating_sub(3);
    if dim == 0 {
        return Err(table.error(1, "node file has no feature columns"));
    }
    table.expect_header(&nodes_header(dim))?;
    let n = table.len();
    let mut labels = vec![None; n];
    let mut features = vec![0.0; n * dim];
    let mut filled = vec![false; n];
    let mut training = Vec::new();
    for (line, row) in table.rows() {
        let id: usize = table.field(line, row, 0)?;
        if id >= n || filled[id] {
            return Err(table.error(line, format!("node id {id} is out of range or repeated")));
        }
        filled[id] = true;
        if !row[1].is_empty() {
            let raw: i64 = table.field(line, row, 1)?;
            labels[id] = Some(
                Label::from_i64(raw)
                    .ok_or_else(|| table.error(line, format!("label must be -1 or 1, got {raw}")))?,
            );
        }
        match row[2].as_str() {
            "0" => {}
            "1" => training.push(id),
            other => return Err(table.error(line, format!("in_training must be 0 or 1, got `{other}`"))),
        }
        for k in 0..dim {
            features[id * dim + k] = table.field(line, row, 3 + k)?;
        }
        if training.last() == Some(&id) && labels[id].is_none() {
            return Err(table.error(line, format!("training node {id} has no label")));
        }
    }
    let features = PrimalSignal::from_vec(dim, features)?;
    let normalized = features
        .blocks()
        .all(|x| (norm(x) - 1.0).abs() <= NORMALIZATION_TOL);
    NodeDataset::new(features, labels, training, normalized)
}

/// Reads `edges.csv` and `nodes.csv` from an instance directory.
pub fn read_instance(dir: &Path) -> Result<(EmpiricalGraph, NodeDataset)> {
    read_graph_and_nodes(&dir.join("edges.csv"), &dir.join("nodes.csv"))
}

pub fn read_graph_and_nodes(edges: &Path, nodes: &Path) -> Result<(EmpiricalGraph, NodeDataset)> {
    let dataset = parse_nodes(nodes, &read_file(nodes)?)?;
    let graph = parse_edges(edges, &read_file(edges)?, dataset.num_nodes())?;
    Ok((graph, dataset))
}
