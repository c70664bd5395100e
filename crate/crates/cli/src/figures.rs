//! Figure data from experiment outputs. Reads CSVs only; never runs the solver.

use std::path::Path;

use anyhow::Result;
use lnlasso::experiment::{CellResult, ExperimentTable, CONVERGENCE_HEADER, EXPERIMENT_HEADER};
use lnlasso::io::{read_file, CsvTable};

use crate::svg::{LineChart, Series};

pub fn read_experiment(path: &Path) -> Result<Vec<CellResult>> {
    let table = CsvTable::parse(path, &read_file(path)?)?;
    table.expect_header(EXPERIMENT_HEADER)?;
    let mut cells = Vec::with_capacity(table.len());
    for (line, row) in table.rows() {
        let accuracy = if row[3].is_empty() {
            None
        } else {
            Some(table.field(line, row, 3)?)
        };
        cells.push(CellResult {
            p: table.field(line, row, 0)?,
            lambda: table.field(line, row, 1)?,
            rep: table.field(line, row, 2)?,
            accuracy,
            bayes_accuracy: table.field(line, row, 4)?,
            iterations_used: 0,
            max_dual_feas_margin: f64::NAN,
            error: accuracy.is_none().then(|| "failed".to_string()),
        });
    }
    Ok(cells)
}

/// `(lambda, iter, mean_accuracy)` rows.
pub fn read_convergence(path: &Path) -> Result<Vec<(f64, usize, f64)>> {
    let table = CsvTable::parse(path, &read_file(path)?)?;
    table.expect_header(CONVERGENCE_HEADER)?;
    table
        .rows()
        .map(|(line, row)| {
            Ok((
                table.field(line, row, 0)?,
                table.field(line, row, 1)?,
                table.field(line, row, 2)?,
            ))
        })
        .collect()
}

/// Mean accuracy against labeling rate, one series per lambda, plus the Bayes baseline.
pub fn accuracy_vs_p(table: &ExperimentTable) -> LineChart {
    let summary = table.summary();
    let mut lambdas: Vec<f64> = Vec::new();
    let mut ps: Vec<f64> = Vec::new();
    for s in &summary {
        if !lambdas.contains(&s.lambda) {
            lambdas.push(s.lambda);
        }
        if !ps.contains(&s.p) {
            ps.push(s.p);
        }
    }
    let mut series: Vec<Series> = lambdas
        .iter()
        .map(|&l| Series {
            name: format!("lambda={l:e}"),
            points: summary
                .iter()
                .filter(|s| s.lambda == l)
                .map(|s| (s.p, s.mean_accuracy))
                .collect(),
            dashed: false,
        })
        .collect();
    let bayes = ps
        .iter()
        .map(|&p| {
            let rows: Vec<f64> = summary.iter().filter(|s| s.p == p).map(|s| s.mean_bayes_accuracy).collect();
            (p, rows.iter().sum::<f64>() / rows.len() as f64)
        })
        .collect();
    series.push(Series {
        name: "Bayes".into(),
        points: bayes,
        dashed: true,
    });
    LineChart {
        title: "Accuracy on unlabeled nodes".into(),
        x_label: "labeling rate p".into(),
        y_label: "mean accuracy".into(),
        series,
    }
}

pub fn accuracy_vs_iter(rows: &[(f64, usize, f64)]) -> LineChart {
    let mut lambdas: Vec<f64> = Vec::new();
    for &(l, _, _) in rows {
        if !lambdas.contains(&l) {
            lambdas.push(l);
        }
    }
    let series = lambdas
        .iter()
        .map(|&l| Series {
            name: format!("lambda={l:e}"),
            points: rows
                .iter()
                .filter(|r| r.0 == l)
                .map(|&(_, k, a)| (k as f64, a))
                .collect(),
            dashed: false,
        })
        .collect();
    LineChart {
        title: "Accuracy per iteration".into(),
        x_label: "iteration".into(),
        y_label: "mean accuracy".into(),
        series,
    }
}
