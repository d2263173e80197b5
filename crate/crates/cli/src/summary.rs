// SPDX-License-Identifier: Apache-2.0

//! Per-cell quantiles of a `results.csv`.

use crate::error::{CliError, Result};
use crate::run::COLUMNS;
use heavydp::stats::quantile;
use std::path::Path;

/// Columns identifying a cell.
const CELL_COLUMNS: [&str; 10] = ["mode", "estimator", "family", "n", "d", "p", "eps", "delta", "k", "tc"];

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: Vec<String>,
    pub rows: usize,
    pub outcomes: Vec<f64>,
    pub wall_ms: Vec<f64>,
}

impl CellSummary {
    pub fn quantiles(&self, qs: &[f64]) -> Vec<Option<f64>> {
        qs.iter()
            .map(|&q| (!self.outcomes.is_empty()).then(|| quantile(&self.outcomes, q)))
            .collect()
    }

    pub fn mean_wall_ms(&self) -> Option<f64> {
        (!self.wall_ms.is_empty()).then(|| self.wall_ms.iter().sum::<f64>() / self.wall_ms.len() as f64)
    }
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.into(),
        line,
        msg: msg.into(),
    }
}

/// Group the rows of a results file by cell, in order of first appearance.
/// Only rows with status `ok` contribute outcomes and wall times.
pub fn read_cells(path: &Path) -> Result<Vec<CellSummary>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    let header = reader.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(parse_err(path, 1, "header does not match results schema v1"));
    }
    let idx = |name: &str| COLUMNS.iter().position(|c| *c == name).expect("known column");
    let cell_idx: Vec<usize> = CELL_COLUMNS.iter().map(|c| idx(c)).collect();
    let (outcome_idx, status_idx, wall_idx) = (idx("outcome"), idx("status"), idx("wall_ms"));

    let mut cells: Vec<CellSummary> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let cell: Vec<String> = cell_idx.iter().map(|&i| record[i].to_string()).collect();
        let pos = match cells.iter().position(|c| c.cell == cell) {
            Some(p) => p,
            None => {
                cells.push(CellSummary {
                    cell,
                    rows: 0,
                    outcomes: Vec::new(),
                    wall_ms: Vec::new(),
                });
                cells.len() - 1
            }
        };
        let entry = &mut cells[pos];
        entry.rows += 1;
        if &record[status_idx] == "ok" {
            let outcome: f64 = record[outcome_idx]
                .parse()
                .map_err(|_| parse_err(path, line, format!("bad outcome `{}`", &record[outcome_idx])))?;
            let wall: f64 = record[wall_idx]
                .parse()
                .map_err(|_| parse_err(path, line, format!("bad wall_ms `{}`", &record[wall_idx])))?;
            entry.outcomes.push(outcome);
            entry.wall_ms.push(wall);
        }
    }
    Ok(cells)
}

/// Write one row per cell: the cell columns, row and ok counts, the requested
/// quantiles of the outcome and the mean wall time.
pub fn summarize(input: &Path, output: &Path, qs: &[f64]) -> Result<Vec<CellSummary>> {
    if let Some(q) = qs.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(CliError::Invalid(format!("quantile {q} is outside (0, 1)")));
    }
    let cells = read_cells(input)?;
    let mut w = csv::Writer::from_path(output)?;
    let mut header: Vec<String> = CELL_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(["rows".into(), "ok".into()]);
    header.extend(qs.iter().map(|q| format!("q{q}")));
    header.push("mean_wall_ms".into());
    w.write_record(&header)?;
    for c in &cells {
        let mut row = c.cell.clone();
        row.push(c.rows.to_string());
        row.push(c.outcomes.len().to_string());
        row.extend(c.quantiles(qs).into_iter().map(|v| v.map_or(String::new(), |x| x.to_string())));
        row.push(c.mean_wall_ms().map_or(String::new(), |x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(crate::error::io_err(output))?;
    Ok(cells)
}
