use std::io::Write;
use std::path::Path;

use egw_core::solvers::SolveReport;
use ndarray::Array2;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Shortest decimal text that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn create(path: &Path) -> CliResult<std::fs::File> {
    std::fs::File::create(path).map_err(|e| CliError::io(path.display(), e))
}

/// Rows as CSV to `path`, or stdout when `path` is `None`.
pub fn write_csv(path: Option<&Path>, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let context = path.map_or("stdout".to_string(), |p| p.display().to_string());
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(header)
        .map_err(|e| CliError::io(&context, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| CliError::io(&context, e))?;
    }
    w.flush().map_err(|e| CliError::io(&context, e))
}

/// Coupling in row-major order, header `i,j,mass`.
pub fn write_plan(path: &Path, plan: &Array2<f64>) -> CliResult<()> {
    let rows: Vec<Vec<String>> = plan
        .indexed_iter()
        .map(|((i, j), &m)| vec![i.to_string(), j.to_string(), num(m)])
        .collect();
    write_csv(Some(path), &["i", "j", "mass"], &rows)
}

pub fn write_trace(path: &Path, report: &SolveReport) -> CliResult<()> {
    let rows: Vec<Vec<String>> = report
        .trace
        .iter()
        .map(|r| {
            vec![
                r.iter.to_string(),
                opt_num(r.phi),
                num(r.residual),
                opt_num(r.envelope),
                num(r.delta_sup),
                r.sinkhorn_iters.to_string(),
            ]
        })
        .collect();
    write_csv(
        Some(path),
        &[
            "iter",
            "phi",
            "residual",
            "envelope",
            "delta_sup",
            "sinkhorn_iters",
        ],
        &rows,
    )
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path.display(), e))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path.display(), e))
}
