use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::study::{OrderFit, Row, StudyReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub method: String,
    /// Slope, `flat`, or empty when fewer than three points were usable.
    pub fitted_order: String,
    pub points_used: usize,
}

/// `(<prefix>.csv, <prefix>_orders.csv)`
pub fn output_paths(prefix: &str) -> (PathBuf, PathBuf) {
    (
        PathBuf::from(format!("{prefix}.csv")),
        PathBuf::from(format!("{prefix}_orders.csv")),
    )
}

/// Writes the per-cell rows and the fitted-order summary.
pub fn emit_csv(report: &StudyReport, prefix: &str) -> io::Result<(PathBuf, PathBuf)> {
    let (rows_path, orders_path) = output_paths(prefix);
    if let Some(dir) = rows_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_rows(&report.rows, &rows_path)?;
    let orders: Vec<OrderRow> = report
        .orders
        .iter()
        .map(|o| OrderRow {
            method: o.method.name().to_string(),
            fitted_order: match o.fit {
                OrderFit::Order(p) => p.to_string(),
                OrderFit::Flat => "flat".to_string(),
                OrderFit::Insufficient => String::new(),
            },
            points_used: o.points_used,
        })
        .collect();
    write_serialized(
        &orders,
        &["method", "fitted_order", "points_used"],
        &orders_path,
    )?;
    Ok((rows_path, orders_path))
}

pub const ROW_HEADER: [&str; 10] = [
    "method",
    "h",
    "error",
    "wall_time_s",
    "steps",
    "matvecs",
    "rhs_evals",
    "newton_iters",
    "krylov_projections",
    "diverged",
];

pub fn write_rows(rows: &[Row], path: &Path) -> io::Result<()> {
    write_serialized(rows, &ROW_HEADER, path)
}

fn write_serialized<T: Serialize>(items: &[T], header: &[&str], path: &Path) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    // written by hand so an empty report still gets its header line
    w.write_record(header)?;
    for item in items {
        w.serialize(item)?;
    }
    w.flush()
}

pub fn read_rows(path: &Path) -> io::Result<Vec<Row>> {
    read_serialized(path)
}

pub fn read_orders(path: &Path) -> io::Result<Vec<OrderRow>> {
    read_serialized(path)
}

fn read_serialized<T: for<'de> Deserialize<'de>>(path: &Path) -> io::Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(io::Error::other))
        .collect()
}
