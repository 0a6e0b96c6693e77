//! metrics.csv reading and writing.

use std::path::Path;

use anyhow::{Context, Result};
use rfsense_core::agents::MetricsRow;

pub const METRICS_FILE: &str = "metrics.csv";

/// Floats are written with Rust's shortest round-trip formatting, so the
/// bytes depend only on the values.
pub fn metrics_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["epoch", "ce_loss", "combined_loss", "mean_sinr_db", "accuracy", "wall_ms", "scenario_accuracy"])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<MetricsRow>, _>>()?;
    Ok(rows)
}

/// Value of a named metrics column.
pub fn column(row: &MetricsRow, name: &str) -> Option<f64> {
    Some(match name {
        "epoch" => row.epoch as f64,
        "ce_loss" => row.ce_loss,
        "combined_loss" => row.combined_loss,
        "mean_sinr_db" => row.mean_sinr_db,
        "accuracy" => row.accuracy,
        "wall_ms" => row.wall_ms as f64,
        "scenario_accuracy" => row.scenario_accuracy,
        _ => return None,
    })
}
