//! Per-run metrics: a flat CSV for plotting and a JSON-lines sidecar that
//! keeps the per-layer arrays. Undefined values are `nan` in the CSV and
//! `null` in the JSON.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use fa_core::teacher_student::fmt_f64;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub epoch: u64,
    pub loss: Option<f64>,
    pub accuracy: Option<f64>,
    pub eg: Option<f64>,
    pub wa_global: Option<f64>,
    pub ga_global: Option<f64>,
    /// layers 2 ..= L
    pub wa_layer: Vec<Option<f64>>,
    /// layers 1 ..= L-1
    pub ga_layer: Vec<Option<f64>>,
    pub interrun: Option<f64>,
    /// singular-value ratio of each alignment matrix
    pub conditioning: Vec<Option<f64>>,
    /// relative weak-alignment residual per layer
    pub residual: Vec<Option<f64>>,
}

/// `Some(v)` for finite `v`.
pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), fmt_f64)
}

impl MetricsRow {
    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["step", "epoch", "loss", "accuracy", "eg", "wa_global", "ga_global", "interrun"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend((0..self.wa_layer.len()).map(|i| format!("wa_{}", i + 2)));
        h.extend((0..self.ga_layer.len()).map(|i| format!("ga_{}", i + 1)));
        h.extend((0..self.conditioning.len()).map(|i| format!("cond_{}", i + 1)));
        h.extend((0..self.residual.len()).map(|i| format!("residual_{}", i + 1)));
        h
    }

    fn record(&self) -> Vec<String> {
        let mut r = vec![self.step.to_string(), self.epoch.to_string()];
        r.extend(
            [self.loss, self.accuracy, self.eg, self.wa_global, self.ga_global, self.interrun]
                .into_iter()
                .map(cell),
        );
        for v in [&self.wa_layer, &self.ga_layer, &self.conditioning, &self.residual] {
            r.extend(v.iter().copied().map(cell));
        }
        r
    }
}

/// Writes `<stem>.csv` and `<stem>.jsonl` in one go.
pub fn write_metrics(dir: &Path, stem: &str, rows: &[MetricsRow]) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    if let Some(first) = rows.first() {
        w.write_record(first.header())?;
    }
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush().map_err(io_err(&csv_path))?;

    let json_path = dir.join(format!("{stem}.jsonl"));
    let mut j = BufWriter::new(File::create(&json_path).map_err(io_err(&json_path))?);
    for r in rows {
        serde_json::to_writer(&mut j, r)?;
        j.write_all(b"\n").map_err(io_err(&json_path))?;
    }
    j.flush().map_err(io_err(&json_path))?;
    Ok(())
}

/// Reads back a `.jsonl` sidecar.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut rows = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(io_err(path))?;
        if !line.trim().is_empty() {
            rows.push(serde_json::from_str(&line)?);
        }
    }
    Ok(rows)
}

pub fn jsonl_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.jsonl"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_nan_cells() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            MetricsRow {
                step: 0,
                loss: Some(2.5),
                wa_layer: vec![None, Some(0.1)],
                ga_layer: vec![Some(1.0), None],
                ..Default::default()
            },
            MetricsRow {
                step: 10,
                epoch: 1,
                loss: Some(1.25),
                wa_global: Some(-0.5),
                wa_layer: vec![Some(0.2), Some(0.3)],
                ga_layer: vec![Some(0.9), Some(0.8)],
                ..Default::default()
            },
        ];
        write_metrics(dir.path(), "run", &rows).unwrap();
        assert_eq!(read_metrics(&jsonl_path(dir.path(), "run")).unwrap(), rows);
        let csv = fs::read_to_string(dir.path().join("run.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "step,epoch,loss,accuracy,eg,wa_global,ga_global,interrun,wa_2,wa_3,ga_1,ga_2"
        );
        assert_eq!(lines.next().unwrap(), "0,0,2.5e0,nan,nan,nan,nan,nan,nan,1e-1,1e0,nan");
    }
}
