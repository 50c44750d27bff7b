//! Sweeps built from deep runs: the target-covariance grid and label
//! corruption. Summary tables are computed from the metrics files the runs
//! wrote, never from in-memory state.

use std::path::Path;

use fa_core::teacher_student::fmt_f64;
use serde::{Deserialize, Serialize};

use crate::config::{Activation, RunOptions};
use crate::deep::{load_base, run_job, DataKind, DeepConfig};
use crate::error::{invalid, io_err, Result};
use crate::metrics::{jsonl_path, read_metrics, MetricsRow};
use crate::pool::run_indexed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaBetaConfig {
    #[serde(default = "d::ab_name")]
    pub name: String,
    #[serde(default = "d::grid")]
    pub alphas: Vec<f64>,
    #[serde(default = "d::grid")]
    pub betas: Vec<f64>,
    #[serde(default = "d::three")]
    pub seeds: usize,
    #[serde(default = "d::ab_train")]
    pub train: DeepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionConfig {
    #[serde(default = "d::corr_name")]
    pub name: String,
    #[serde(default = "d::ps")]
    pub ps: Vec<f64>,
    /// WA level whose first crossing is reported
    #[serde(default = "d::threshold")]
    pub threshold: f64,
    pub train: DeepConfig,
}

mod d {
    use super::*;
    pub fn ab_name() -> String {
        "alphabeta".into()
    }
    pub fn corr_name() -> String {
        "corruption".into()
    }
    pub fn grid() -> Vec<f64> {
        vec![0.2, 0.4, 0.6, 0.8, 1.0]
    }
    pub fn three() -> usize {
        3
    }
    pub fn ps() -> Vec<f64> {
        vec![0.0, 0.5, 0.9]
    }
    pub fn threshold() -> f64 {
        0.2
    }
    pub fn ab_train() -> DeepConfig {
        let mut c: DeepConfig = toml::from_str("[dataset]\nkind = 'synthetic'\nsamples = 1000\n").expect("static");
        c.hidden = vec![100, 100];
        c.activation = Activation::Linear;
        c.bias = false;
        c
    }
}

/// Final alignment of one grid cell, over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    pub wa_mean: f64,
    pub wa_std: f64,
    pub ga_mean: f64,
    pub ga_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

fn cell_tag(v: f64) -> String {
    format!("{v}").replace('.', "p")
}

fn last_row(dir: &Path, stem: &str) -> Result<MetricsRow> {
    read_metrics(&jsonl_path(dir, stem))?
        .pop()
        .ok_or_else(|| invalid(format!("{stem} has no metrics rows")))
}

impl AlphaBetaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.betas.is_empty() {
            return Err(invalid("the (alpha, beta) grid is empty"));
        }
        if self.seeds == 0 {
            return Err(invalid("`seeds` must be positive"));
        }
        if self.train.dataset.kind != DataKind::Synthetic {
            return Err(invalid("the grid needs `train.dataset.kind = \"synthetic\"`"));
        }
        for &v in self.alphas.iter().chain(&self.betas) {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(format!("grid value {v} outside (0, 1]")));
            }
        }
        self.train.validate()
    }

    /// Training config of one cell.
    pub fn cell_config(&self, alpha: f64, beta: f64) -> DeepConfig {
        let mut c = self.train.clone();
        c.name = format!("{}_a{}_b{}", self.name, cell_tag(alpha), cell_tag(beta));
        c.dataset.alpha = alpha;
        c.dataset.beta = beta;
        c.runs = self.seeds;
        c
    }
}

/// Trains every cell and seed, then writes `<name>_grid.csv`.
pub fn run_alphabeta(cfg: &AlphaBetaConfig, opts: &RunOptions) -> Result<Vec<GridCell>> {
    cfg.validate()?;
    let seed = opts.seed_or(cfg.train.seed);
    let cells: Vec<(f64, f64)> = cfg.alphas.iter().flat_map(|&a| cfg.betas.iter().map(move |&b| (a, b))).collect();
    let rule = cfg.train.rules[0];
    let per = cfg.seeds;
    let stems = run_indexed(cells.len() * per, opts.workers, |j| {
        let (a, b) = cells[j / per];
        let c = cfg.cell_config(a, b);
        Ok(run_job(&c, None, seed, rule, j % per, &opts.out)?.remove(0).stem)
    })?;
    let mut out = Vec::new();
    for (i, &(alpha, beta)) in cells.iter().enumerate() {
        let mut wa = Vec::new();
        let mut ga = Vec::new();
        for stem in &stems[i * per..(i + 1) * per] {
            let r = last_row(&opts.out, stem)?;
            wa.push(r.wa_global.unwrap_or(f64::NAN));
            ga.push(r.ga_global.unwrap_or(f64::NAN));
        }
        let (wa_mean, wa_std) = mean_std(&wa);
        let (ga_mean, ga_std) = mean_std(&ga);
        out.push(GridCell {
            alpha,
            beta,
            wa_mean,
            wa_std,
            ga_mean,
            ga_std,
        });
    }
    let path = opts.out.join(format!("{}_grid.csv", cfg.name));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["alpha", "beta", "wa_mean", "wa_std", "ga_mean", "ga_std"])?;
    for c in &out {
        w.write_record([c.alpha, c.beta, c.wa_mean, c.wa_std, c.ga_mean, c.ga_std].map(fmt_f64))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(out)
}

/// Alignment timing at one corruption level, from the seed-mean WA curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSummary {
    pub p: f64,
    /// first logged epoch with mean WA above the threshold
    pub first_epoch: Option<u64>,
    pub final_wa: f64,
    pub final_accuracy: Option<f64>,
    pub stems: Vec<String>,
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ps.is_empty() {
            return Err(invalid("`ps` is empty"));
        }
        if self.ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid("corruption levels must lie in [0, 1]"));
        }
        if self.train.dataset.kind == DataKind::Synthetic {
            return Err(invalid("label corruption needs a labelled dataset"));
        }
        if self.train.paired {
            return Err(invalid("corruption runs are unpaired"));
        }
        self.train.validate()
    }

    /// Training config at level `p`; `p = 0` keeps the training config's name
    /// so that its files coincide with a plain `deep` run.
    pub fn level_config(&self, p: f64) -> DeepConfig {
        let mut c = self.train.clone();
        if p > 0.0 {
            c.name = format!("{}_p{}", c.name, cell_tag(p));
        }
        c.dataset.corruption = p;
        c
    }
}

/// Mean over runs of a per-epoch curve; `None` where any run is undefined.
pub fn mean_curve(runs: &[Vec<MetricsRow>], pick: impl Fn(&MetricsRow) -> Option<f64>) -> Vec<(u64, Option<f64>)> {
    let len = runs.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let vals: Option<Vec<f64>> = runs.iter().map(|r| pick(&r[i])).collect();
            (runs[0][i].epoch, vals.map(|v| v.iter().sum::<f64>() / v.len() as f64))
        })
        .collect()
}

/// Trains every level and seed, then writes `<name>_summary.csv` and the
/// seed-mean WA curves in `<name>_curves.csv`.
pub fn run_corruption(cfg: &CorruptionConfig, opts: &RunOptions) -> Result<Vec<CorruptionSummary>> {
    cfg.validate()?;
    let seed = opts.seed_or(cfg.train.seed);
    let base = load_base(&cfg.train.dataset)?;
    let rule = cfg.train.rules[0];
    let runs = cfg.train.runs;
    let stems = run_indexed(cfg.ps.len() * runs, opts.workers, |j| {
        let c = cfg.level_config(cfg.ps[j / runs]);
        Ok(run_job(&c, base.as_ref(), seed, rule, j % runs, &opts.out)?.remove(0).stem)
    })?;
    let mut out = Vec::new();
    let mut curves = Vec::new();
    for (i, &p) in cfg.ps.iter().enumerate() {
        let level_stems = stems[i * runs..(i + 1) * runs].to_vec();
        let rows = level_stems
            .iter()
            .map(|s| read_metrics(&jsonl_path(&opts.out, s)))
            .collect::<Result<Vec<_>>>()?;
        let wa = mean_curve(&rows, |r| r.wa_global);
        let acc = mean_curve(&rows, |r| r.accuracy);
        let first_epoch = wa.iter().find(|(_, v)| v.is_some_and(|v| v > cfg.threshold)).map(|(e, _)| *e);
        out.push(CorruptionSummary {
            p,
            first_epoch,
            final_wa: wa.last().and_then(|(_, v)| *v).unwrap_or(f64::NAN),
            final_accuracy: acc.last().and_then(|(_, v)| *v),
            stems: level_stems,
        });
        curves.push(wa);
    }
    let path = opts.out.join(format!("{}_summary.csv", cfg.name));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["p", "first_epoch", "final_wa", "final_accuracy"])?;
    for s in &out {
        w.write_record([
            fmt_f64(s.p),
            s.first_epoch.map_or_else(|| "nan".into(), |e| e.to_string()),
            fmt_f64(s.final_wa),
            fmt_f64(s.final_accuracy.unwrap_or(f64::NAN)),
        ])?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = opts.out.join(format!("{}_curves.csv", cfg.name));
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["epoch".to_string()];
    header.extend(cfg.ps.iter().map(|p| format!("wa_p{}", cell_tag(*p))));
    w.write_record(&header)?;
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    for i in 0..len {
        let mut rec = vec![curves[0][i].0.to_string()];
        rec.extend(curves.iter().map(|c| fmt_f64(c[i].1.unwrap_or(f64::NAN))));
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse;

    #[test]
    fn empty_grid_is_rejected() {
        let c: AlphaBetaConfig = parse("alphas = []", Path::new("t.toml")).unwrap();
        assert!(c.validate().is_err());
        let c: AlphaBetaConfig = parse("", Path::new("t.toml")).unwrap();
        c.validate().unwrap();
        assert_eq!(c.train.hidden, vec![100, 100]);
    }

    #[test]
    fn tiny_grid_reads_back_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let c: AlphaBetaConfig = parse(
            "alphas = [0.5, 1.0]\nbetas = [1.0]\nseeds = 2\n[train]\nhidden = [6]\nactivation = 'linear'\nbias = false\nepochs = 2\nprobe = 50\n[train.dataset]\nkind = 'synthetic'\nsamples = 64\n",
            Path::new("t.toml"),
        )
        .unwrap();
        let g = run_alphabeta(&c, &RunOptions::new(dir.path())).unwrap();
        assert_eq!(g.len(), 2);
        assert!(g.iter().all(|c| c.ga_mean.is_finite() && c.wa_mean.is_finite()));
        assert!(dir.path().join("alphabeta_grid.csv").exists());
    }

    #[test]
    fn mean_curve_handles_undefined() {
        let row = |e, v| MetricsRow {
            epoch: e,
            wa_global: v,
            ..Default::default()
        };
        let runs = vec![vec![row(0, None), row(1, Some(0.2))], vec![row(0, Some(0.1)), row(1, Some(0.4))]];
        let c = mean_curve(&runs, |r| r.wa_global);
        assert_eq!(c[0], (0, None));
        assert!((c[1].1.unwrap() - 0.3).abs() < 1e-15);
    }
}
