//! Minibatch SGD on MLPs with any of the learning rules, logging loss,
//! accuracy and the alignment observables at a fixed epoch cadence.
//!
//! Every random choice of a run is drawn from a labelled substream of the
//! configured seed: `feedback/r`, `init/2r+j` for member `j` of run `r`,
//! `order/r` for the batch order, and `data/r` or `corruption/r` for the
//! training set. Runs with equal index therefore share feedback, batch order
//! and data regardless of the rule, and the two members of a pair differ only
//! in their initial weights.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use fa_core::alignment::{interrun_cosine, report_with_signal};
use fa_core::datasets::{
    corrupt_labels, downscale, load_cifar10_dir, load_mnist_dir, synthetic_targets, CovarianceSpec, Dataset,
};
use fa_core::network::{forward_batch, init, write_checkpoint, MlpParams, OutputMap};
use fa_core::rng::Rng;
use fa_core::trainers::{
    apply, error, init_feedback, loss_value, rule_deltas, FeedbackKind, LearningRates, Loss, Rule,
};
use ndarray::Axis;
use serde::{Deserialize, Serialize};

use crate::config::{Activation, FeedbackInitName, InitName, LossName, RuleName, RunOptions};
use crate::error::{invalid, io_err, LabError, Result};
use crate::metrics::{finite, write_metrics, MetricsRow};
use crate::pool::run_indexed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    Mnist,
    Cifar10,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub kind: DataKind,
    /// directory with the binary distribution; defaults to `data/<kind>`
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "defaults::samples")]
    pub samples: usize,
    /// image side after resampling
    #[serde(default = "defaults::side")]
    pub side: usize,
    /// fraction of labels redrawn at random
    #[serde(default)]
    pub corruption: f64,
    #[serde(default = "defaults::one")]
    pub alpha: f64,
    #[serde(default = "defaults::one")]
    pub beta: f64,
    #[serde(default = "defaults::input_dim")]
    pub input_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepConfig {
    #[serde(default = "defaults::name")]
    pub name: String,
    pub dataset: DataConfig,
    #[serde(default = "defaults::hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "defaults::activation")]
    pub activation: Activation,
    #[serde(default = "defaults::rules")]
    pub rules: Vec<RuleName>,
    /// softmax cross-entropy for labelled data, MSE otherwise
    #[serde(default)]
    pub loss: Option<LossName>,
    #[serde(default = "defaults::yes")]
    pub bias: bool,
    #[serde(default = "defaults::init")]
    pub init: InitName,
    #[serde(default = "defaults::init_std")]
    pub init_std: f64,
    #[serde(default = "defaults::feedback_init")]
    pub feedback_init: FeedbackInitName,
    /// step size on the batch-mean loss
    #[serde(default = "defaults::lr")]
    pub lr: f64,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default = "defaults::epochs")]
    pub epochs: u64,
    #[serde(default = "defaults::one_u64")]
    pub log_every: u64,
    /// samples (from the front of the training set) used for GA
    #[serde(default = "defaults::probe")]
    pub probe: usize,
    #[serde(default = "defaults::one_usize")]
    pub runs: usize,
    /// train each run as two nets sharing feedback, data and batch order
    #[serde(default)]
    pub paired: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::yes")]
    pub checkpoints: bool,
}

pub(crate) mod defaults {
    use super::*;
    pub fn samples() -> usize {
        10_000
    }
    pub fn side() -> usize {
        14
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn input_dim() -> usize {
        10
    }
    pub fn name() -> String {
        "deep".into()
    }
    pub fn hidden() -> Vec<usize> {
        vec![100, 100, 100]
    }
    pub fn activation() -> Activation {
        Activation::Relu
    }
    pub fn rules() -> Vec<RuleName> {
        vec![RuleName::Dfa]
    }
    pub fn yes() -> bool {
        true
    }
    pub fn init() -> InitName {
        InitName::FanInUniform
    }
    pub fn init_std() -> f64 {
        1e-2
    }
    pub fn feedback_init() -> FeedbackInitName {
        FeedbackInitName::Uniform
    }
    pub fn lr() -> f64 {
        1e-2
    }
    pub fn batch_size() -> usize {
        32
    }
    pub fn epochs() -> u64 {
        100
    }
    pub fn one_u64() -> u64 {
        1
    }
    pub fn one_usize() -> usize {
        1
    }
    pub fn probe() -> usize {
        1000
    }
}

impl DeepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rules.is_empty() {
            return Err(invalid("`rules` is empty"));
        }
        if self.batch_size == 0 || self.log_every == 0 || self.runs == 0 {
            return Err(invalid("`batch_size`, `log_every` and `runs` must be positive"));
        }
        if !(self.lr > 0.0) {
            return Err(invalid("`lr` must be positive"));
        }
        if !(0.0..=1.0).contains(&self.dataset.corruption) {
            return Err(invalid("`dataset.corruption` must lie in [0, 1]"));
        }
        if self.dataset.corruption > 0.0 && self.dataset.kind == DataKind::Synthetic {
            return Err(invalid("label corruption needs a labelled dataset"));
        }
        if self.hidden.contains(&0) {
            return Err(invalid("hidden widths must be positive"));
        }
        Ok(())
    }

    pub fn loss(&self) -> Loss {
        match (self.loss, self.dataset.kind) {
            (Some(l), _) => l.into(),
            (None, DataKind::Synthetic) => Loss::Mse,
            (None, _) => Loss::SoftmaxCrossEntropy,
        }
    }

    /// File stem of run `run`, member `member` (`None` for unpaired runs).
    pub fn stem(&self, rule: RuleName, run: usize, member: Option<usize>) -> String {
        let rule = Rule::from(rule).name();
        match member {
            None => format!("{}_{rule}_run{run}", self.name),
            Some(m) => format!("{}_{rule}_pair{run}_{}", self.name, ["a", "b"][m]),
        }
    }
}

/// The shared part of a dataset: the first `samples` images, resampled.
/// Synthetic sets are drawn per run and return `None`.
pub fn load_base(cfg: &DataConfig) -> Result<Option<Dataset>> {
    let dir = |name: &str| cfg.dir.clone().unwrap_or_else(|| Path::new("data").join(name));
    let ds = match cfg.kind {
        DataKind::Synthetic => return Ok(None),
        DataKind::Mnist => load_mnist_dir(&dir("mnist"), true, cfg.samples)?,
        DataKind::Cifar10 => load_cifar10_dir(&dir("cifar10"), cfg.samples)?,
    };
    if ds.len() < cfg.samples {
        return Err(invalid(format!("dataset has {} samples, {} requested", ds.len(), cfg.samples)));
    }
    let side = ds.image.map_or(cfg.side, |s| s.height);
    Ok(Some(if side == cfg.side { ds } else { downscale(&ds, cfg.side)? }))
}

/// Training set of run `run`.
pub fn run_dataset(cfg: &DataConfig, base: Option<&Dataset>, root: &Rng, run: usize) -> Result<Dataset> {
    match base {
        None => {
            let spec = CovarianceSpec {
                alpha: cfg.alpha,
                beta: cfg.beta,
            };
            Ok(synthetic_targets(spec, cfg.samples, cfg.input_dim, &mut root.substream_idx("data", run as u64))?)
        }
        Some(ds) if cfg.corruption > 0.0 => {
            Ok(corrupt_labels(ds, cfg.corruption, &mut root.substream_idx("corruption", run as u64))?)
        }
        Some(ds) => Ok(ds.clone()),
    }
}

/// Mean loss and (for labelled data) accuracy over the whole set.
pub fn evaluate(net: &MlpParams, data: &Dataset, loss: Loss) -> Result<(f64, Option<f64>)> {
    let n = data.len();
    let mut total = 0.0;
    let mut correct = 0usize;
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(1000) {
        let (x, y) = data.batch(chunk);
        let trace = forward_batch(net, x.view())?;
        total += loss_value(&trace, y.view(), loss) * chunk.len() as f64;
        for (out, target) in trace.output.axis_iter(Axis(1)).zip(y.axis_iter(Axis(1))) {
            if argmax(out.iter()) == argmax(target.iter()) {
                correct += 1;
            }
        }
    }
    let acc = data.labels.is_some().then(|| correct as f64 / n as f64);
    Ok((total / n as f64, acc))
}

fn argmax<'a>(v: impl Iterator<Item = &'a f64>) -> usize {
    v.enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

/// Trained nets and their metrics, one entry per member.
pub struct GroupOutcome {
    pub rows: Vec<Vec<MetricsRow>>,
    pub nets: Vec<MlpParams>,
}

/// Trains `members` nets (1 or 2) of run `run` in lockstep.
pub fn train_group(
    cfg: &DeepConfig,
    data: &Dataset,
    rule: RuleName,
    run: usize,
    members: usize,
    seed: u64,
) -> Result<GroupOutcome> {
    let root = Rng::new(seed);
    let rule_kind = Rule::from(rule);
    let loss = cfg.loss();
    let mut widths = vec![data.input_dim()];
    widths.extend(&cfg.hidden);
    widths.push(data.output_dim());
    let depth = widths.len() - 1;
    let fb_kind = if rule == RuleName::Fa {
        FeedbackKind::Fa
    } else {
        FeedbackKind::Dfa
    };
    let fb = init_feedback(
        fb_kind,
        cfg.feedback_init.into(),
        &widths,
        &mut root.substream_idx("feedback", run as u64),
    )?;
    let output = match loss {
        Loss::Mse => OutputMap::Identity,
        Loss::SoftmaxCrossEntropy => OutputMap::Softmax,
    };
    let mut nets = (0..members)
        .map(|j| {
            init(
                cfg.init.scheme(cfg.init_std),
                &widths,
                cfg.activation.into(),
                output,
                cfg.bias,
                &mut root.substream_idx("init", (2 * run + j) as u64),
            )
        })
        .collect::<fa_core::Result<Vec<_>>>()?;

    let probe_idx: Vec<usize> = (0..cfg.probe.min(data.len())).collect();
    let (px, py) = data.batch(&probe_idx);
    let mut order = root.substream_idx("order", run as u64);
    let mut rows = vec![Vec::new(); members];
    let mut step = 0u64;

    let log = |nets: &[MlpParams], epoch: u64, step: u64, rows: &mut Vec<Vec<MetricsRow>>| -> Result<()> {
        let interrun = if nets.len() == 2 {
            finite(interrun_cosine(&nets[0], &nets[1])?)
        } else {
            None
        };
        for (j, net) in nets.iter().enumerate() {
            let (l, acc) = evaluate(net, data, loss)?;
            if !l.is_finite() {
                return Err(LabError::Diverged {
                    run: cfg.stem(rule, run, (members == 2).then_some(j)),
                    epoch,
                });
            }
            let trace = forward_batch(net, px.view())?;
            let e = error(&trace, py.view(), loss)?;
            let broadcast = if rule_kind == Rule::Drtp { py.mapv(|v| -v) } else { e.clone() };
            let r = report_with_signal(net, &fb, &trace, &e, &broadcast)?;
            rows[j].push(MetricsRow {
                step,
                epoch,
                loss: Some(l),
                accuracy: acc,
                wa_global: r.wa_global,
                ga_global: r.ga_global,
                wa_layer: r.wa_layer,
                ga_layer: r.ga_layer,
                interrun,
                ..Default::default()
            });
        }
        Ok(())
    };

    log(&nets, 0, 0, &mut rows)?;
    for epoch in 1..=cfg.epochs {
        let perm = order.permutation(data.len());
        for chunk in perm.chunks(cfg.batch_size) {
            let (x, y) = data.batch(chunk);
            let rates = LearningRates::uniform(cfg.lr / chunk.len() as f64, depth);
            for net in nets.iter_mut() {
                let trace = forward_batch(net, x.view())?;
                let d = rule_deltas(rule_kind, net, Some(&fb), &trace, y.view(), loss, &rates)?;
                apply(net, &d)?;
            }
            step += 1;
        }
        if epoch % cfg.log_every == 0 || epoch == cfg.epochs {
            log(&nets, epoch, step, &mut rows)?;
        }
    }
    Ok(GroupOutcome { rows, nets })
}

/// Summary of one finished run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub stem: String,
    pub rule: RuleName,
    pub run: usize,
    pub last: MetricsRow,
}

fn save_checkpoint(dir: &Path, stem: &str, net: &MlpParams) -> Result<()> {
    let path = dir.join(format!("{stem}.faw"));
    let f = File::create(&path).map_err(io_err(&path))?;
    write_checkpoint(net, BufWriter::new(f))?;
    Ok(())
}

/// Trains run `run` of `rule` (one net, or a pair) and writes its files.
pub fn run_job(
    cfg: &DeepConfig,
    base: Option<&Dataset>,
    seed: u64,
    rule: RuleName,
    run: usize,
    out: &Path,
) -> Result<Vec<RunRecord>> {
    let root = Rng::new(seed);
    let members = if cfg.paired { 2 } else { 1 };
    let data = run_dataset(&cfg.dataset, base, &root, run)?;
    let outcome = train_group(cfg, &data, rule, run, members, seed)?;
    let mut recs = Vec::new();
    for (m, (rows, net)) in outcome.rows.iter().zip(&outcome.nets).enumerate() {
        let stem = cfg.stem(rule, run, cfg.paired.then_some(m));
        write_metrics(out, &stem, rows)?;
        if cfg.checkpoints {
            save_checkpoint(out, &stem, net)?;
        }
        recs.push(RunRecord {
            stem,
            rule,
            run,
            last: rows.last().cloned().unwrap_or_default(),
        });
    }
    Ok(recs)
}

/// Runs every `(rule, run)` of the config, writing metrics (and checkpoints)
/// under `out`.
pub fn run_deep(cfg: &DeepConfig, opts: &RunOptions) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let seed = opts.seed_or(cfg.seed);
    let base = load_base(&cfg.dataset)?;
    let jobs: Vec<(RuleName, usize)> = cfg
        .rules
        .iter()
        .flat_map(|&r| (0..cfg.runs).map(move |i| (r, i)))
        .collect();
    let records = run_indexed(jobs.len(), opts.workers, |j| {
        let (rule, run) = jobs[j];
        run_job(cfg, base.as_ref(), seed, rule, run, &opts.out)
    })?;
    Ok(records.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(kind: DataKind) -> DeepConfig {
        toml::from_str::<DeepConfig>(&format!(
            "name = 't'\nhidden = [8, 8]\nepochs = 3\nprobe = 50\nlr = 0.05\n[dataset]\nkind = '{}'\nsamples = 200\n",
            match kind {
                DataKind::Synthetic => "synthetic",
                DataKind::Mnist => "mnist",
                DataKind::Cifar10 => "cifar10",
            }
        ))
        .unwrap()
    }

    #[test]
    fn defaults_and_validation() {
        let mut c = tiny(DataKind::Synthetic);
        assert_eq!(c.loss(), Loss::Mse);
        assert_eq!(c.batch_size, 32);
        c.validate().unwrap();
        c.dataset.corruption = 0.5;
        assert!(c.validate().is_err());
        c.dataset.corruption = 0.0;
        c.rules.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn synthetic_pair_is_deterministic_and_logged() {
        let cfg = tiny(DataKind::Synthetic);
        let root = Rng::new(3);
        let data = run_dataset(&cfg.dataset, None, &root, 0).unwrap();
        let a = train_group(&cfg, &data, RuleName::Dfa, 0, 2, 3).unwrap();
        let b = train_group(&cfg, &data, RuleName::Dfa, 0, 2, 3).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows[0].len(), 4);
        assert_eq!(a.rows[0][3].step, 3 * 7);
        assert!(a.rows[0][3].interrun.is_some());
        assert_ne!(a.nets[0], a.nets[1]);
        assert_eq!(a.rows[0][0].wa_layer.len(), 2);
        assert!(a.rows[0][0].accuracy.is_none());
    }

    #[test]
    fn unknown_dataset_key_is_rejected() {
        let r = toml::from_str::<DeepConfig>("[dataset]\nkind = 'mnist'\nsampels = 3\n");
        assert!(r.is_err());
    }
}
