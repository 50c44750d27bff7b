//! Deep linear networks trained from zero on a linear teacher, tracking the
//! alignment matrices next to the weights.

use std::fs;

use fa_core::alignment::{alignment_by_double_sums, conditioning, report_with_signal, weak_wa_residual, AlignmentMatrices};
use fa_core::datasets::linear_teacher_dataset;
use fa_core::linalg::{frobenius, gaussian_matrix, identity, Matrix};
use fa_core::network::{forward_batch, init, ActivationKind, InitScheme, OutputMap};
use fa_core::ode::{drtp_a2_exact, drtp_alignment_closed_form, drtp_alignment_exact};
use fa_core::rng::Rng;
use fa_core::teacher_student::fmt_f64;
use fa_core::trainers::{apply, error, init_feedback, loss_value, rule_deltas, FeedbackKind, LearningRates, Loss, Rule};
use serde::{Deserialize, Serialize};

use crate::config::{FeedbackInitName, RunOptions};
use crate::error::{invalid, io_err, Result};
use crate::metrics::{finite, write_metrics, MetricsRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Dfa,
    Fa,
    /// DFA with a single output; GA is checked at every step
    Scalar,
    /// DRTP, usually with a large batch
    Drtp,
}

impl Variant {
    fn rule(self) -> Rule {
        match self {
            Variant::Dfa | Variant::Scalar => Rule::Dfa,
            Variant::Fa => Rule::Fa,
            Variant::Drtp => Rule::Drtp,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Variant::Dfa => "dfa",
            Variant::Fa => "fa",
            Variant::Scalar => "scalar",
            Variant::Drtp => "drtp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    #[serde(default = "d::name")]
    pub name: String,
    #[serde(default = "d::variants")]
    pub variants: Vec<Variant>,
    /// `[n_0, ..., n_L]`; the scalar variant replaces `n_L` by 1
    #[serde(default = "d::widths")]
    pub widths: Vec<usize>,
    #[serde(default = "d::steps")]
    pub steps: usize,
    /// per-sample step size
    #[serde(default = "d::eta")]
    pub eta: f64,
    #[serde(default = "d::one")]
    pub batch: usize,
    /// batch size of the drtp variant
    #[serde(default = "d::drtp_batch")]
    pub drtp_batch: usize,
    #[serde(default = "d::drtp_steps")]
    pub drtp_steps: usize,
    #[serde(default = "d::feedback_init")]
    pub feedback_init: FeedbackInitName,
    /// scale of the random part of the input covariance, `I + c c^T`
    #[serde(default)]
    pub input_anisotropy: f64,
    #[serde(default = "d::one")]
    pub log_every: usize,
    /// also evaluate the alignment matrices by explicit double sums (batch 1)
    #[serde(default = "d::yes")]
    pub double_sums: bool,
    #[serde(default)]
    pub seed: u64,
}

mod d {
    use super::*;
    pub fn name() -> String {
        "linear".into()
    }
    pub fn variants() -> Vec<Variant> {
        vec![Variant::Dfa, Variant::Fa, Variant::Scalar, Variant::Drtp]
    }
    pub fn widths() -> Vec<usize> {
        vec![10, 8, 6, 4]
    }
    pub fn steps() -> usize {
        200
    }
    pub fn eta() -> f64 {
        0.02
    }
    pub fn one() -> usize {
        1
    }
    pub fn drtp_batch() -> usize {
        10_000
    }
    pub fn drtp_steps() -> usize {
        10
    }
    pub fn feedback_init() -> FeedbackInitName {
        FeedbackInitName::Gaussian
    }
    pub fn yes() -> bool {
        true
    }
}

/// What one variant measured.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearSummary {
    pub variant: String,
    /// largest weak-alignment residual over all layers and logged steps
    pub max_residual: f64,
    /// largest `|A_incremental - A_double_sum| / |A|` over layers
    pub double_sum_error: Option<f64>,
    /// largest `|GA_l - 1|` over hidden layers and steps (scalar variant)
    pub max_ga_deviation: Option<f64>,
    /// `|A_2 - eta^2 T Sx^2 T^T t| / |eta^2 T Sx^2 T^T t|` (drtp)
    pub drtp_literal_error: Option<f64>,
    /// same against `t (t - 1) / 2` in place of `t` (drtp)
    pub drtp_exact_error: Option<f64>,
    /// last step's `A_2` increment against the literal form (drtp)
    pub drtp_increment_error: Option<f64>,
    /// `|A_l - exact_l| / |exact_l|`, worst over layers (drtp)
    pub drtp_layers_error: Option<f64>,
    pub final_wa: Option<f64>,
    pub final_ga: Option<f64>,
}

impl LinearConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 3 || self.widths.contains(&0) {
            return Err(invalid("`widths` needs at least two layers of positive width"));
        }
        if self.variants.is_empty() {
            return Err(invalid("`variants` is empty"));
        }
        if self.batch == 0 || self.drtp_batch == 0 || self.log_every == 0 {
            return Err(invalid("batch sizes and `log_every` must be positive"));
        }
        if !(self.eta > 0.0) {
            return Err(invalid("`eta` must be positive"));
        }
        Ok(())
    }
}

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    frobenius(&(a - b)) / frobenius(b).max(f64::MIN_POSITIVE)
}

/// Trains one variant and writes `<name>_<variant>.csv/.jsonl`.
pub fn run_variant(cfg: &LinearConfig, variant: Variant, opts: &RunOptions) -> Result<LinearSummary> {
    let root = Rng::new(opts.seed_or(cfg.seed)).substream(variant.name());
    let mut widths = cfg.widths.clone();
    if variant == Variant::Scalar {
        *widths.last_mut().expect("validated") = 1;
    }
    let (n0, nl) = (widths[0], widths[widths.len() - 1]);
    let depth = widths.len() - 1;
    let (batch, steps) = match variant {
        Variant::Drtp => (cfg.drtp_batch, cfg.drtp_steps),
        _ => (cfg.batch, cfg.steps),
    };
    let kind = if variant == Variant::Fa { FeedbackKind::Fa } else { FeedbackKind::Dfa };
    let fb = init_feedback(kind, cfg.feedback_init.into(), &widths, &mut root.substream("feedback"))?;
    let mut params = init(InitScheme::Zero, &widths, ActivationKind::Linear, OutputMap::Identity, false, &mut root.substream("init"))?;
    let teacher = gaussian_matrix(&mut root.substream("teacher"), nl, n0, 1.0 / (n0 as f64).sqrt());
    let c = gaussian_matrix(&mut root.substream("covariance"), n0, n0, cfg.input_anisotropy / (n0 as f64).sqrt());
    let sigma_x = identity(n0) + c.dot(&c.t());
    let mut data = root.substream("data");

    let mut state = AlignmentMatrices::new(&fb, &widths)?;
    let rates = LearningRates::uniform(cfg.eta / batch as f64, depth);
    let keep_history = cfg.double_sums && batch == 1 && variant != Variant::Drtp;
    let mut history = Vec::new();
    let mut rows = Vec::new();
    let mut summary = LinearSummary {
        variant: variant.name().into(),
        ..Default::default()
    };
    let mut ga_dev: f64 = 0.0;
    let mut prev_a2 = state.a(2).clone();
    let mut last_inc = Matrix::zeros((nl, nl));

    for t in 0..=steps {
        let ds = linear_teacher_dataset(&teacher, &sigma_x, batch, &mut data)?;
        let x = ds.inputs.t().to_owned();
        let y = ds.targets.t().to_owned();
        let trace = forward_batch(&params, x.view())?;
        let e = error(&trace, y.view(), Loss::Mse)?;
        let signal = if variant == Variant::Drtp { y.mapv(|v| -v) } else { e.clone() };
        let report = report_with_signal(&params, &fb, &trace, &e, &signal)?;
        if variant == Variant::Scalar {
            for g in report.ga_layer.iter().flatten() {
                ga_dev = ga_dev.max((g - 1.0).abs());
            }
        }
        let residual = weak_wa_residual(&params, &state)?;
        summary.max_residual = residual.iter().fold(summary.max_residual, |m, r| m.max(*r));
        if t % cfg.log_every == 0 || t == steps {
            let cond = (2..=depth)
                .map(|l| conditioning(state.a(l)).ok().and_then(|c| finite(c.ratio)))
                .collect();
            rows.push(MetricsRow {
                step: t as u64,
                loss: Some(loss_value(&trace, y.view(), Loss::Mse)),
                wa_global: report.wa_global,
                ga_global: report.ga_global,
                wa_layer: report.wa_layer.clone(),
                ga_layer: report.ga_layer.clone(),
                conditioning: cond,
                residual: residual.iter().map(|r| Some(*r)).collect(),
                ..Default::default()
            });
            summary.final_wa = report.wa_global;
            summary.final_ga = report.ga_global;
        }
        if t == steps {
            break;
        }
        let d = rule_deltas(variant.rule(), &params, Some(&fb), &trace, y.view(), Loss::Mse, &rates)?;
        apply(&mut params, &d)?;
        state.accumulate(&signal, &x, cfg.eta / batch as f64)?;
        last_inc = state.a(2) - &prev_a2;
        prev_a2 = state.a(2).clone();
        if keep_history {
            history.push((signal, x));
        }
    }

    if keep_history {
        let grams: Vec<Matrix> = fb.effective_direct().iter().map(|f| f.t().dot(f)).collect();
        let brute = alignment_by_double_sums(&history, &grams, cfg.eta);
        let worst = (1..=depth)
            .map(|l| frobenius(&(state.a(l) - &brute[l - 1])) / frobenius(state.a(l)).max(1.0))
            .fold(0.0, f64::max);
        summary.double_sum_error = Some(worst);
    }
    if variant == Variant::Scalar {
        summary.max_ga_deviation = Some(ga_dev);
    }
    if variant == Variant::Drtp {
        let t = steps as f64;
        let literal = drtp_alignment_closed_form(&teacher, &sigma_x, cfg.eta, 2, t);
        summary.drtp_literal_error = Some(rel(state.a(2), &literal));
        summary.drtp_exact_error = Some(rel(state.a(2), &drtp_a2_exact(&teacher, &sigma_x, cfg.eta, t)));
        // the increment of the last step, t-1 -> t, is the literal form at t-1
        let lit_inc = drtp_alignment_closed_form(&teacher, &sigma_x, cfg.eta, 2, t - 1.0);
        summary.drtp_increment_error = Some(rel(&last_inc, &lit_inc));
        let grams: Vec<Matrix> = fb.matrices.iter().map(|f| f.t().dot(f)).collect();
        let exact = drtp_alignment_exact(&teacher, &sigma_x, &grams, cfg.eta, steps);
        let worst = (1..=depth).map(|l| rel(state.a(l), &exact[l - 1])).fold(0.0, f64::max);
        summary.drtp_layers_error = Some(worst);
    }
    write_metrics(&opts.out, &format!("{}_{}", cfg.name, variant.name()), &rows)?;
    Ok(summary)
}

/// Every configured variant, then `<name>_summary.csv`.
pub fn run_linear(cfg: &LinearConfig, opts: &RunOptions) -> Result<Vec<LinearSummary>> {
    cfg.validate()?;
    fs::create_dir_all(&opts.out).map_err(io_err(&opts.out))?;
    let out = crate::pool::run_indexed(cfg.variants.len(), opts.workers, |i| run_variant(cfg, cfg.variants[i], opts))?;
    let path = opts.out.join(format!("{}_summary.csv", cfg.name));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "variant",
        "max_residual",
        "double_sum_error",
        "max_ga_deviation",
        "drtp_literal_error",
        "drtp_exact_error",
        "drtp_increment_error",
        "drtp_layers_error",
        "final_wa",
        "final_ga",
    ])?;
    let cell = |v: Option<f64>| v.map_or_else(|| "nan".into(), fmt_f64);
    for s in &out {
        w.write_record([
            s.variant.clone(),
            fmt_f64(s.max_residual),
            cell(s.double_sum_error),
            cell(s.max_ga_deviation),
            cell(s.drtp_literal_error),
            cell(s.drtp_exact_error),
            cell(s.drtp_increment_error),
            cell(s.drtp_layers_error),
            cell(s.final_wa),
            cell(s.final_ga),
        ])?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_factorizes() {
        let dir = tempfile::tempdir().unwrap();
        let cfg: LinearConfig = toml::from_str("steps = 30\ndrtp_batch = 2000\ndrtp_steps = 4\ninput_anisotropy = 0.3").unwrap();
        let s = run_linear(&cfg, &RunOptions::new(dir.path())).unwrap();
        assert_eq!(s.len(), 4);
        for v in &s {
            assert!(v.max_residual < 1e-8, "{v:?}");
        }
        assert!(s[0].double_sum_error.unwrap() < 1e-10);
        assert!(s[2].max_ga_deviation.unwrap() < 1e-8);
        assert!(s[3].drtp_exact_error.unwrap() < 0.05);
        assert!(dir.path().join("linear_summary.csv").exists());
    }
}
