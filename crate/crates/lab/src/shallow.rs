//! Two-layer teacher-student experiments: online simulations, the
//! order-parameter ODEs next to them, and the P(learn) table.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use fa_core::linalg::{gaussian_vector, Vector};
use fa_core::ode::{integrate, FeedbackMode, Method, OdeConfig};
use fa_core::rng::Rng;
use fa_core::teacher_student::{
    fmt_f64, make_student, make_teacher, online_train, order_params_from_weights, p_learn_formula,
    p_learn_tail, p_learn_trial, write_trajectory_csv, Algo, FeedbackSigns, OnlineConfig, PLearnConfig, Student,
    Teacher, TeacherHead, TrajectoryRow,
};
use serde::{Deserialize, Serialize};

use crate::config::{Activation, RunOptions};
use crate::error::{invalid, io_err, Result};
use crate::pool::run_indexed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgoName {
    Bp,
    Dfa,
}

impl AlgoName {
    pub fn algo(self) -> Algo {
        match self {
            AlgoName::Bp => Algo::Bp,
            AlgoName::Dfa => Algo::Dfa,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AlgoName::Bp => "bp",
            AlgoName::Dfa => "dfa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadName {
    Ones,
    Gaussian,
}

/// How the DFA feedback vector `F_1` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackDraw {
    Gaussian,
    /// `|N(0, 1)|` entries, all positive
    AbsGaussian,
    Ones,
}

/// Teacher, student and feedback shared by the simulation and ODE commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherStudentConfig {
    #[serde(default = "d::ts_name")]
    pub name: String,
    #[serde(default = "d::two")]
    pub k: usize,
    #[serde(default = "d::two")]
    pub m: usize,
    #[serde(default = "d::n")]
    pub n: usize,
    #[serde(default = "d::erf")]
    pub activation: Activation,
    #[serde(default = "d::eta")]
    pub eta: f64,
    #[serde(default = "d::alpha_max")]
    pub alpha_max: f64,
    /// logging cadence in units of alpha
    #[serde(default = "d::log_alpha")]
    pub log_alpha: f64,
    #[serde(default = "d::sigma0")]
    pub sigma0: f64,
    #[serde(default)]
    pub orthogonal_teacher: bool,
    #[serde(default = "d::ones")]
    pub teacher_head: HeadName,
    #[serde(default = "d::gaussian")]
    pub feedback: FeedbackDraw,
    /// explicit feedback vector, overriding `feedback`
    #[serde(default)]
    pub feedback_values: Option<Vec<f64>>,
    #[serde(default = "d::algos")]
    pub algos: Vec<AlgoName>,
    /// number of independent seeds
    #[serde(default = "d::one")]
    pub seeds: usize,
    #[serde(default = "d::eg_samples")]
    pub eg_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

mod d {
    use super::*;
    pub fn ts_name() -> String {
        "ts".into()
    }
    pub fn ode_name() -> String {
        "ode".into()
    }
    pub fn plearn_name() -> String {
        "plearn".into()
    }
    pub fn two() -> usize {
        2
    }
    pub fn n() -> usize {
        500
    }
    pub fn erf() -> Activation {
        Activation::Erf
    }
    pub fn eta() -> f64 {
        0.1
    }
    pub fn alpha_max() -> f64 {
        1000.0
    }
    pub fn log_alpha() -> f64 {
        10.0
    }
    pub fn sigma0() -> f64 {
        1e-2
    }
    pub fn ones() -> HeadName {
        HeadName::Ones
    }
    pub fn gaussian() -> FeedbackDraw {
        FeedbackDraw::Gaussian
    }
    pub fn algos() -> Vec<AlgoName> {
        vec![AlgoName::Bp, AlgoName::Dfa]
    }
    pub fn one() -> usize {
        1
    }
    pub fn eg_samples() -> usize {
        20_000
    }
    pub fn d_alpha() -> f64 {
        0.01
    }
    pub fn euler() -> MethodName {
        MethodName::Euler
    }
    pub fn ks() -> Vec<usize> {
        vec![2, 3, 4, 5, 6]
    }
    pub fn ms() -> Vec<usize> {
        vec![2, 3, 4]
    }
    pub fn plearn_n() -> usize {
        100
    }
    pub fn plearn_eta() -> f64 {
        0.5
    }
    pub fn plearn_steps() -> u64 {
        50_000
    }
    pub fn threshold() -> f64 {
        1e-3
    }
    pub fn trials() -> usize {
        50
    }
    pub fn three() -> usize {
        3
    }
    pub fn positives() -> Vec<usize> {
        vec![2, 0]
    }
    pub fn ten() -> usize {
        10
    }
}

impl TeacherStudentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 || self.n == 0 {
            return Err(invalid("`k`, `m` and `n` must be positive"));
        }
        if self.algos.is_empty() {
            return Err(invalid("`algos` is empty"));
        }
        if !(self.log_alpha > 0.0) || self.alpha_max < 0.0 {
            return Err(invalid("`log_alpha` must be positive and `alpha_max` non-negative"));
        }
        if let Some(f) = &self.feedback_values {
            if f.len() != self.k {
                return Err(invalid(format!("`feedback_values` has {} entries, k = {}", f.len(), self.k)));
            }
        }
        Ok(())
    }

    fn head(&self) -> TeacherHead {
        match self.teacher_head {
            HeadName::Ones => TeacherHead::Ones,
            HeadName::Gaussian => TeacherHead::Gaussian,
        }
    }

    /// Teacher, initial student and feedback of seed `s`.
    pub fn draw(&self, root: &Rng, s: usize) -> Result<(Teacher, Student, Vector)> {
        let r = root.substream_idx("seed", s as u64);
        let act = self.activation.into();
        let teacher = make_teacher(self.m, self.n, act, self.orthogonal_teacher, &self.head(), &mut r.substream("teacher"))?;
        let student = make_student(self.k, self.n, act, self.sigma0, &mut r.substream("init"));
        let f = match (&self.feedback_values, self.feedback) {
            (Some(v), _) => Vector::from(v.clone()),
            (None, FeedbackDraw::Gaussian) => gaussian_vector(&mut r.substream("feedback"), self.k, 1.0),
            (None, FeedbackDraw::AbsGaussian) => {
                gaussian_vector(&mut r.substream("feedback"), self.k, 1.0).mapv(f64::abs)
            }
            (None, FeedbackDraw::Ones) => Vector::ones(self.k),
        };
        Ok((teacher, student, f))
    }

    fn simulate(&self, root: &Rng, s: usize, algo: AlgoName) -> Result<Vec<TrajectoryRow>> {
        let (teacher, mut student, f) = self.draw(root, s)?;
        let cfg = OnlineConfig {
            algo: algo.algo(),
            eta: self.eta,
            steps: (self.alpha_max * self.n as f64).round() as u64,
            log_every: (self.log_alpha * self.n as f64).round() as u64,
            eg_samples: self.eg_samples,
        };
        let data = root.substream_idx("seed", s as u64).substream("data");
        Ok(online_train(&mut student, &teacher, Some(&f), &cfg, &data)?)
    }
}

fn write_trajectory(dir: &Path, stem: &str, rows: &[TrajectoryRow], k: usize, m: usize) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(format!("{stem}.csv"));
    let f = File::create(&path).map_err(io_err(&path))?;
    write_trajectory_csv(rows, k, m, BufWriter::new(f))?;
    Ok(())
}

/// Final state of one trajectory.
#[derive(Debug, Clone)]
pub struct TrajectorySummary {
    pub stem: String,
    pub algo: AlgoName,
    pub seed_index: usize,
    pub final_eg: f64,
}

/// Online simulations for every `(algo, seed)`; writes `<name>_<algo>_seed<s>.csv`.
pub fn run_teacher_student(cfg: &TeacherStudentConfig, opts: &RunOptions) -> Result<Vec<TrajectorySummary>> {
    cfg.validate()?;
    let root = Rng::new(opts.seed_or(cfg.seed));
    let jobs: Vec<(AlgoName, usize)> = cfg
        .algos
        .iter()
        .flat_map(|&a| (0..cfg.seeds).map(move |s| (a, s)))
        .collect();
    run_indexed(jobs.len(), opts.workers, |j| {
        let (algo, s) = jobs[j];
        let rows = cfg.simulate(&root, s, algo)?;
        let stem = format!("{}_{}_seed{s}", cfg.name, algo.name());
        write_trajectory(&opts.out, &stem, &rows, cfg.k, cfg.m)?;
        Ok(TrajectorySummary {
            stem,
            algo,
            seed_index: s,
            final_eg: rows.last().map_or(f64::NAN, |r| r.eg),
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Euler,
    Rk4,
}

/// Optional simulation run next to the ODE, from the same weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeCmdConfig {
    #[serde(default = "d::ode_name")]
    pub name: String,
    #[serde(default = "d::two")]
    pub k: usize,
    #[serde(default = "d::two")]
    pub m: usize,
    /// input dimension used to draw the initial weights (and to simulate)
    #[serde(default = "d::n")]
    pub n: usize,
    #[serde(default = "d::erf")]
    pub activation: Activation,
    #[serde(default = "d::eta")]
    pub eta: f64,
    #[serde(default = "d::d_alpha")]
    pub d_alpha: f64,
    #[serde(default = "d::alpha_max")]
    pub alpha_max: f64,
    #[serde(default = "d::log_alpha")]
    pub log_alpha: f64,
    #[serde(default = "d::euler")]
    pub method: MethodName,
    #[serde(default = "d::sigma0")]
    pub sigma0: f64,
    #[serde(default)]
    pub orthogonal_teacher: bool,
    #[serde(default = "d::ones")]
    pub teacher_head: HeadName,
    #[serde(default = "d::gaussian")]
    pub feedback: FeedbackDraw,
    #[serde(default)]
    pub feedback_values: Option<Vec<f64>>,
    #[serde(default = "d::algos")]
    pub algos: Vec<AlgoName>,
    #[serde(default = "d::one")]
    pub seeds: usize,
    #[serde(default = "d::eg_samples")]
    pub eg_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub simulation: Option<SimulationSection>,
}

impl OdeCmdConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(sim) = &self.simulation {
            if sim.k.is_some_and(|k| k != self.k) || sim.m.is_some_and(|m| m != self.m) {
                return Err(invalid(format!(
                    "simulation has (k, m) = ({:?}, {:?}) but the ODE has ({}, {})",
                    sim.k, sim.m, self.k, self.m
                )));
            }
        }
        if !(self.d_alpha > 0.0) {
            return Err(invalid("`d_alpha` must be positive"));
        }
        let per_log = self.log_alpha / self.d_alpha;
        if (per_log - per_log.round()).abs() > 1e-9 || per_log < 1.0 {
            return Err(invalid("`log_alpha` must be a multiple of `d_alpha`"));
        }
        self.student_config().validate()
    }

    /// The simulation settings this ODE run mirrors.
    pub fn student_config(&self) -> TeacherStudentConfig {
        TeacherStudentConfig {
            name: self.name.clone(),
            k: self.k,
            m: self.m,
            n: self.n,
            activation: self.activation,
            eta: self.eta,
            alpha_max: self.alpha_max,
            log_alpha: self.log_alpha,
            sigma0: self.sigma0,
            orthogonal_teacher: self.orthogonal_teacher,
            teacher_head: self.teacher_head,
            feedback: self.feedback,
            feedback_values: self.feedback_values.clone(),
            algos: self.algos.clone(),
            seeds: self.seeds,
            eg_samples: self.eg_samples,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OdeSummary {
    pub algo: AlgoName,
    pub seed_index: usize,
    pub ode: Vec<TrajectoryRow>,
    pub sim: Option<Vec<TrajectoryRow>>,
    /// largest `|eg_sim - eg_ode|` over the common grid
    pub max_deviation: Option<f64>,
}

/// Integrates the ODEs from the order parameters of the drawn weights and,
/// with a `[simulation]` table, simulates the same network. Writes
/// `<name>_ode_<algo>_seed<s>.csv`, `<name>_sim_...` and an overlay
/// `<name>_overlay_...` with `alpha, eg_ode, eg_sim, abs_diff`.
pub fn run_ode(cfg: &OdeCmdConfig, opts: &RunOptions) -> Result<Vec<OdeSummary>> {
    cfg.validate()?;
    let shared = cfg.student_config();
    let root = Rng::new(opts.seed_or(cfg.seed));
    let jobs: Vec<(AlgoName, usize)> = cfg
        .algos
        .iter()
        .flat_map(|&a| (0..cfg.seeds).map(move |s| (a, s)))
        .collect();
    run_indexed(jobs.len(), opts.workers, |j| {
        let (algo, s) = jobs[j];
        let (teacher, student, f) = shared.draw(&root, s)?;
        let op0 = order_params_from_weights(&student, &teacher)?;
        let mode = match algo {
            AlgoName::Bp => FeedbackMode::Bp,
            AlgoName::Dfa => FeedbackMode::Dfa(f),
        };
        let oc = OdeConfig {
            eta: cfg.eta,
            activation: cfg.activation.into(),
            d_alpha: cfg.d_alpha,
            alpha_max: cfg.alpha_max,
            method: match cfg.method {
                MethodName::Euler => Method::Euler,
                MethodName::Rk4 => Method::Rk4,
            },
            log_every: (cfg.log_alpha / cfg.d_alpha).round() as usize,
        };
        let ode = integrate(&op0, &mode, &oc)?;
        let tag = format!("{}_seed{s}", algo.name());
        write_trajectory(&opts.out, &format!("{}_ode_{tag}", cfg.name), &ode, cfg.k, cfg.m)?;
        let (sim, max_deviation) = match &cfg.simulation {
            None => (None, None),
            Some(_) => {
                let sim = shared.simulate(&root, s, algo)?;
                write_trajectory(&opts.out, &format!("{}_sim_{tag}", cfg.name), &sim, cfg.k, cfg.m)?;
                let dev = write_overlay(&opts.out, &format!("{}_overlay_{tag}", cfg.name), &ode, &sim)?;
                (Some(sim), Some(dev))
            }
        };
        Ok(OdeSummary {
            algo,
            seed_index: s,
            ode,
            sim,
            max_deviation,
        })
    })
}

fn write_overlay(dir: &Path, stem: &str, ode: &[TrajectoryRow], sim: &[TrajectoryRow]) -> Result<f64> {
    if ode.len() != sim.len() {
        return Err(invalid(format!("ODE logged {} points, simulation {}", ode.len(), sim.len())));
    }
    let path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["alpha", "eg_ode", "eg_sim", "abs_diff"])?;
    let mut worst: f64 = 0.0;
    for (o, s) in ode.iter().zip(sim) {
        if (o.alpha - s.alpha).abs() > 1e-6 * o.alpha.max(1.0) {
            return Err(invalid(format!("grids differ at alpha {} vs {}", o.alpha, s.alpha)));
        }
        let d = (o.eg - s.eg).abs();
        worst = worst.max(d);
        w.write_record([fmt_f64(o.alpha), fmt_f64(o.eg), fmt_f64(s.eg), fmt_f64(d)])?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(worst)
}

/// Runs with a forced number of positive feedback entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcedSection {
    #[serde(default = "d::three")]
    pub k: usize,
    #[serde(default = "d::two")]
    pub m: usize,
    #[serde(default = "d::positives")]
    pub positives: Vec<usize>,
    #[serde(default = "d::ten")]
    pub trials: usize,
    /// step budget; defaults to the table's
    #[serde(default)]
    pub steps: Option<u64>,
    /// input dimension; defaults to the table's
    #[serde(default)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PLearnCmdConfig {
    #[serde(default = "d::plearn_name")]
    pub name: String,
    #[serde(default = "d::ks")]
    pub ks: Vec<usize>,
    #[serde(default = "d::ms")]
    pub ms: Vec<usize>,
    #[serde(default = "d::plearn_n")]
    pub n: usize,
    #[serde(default = "d::plearn_eta")]
    pub eta: f64,
    #[serde(default = "d::plearn_steps")]
    pub steps: u64,
    #[serde(default = "d::sigma0")]
    pub sigma0: f64,
    #[serde(default = "d::threshold")]
    pub threshold: f64,
    #[serde(default = "d::trials")]
    pub trials: usize,
    #[serde(default = "d::eg_samples")]
    pub eg_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub forced: Option<ForcedSection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PLearnRow {
    pub k: usize,
    pub m: usize,
    /// the sum up to `M`; undefined for `K < M`
    pub formula: Option<f64>,
    /// the sum from `M` up
    pub tail: f64,
    pub empirical: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForcedRow {
    pub positives: usize,
    pub trial: usize,
    pub final_eg: f64,
    pub learned: bool,
}

fn trial_config(cfg: &PLearnCmdConfig, k: usize, m: usize, n: usize, steps: u64, signs: FeedbackSigns) -> PLearnConfig {
    PLearnConfig {
        k,
        m,
        n,
        eta: cfg.eta,
        steps,
        sigma0: cfg.sigma0,
        threshold: cfg.threshold,
        eg_samples: cfg.eg_samples,
        signs,
    }
}

/// The P(learn) table over `ks x ms` and, optionally, forced-sign runs.
/// Writes `<name>_table.csv` and `<name>_forced.csv`.
pub fn run_plearn(cfg: &PLearnCmdConfig, opts: &RunOptions) -> Result<(Vec<PLearnRow>, Vec<ForcedRow>)> {
    if cfg.ks.is_empty() || cfg.ms.is_empty() || cfg.trials == 0 {
        return Err(invalid("`ks`, `ms` and `trials` must be non-empty"));
    }
    let root = Rng::new(opts.seed_or(cfg.seed));
    let cells: Vec<(usize, usize)> = cfg.ks.iter().flat_map(|&k| cfg.ms.iter().map(move |&m| (k, m))).collect();
    let trials = cfg.trials;
    let learned = run_indexed(cells.len() * trials, opts.workers, |j| {
        let (k, m) = cells[j / trials];
        let tc = trial_config(cfg, k, m, cfg.n, cfg.steps, FeedbackSigns::Random);
        let cell_rng = root.substream_idx("cell", (k * 1000 + m) as u64);
        Ok(p_learn_trial(&tc, &cell_rng, (j % trials) as u64)?.learned)
    })?;
    let mut table = Vec::new();
    for (c, &(k, m)) in cells.iter().enumerate() {
        let hits = learned[c * trials..(c + 1) * trials].iter().filter(|&&l| l).count();
        table.push(PLearnRow {
            k,
            m,
            formula: p_learn_formula(k as u32, m as u32).ok(),
            tail: p_learn_tail(k as u32, m as u32)?,
            empirical: hits as f64 / trials as f64,
        });
    }
    fs::create_dir_all(&opts.out).map_err(io_err(&opts.out))?;
    let path = opts.out.join(format!("{}_table.csv", cfg.name));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["k", "m", "formula", "tail", "empirical"])?;
    for r in &table {
        w.write_record([
            r.k.to_string(),
            r.m.to_string(),
            fmt_f64(r.formula.unwrap_or(f64::NAN)),
            fmt_f64(r.tail),
            fmt_f64(r.empirical),
        ])?;
    }
    w.flush().map_err(io_err(&path))?;

    let mut forced = Vec::new();
    if let Some(fs_) = &cfg.forced {
        let n = fs_.positives.len() * fs_.trials;
        forced = run_indexed(n, opts.workers, |j| {
            let positives = fs_.positives[j / fs_.trials];
            let trial = j % fs_.trials;
            if positives > fs_.k {
                return Err(invalid(format!("{positives} positive entries out of k = {}", fs_.k)));
            }
            let tc = trial_config(
                cfg,
                fs_.k,
                fs_.m,
                fs_.n.unwrap_or(cfg.n),
                fs_.steps.unwrap_or(cfg.steps),
                FeedbackSigns::Positive(positives),
            );
            let t = p_learn_trial(&tc, &root.substream_idx("forced", positives as u64), trial as u64)?;
            Ok(ForcedRow {
                positives,
                trial,
                final_eg: t.final_eg,
                learned: t.learned,
            })
        })?;
        let path = opts.out.join(format!("{}_forced.csv", cfg.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["positives", "trial", "final_eg", "learned"])?;
        for r in &forced {
            w.write_record([r.positives.to_string(), r.trial.to_string(), fmt_f64(r.final_eg), r.learned.to_string()])?;
        }
        w.flush().map_err(io_err(&path))?;
    }
    Ok((table, forced))
}

/// Reads the `alpha` and `eg` columns of a trajectory CSV.
pub fn read_eg_column(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| rec.get(i).and_then(|v| v.parse::<f64>().ok()).unwrap_or(f64::NAN);
        out.push((parse(0), parse(1)));
    }
    Ok(out)
}
