//! Online learning of a two-layer teacher by a two-layer student.
//!
//! Both networks compute `sum_k W_2^k g(W_1^k x / sqrt N)` on standard normal
//! inputs `x` in dimension `N`. Every step draws a fresh sample. The first
//! layer learns at rate `eta`, the second at `eta / N`, and time is measured
//! in `alpha = steps / N`.

use std::io::Write;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::linalg::{cosine, gaussian_matrix, gaussian_vector, left_orthogonal, Matrix, Vector};
use crate::network::{ActivationKind, MlpParams, OutputMap};
use crate::ode::{gaussian_expectation, Estimate};
use crate::rng::Rng;

/// The macroscopic state of a student-teacher pair.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderParams {
    /// `W_1 W_1^T / N`, `K x K`
    pub q: Matrix,
    /// `W_1 W~_1^T / N`, `K x M`
    pub r: Matrix,
    /// `W~_1 W~_1^T / N`, `M x M`
    pub t: Matrix,
    pub w2: Vector,
    pub w2_teacher: Vector,
}

impl OrderParams {
    pub fn k(&self) -> usize {
        self.w2.len()
    }

    pub fn m(&self) -> usize {
        self.w2_teacher.len()
    }

    /// Joint covariance of `(lambda_1..lambda_K, nu_1..nu_M)`.
    pub fn field_covariance(&self) -> Matrix {
        let (k, m) = (self.k(), self.m());
        let mut c = Matrix::zeros((k + m, k + m));
        c.slice_mut(ndarray::s![..k, ..k]).assign(&self.q);
        c.slice_mut(ndarray::s![..k, k..]).assign(&self.r);
        c.slice_mut(ndarray::s![k.., ..k]).assign(&self.r.t());
        c.slice_mut(ndarray::s![k.., k..]).assign(&self.t);
        c
    }
}

/// A committee machine with `rows(w1)` hidden units.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayer {
    /// `K x N`
    pub w1: Matrix,
    pub w2: Vector,
    pub activation: ActivationKind,
}

impl TwoLayer {
    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    /// Output on a raw input `x` (scaling by `1 / sqrt N` is applied here).
    pub fn output(&self, x: &Vector) -> f64 {
        let s = (self.input_dim() as f64).sqrt();
        let g = self.activation;
        self.w1
            .dot(x)
            .iter()
            .zip(&self.w2)
            .map(|(l, w)| w * g.apply(l / s))
            .sum()
    }

    /// The same network as an [`MlpParams`], to be fed `x / sqrt N`.
    pub fn to_mlp(&self) -> MlpParams {
        let w2 = self.w2.clone().insert_axis(Axis(0));
        MlpParams::from_weights(vec![self.w1.clone(), w2], self.activation, OutputMap::Identity)
            .expect("consistent shapes")
    }
}

pub type Teacher = TwoLayer;
pub type Student = TwoLayer;

/// How the teacher's second layer is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum TeacherHead {
    Ones,
    Gaussian,
    Given(Vec<f64>),
}

/// Teacher with `m` hidden units on inputs of dimension `n`. With
/// `orthogonal`, the rows of `W~_1` are orthonormalised and rescaled by
/// `sqrt N` so that `T = I` exactly.
pub fn make_teacher(
    m: usize,
    n: usize,
    activation: ActivationKind,
    orthogonal: bool,
    head: &TeacherHead,
    rng: &mut Rng,
) -> Result<Teacher> {
    if orthogonal && m > n {
        return Err(Error::InvalidArgument(format!(
            "{m} orthogonal rows in dimension {n}"
        )));
    }
    let w1 = if orthogonal {
        left_orthogonal(rng, n, m).t().to_owned() * (n as f64).sqrt()
    } else {
        gaussian_matrix(rng, m, n, 1.0)
    };
    let w2 = match head {
        TeacherHead::Ones => Vector::ones(m),
        TeacherHead::Gaussian => gaussian_vector(rng, m, 1.0),
        TeacherHead::Given(v) => {
            if v.len() != m {
                return Err(Error::Shape(format!("{} head weights for M = {m}", v.len())));
            }
            Vector::from(v.clone())
        }
    };
    Ok(TwoLayer { w1, w2, activation })
}

/// Student with entries i.i.d. `N(0, sigma0^2)` in both layers.
pub fn make_student(k: usize, n: usize, activation: ActivationKind, sigma0: f64, rng: &mut Rng) -> Student {
    TwoLayer {
        w1: gaussian_matrix(rng, k, n, sigma0),
        w2: gaussian_vector(rng, k, sigma0),
        activation,
    }
}

pub fn order_params_from_weights(student: &Student, teacher: &Teacher) -> Result<OrderParams> {
    let n = student.input_dim();
    if teacher.input_dim() != n {
        return Err(Error::Shape(format!(
            "student input dimension {n}, teacher {}",
            teacher.input_dim()
        )));
    }
    let nf = n as f64;
    Ok(OrderParams {
        q: student.w1.dot(&student.w1.t()) / nf,
        r: student.w1.dot(&teacher.w1.t()) / nf,
        t: teacher.w1.dot(&teacher.w1.t()) / nf,
        w2: student.w2.clone(),
        w2_teacher: teacher.w2.clone(),
    })
}

/// Generalisation error from the order parameters (erf or linear).
pub fn eg_from_order_params(op: &OrderParams, activation: ActivationKind) -> Result<f64> {
    let i2 = |c11: f64, c12: f64, c22: f64| -> Result<f64> {
        match activation {
            ActivationKind::Linear => Ok(c12),
            ActivationKind::ScaledErf => {
                let s = c12 / ((1.0 + c11) * (1.0 + c22)).sqrt();
                Ok(2.0 / std::f64::consts::PI * s.clamp(-1.0, 1.0).asin())
            }
            other => Err(Error::UnsupportedActivation(other.name())),
        }
    };
    let (k, m) = (op.k(), op.m());
    let mut eg = 0.0;
    for a in 0..k {
        for b in 0..k {
            eg += op.w2[a] * op.w2[b] * i2(op.q[[a, a]], op.q[[a, b]], op.q[[b, b]])?;
        }
        for n in 0..m {
            eg -= 2.0 * op.w2[a] * op.w2_teacher[n] * i2(op.q[[a, a]], op.r[[a, n]], op.t[[n, n]])?;
        }
    }
    for n in 0..m {
        for p in 0..m {
            eg += op.w2_teacher[n] * op.w2_teacher[p] * i2(op.t[[n, n]], op.t[[n, p]], op.t[[p, p]])?;
        }
    }
    Ok(0.5 * eg)
}

/// Monte-Carlo generalisation error for any activation.
///
/// The pre-activations `(W_1 x, W~_1 x) / sqrt N` of a standard normal input
/// are exactly Gaussian with the covariance given by the order parameters, so
/// the fields are sampled directly instead of `N`-dimensional inputs.
pub fn eg_monte_carlo(student: &Student, teacher: &Teacher, samples: usize, rng: &mut Rng) -> Result<Estimate> {
    let op = order_params_from_weights(student, teacher)?;
    let (k, m) = (op.k(), op.m());
    let cov = op.field_covariance();
    let (gs, gt) = (student.activation, teacher.activation);
    gaussian_expectation(&cov, samples, rng, |u| {
        let yhat: f64 = (0..k).map(|a| op.w2[a] * gs.apply(u[a])).sum();
        let y: f64 = (0..m).map(|n| op.w2_teacher[n] * gt.apply(u[k + n])).sum();
        0.5 * (yhat - y).powi(2)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Bp,
    Dfa,
}

/// One logged point of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub alpha: f64,
    pub eg: f64,
    pub q: Matrix,
    pub r: Matrix,
    pub w2: Vector,
    pub cos_w2_f1: Option<f64>,
}

/// Settings of an online run.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineConfig {
    pub algo: Algo,
    pub eta: f64,
    pub steps: u64,
    /// log every this many steps; the initial and final states are always logged
    pub log_every: u64,
    /// Monte-Carlo samples for `eg` when no closed form exists (ReLU, tanh)
    pub eg_samples: usize,
}

fn snapshot(
    student: &Student,
    teacher: &Teacher,
    feedback: Option<&Vector>,
    alpha: f64,
    eg_samples: usize,
    rng: &mut Rng,
) -> Result<TrajectoryRow> {
    let op = order_params_from_weights(student, teacher)?;
    let eg = match (student.activation, teacher.activation) {
        (a, b) if a == b && matches!(a, ActivationKind::ScaledErf | ActivationKind::Linear) => {
            eg_from_order_params(&op, a)?
        }
        _ => eg_monte_carlo(student, teacher, eg_samples, rng)?.mean,
    };
    let cos_w2_f1 = feedback.and_then(|f| {
        cosine(
            student.w2.as_slice().expect("contiguous"),
            f.as_slice().expect("contiguous"),
        )
        .ok()
    });
    Ok(TrajectoryRow {
        alpha,
        eg,
        q: op.q,
        r: op.r,
        w2: op.w2,
        cos_w2_f1,
    })
}

/// Online SGD on fresh samples. DFA uses `feedback` as `F_1`; BP ignores it
/// for the update but still reports `cos(W_2, F_1)` when it is given.
///
/// `rng` supplies the inputs and, for Monte-Carlo `eg`, the evaluation draws
/// (on a separate substream).
pub fn online_train(
    student: &mut Student,
    teacher: &Teacher,
    feedback: Option<&Vector>,
    cfg: &OnlineConfig,
    rng: &Rng,
) -> Result<Vec<TrajectoryRow>> {
    let n = student.input_dim();
    let k = student.hidden();
    if teacher.input_dim() != n {
        return Err(Error::Shape("student and teacher input dimensions differ".into()));
    }
    let f = match (cfg.algo, feedback) {
        (Algo::Dfa, Some(f)) if f.len() == k => Some(f),
        (Algo::Dfa, Some(f)) => {
            return Err(Error::Shape(format!("feedback has {} entries, K = {k}", f.len())))
        }
        (Algo::Dfa, None) => return Err(Error::InvalidArgument("DFA needs a feedback vector".into())),
        (Algo::Bp, _) => None,
    };
    let mut data = rng.substream("samples");
    let mut eval = rng.substream("eval");
    let nf = n as f64;
    let inv_sqrt_n = 1.0 / nf.sqrt();
    let eta_w2 = cfg.eta / nf;
    let (gs, gt) = (student.activation, teacher.activation);
    let m = teacher.hidden();

    let mut rows = vec![snapshot(student, teacher, feedback, 0.0, cfg.eg_samples, &mut eval)?];
    let mut x = vec![0.0; n];
    let mut lam = vec![0.0; k];
    let mut delta = vec![0.0; k];
    let mut gl = vec![0.0; k];
    for step in 1..=cfg.steps {
        for xi in x.iter_mut() {
            *xi = data.normal();
        }
        let mut yhat = 0.0;
        for a in 0..k {
            let row = student.w1.row(a);
            let l = dot(row.as_slice().expect("contiguous"), &x) * inv_sqrt_n;
            lam[a] = l;
            gl[a] = gs.apply(l);
            yhat += student.w2[a] * gl[a];
        }
        let mut y = 0.0;
        for b in 0..m {
            let row = teacher.w1.row(b);
            let nu = dot(row.as_slice().expect("contiguous"), &x) * inv_sqrt_n;
            y += teacher.w2[b] * gt.apply(nu);
        }
        let e = yhat - y;
        for a in 0..k {
            let back = match f {
                Some(f) => f[a],
                None => student.w2[a],
            };
            delta[a] = back * e * gs.derivative(lam[a]);
        }
        for a in 0..k {
            student.w2[a] -= eta_w2 * e * gl[a];
            let c = -cfg.eta * delta[a] * inv_sqrt_n;
            if c != 0.0 {
                let mut row = student.w1.row_mut(a);
                for (w, xi) in row.as_slice_mut().expect("contiguous").iter_mut().zip(&x) {
                    *w += c * xi;
                }
            }
        }
        if step == cfg.steps || (cfg.log_every > 0 && step % cfg.log_every == 0) {
            let alpha = step as f64 / nf;
            rows.push(snapshot(student, teacher, feedback, alpha, cfg.eg_samples, &mut eval)?);
        }
    }
    Ok(rows)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Column names for a trajectory with `K` student and `M` teacher units.
pub fn trajectory_header(k: usize, m: usize) -> Vec<String> {
    let mut h = vec!["alpha".to_string(), "eg".to_string()];
    for a in 0..k {
        for b in a..k {
            h.push(format!("q_{}{}", a + 1, b + 1));
        }
    }
    for a in 0..k {
        for b in 0..m {
            h.push(format!("r_{}{}", a + 1, b + 1));
        }
    }
    for a in 0..k {
        h.push(format!("w2_{}", a + 1));
    }
    h.push("cos_w2_f1".to_string());
    h
}

/// Formats a float so that it reads back bit-for-bit.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:e}")
    }
}

/// Writes `alpha, eg, q_kl.., r_km.., w2_k.., cos_w2_f1` rows as CSV.
pub fn write_trajectory_csv<W: Write>(rows: &[TrajectoryRow], k: usize, m: usize, mut w: W) -> Result<()> {
    writeln!(w, "{}", trajectory_header(k, m).join(","))?;
    for row in rows {
        let mut cells = vec![fmt_f64(row.alpha), fmt_f64(row.eg)];
        for a in 0..k {
            for b in a..k {
                cells.push(fmt_f64(row.q[[a, b]]));
            }
        }
        cells.extend(row.r.iter().map(|v| fmt_f64(*v)));
        cells.extend(row.w2.iter().map(|v| fmt_f64(*v)));
        cells.push(fmt_f64(row.cos_w2_f1.unwrap_or(f64::NAN)));
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// `2^-K sum_{k=0}^{M} C(K, k)`, evaluated exactly as a ratio of integers.
pub fn p_learn_formula(k: u32, m: u32) -> Result<f64> {
    if k < m {
        return Err(Error::InvalidArgument(format!("K = {k} < M = {m}")));
    }
    if k > 62 {
        return Err(Error::InvalidArgument("K too large".into()));
    }
    let mut c: u64 = 1;
    let mut sum: u64 = 0;
    for i in 0..=m {
        sum += c;
        c = c * u64::from(k - i) / u64::from(i + 1);
    }
    Ok(sum as f64 / (1u64 << k) as f64)
}

/// `2^-K sum_{k=M}^{K} C(K, k)`: the chance that at least `M` of `K`
/// i.i.d. symmetric feedback entries are positive.
pub fn p_learn_tail(k: u32, m: u32) -> Result<f64> {
    if k > 62 {
        return Err(Error::InvalidArgument("K too large".into()));
    }
    let mut c: u64 = 1;
    let mut sum: u64 = 0;
    for i in 0..=k {
        if i >= m {
            sum += c;
        }
        c = c * u64::from(k - i) / u64::from(i + 1);
    }
    Ok(sum as f64 / (1u64 << k) as f64)
}

/// Sign pattern of a feedback vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackSigns {
    /// i.i.d. standard normal entries
    Random,
    /// `|N(0,1)|` magnitudes with exactly this many positive entries at
    /// random positions
    Positive(usize),
}

pub fn draw_feedback(k: usize, signs: FeedbackSigns, rng: &mut Rng) -> Result<Vector> {
    match signs {
        FeedbackSigns::Random => Ok(gaussian_vector(rng, k, 1.0)),
        FeedbackSigns::Positive(p) => {
            if p > k {
                return Err(Error::InvalidArgument(format!("{p} positive entries out of {k}")));
            }
            let order = rng.permutation(k);
            let mut f = Vector::zeros(k);
            for (i, &pos) in order.iter().enumerate() {
                let mag = rng.normal().abs().max(1e-3);
                f[pos] = if i < p { mag } else { -mag };
            }
            Ok(f)
        }
    }
}

/// Settings of a P(learn) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct PLearnConfig {
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub eta: f64,
    pub steps: u64,
    pub sigma0: f64,
    pub threshold: f64,
    pub eg_samples: usize,
    pub signs: FeedbackSigns,
}

/// Outcome of one P(learn) trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub feedback: Vector,
    pub final_eg: f64,
    pub learned: bool,
}

/// One DFA trial with a ReLU student and ReLU teacher (`W~_2 = 1`); trial
/// `idx` draws teacher, student, feedback and data from its own substreams.
pub fn p_learn_trial(cfg: &PLearnConfig, rng: &Rng, idx: u64) -> Result<Trial> {
    let root = rng.substream_idx("trial", idx);
    let teacher = make_teacher(
        cfg.m,
        cfg.n,
        ActivationKind::Relu,
        false,
        &TeacherHead::Ones,
        &mut root.substream("teacher"),
    )?;
    let mut student = make_student(cfg.k, cfg.n, ActivationKind::Relu, cfg.sigma0, &mut root.substream("init"));
    let f = draw_feedback(cfg.k, cfg.signs, &mut root.substream("feedback"))?;
    let oc = OnlineConfig {
        algo: Algo::Dfa,
        eta: cfg.eta,
        steps: cfg.steps,
        log_every: 0,
        eg_samples: cfg.eg_samples,
    };
    let rows = online_train(&mut student, &teacher, Some(&f), &oc, &root.substream("data"))?;
    let final_eg = rows.last().expect("at least the initial row").eg;
    Ok(Trial {
        feedback: f,
        final_eg,
        learned: final_eg < cfg.threshold,
    })
}

/// Fraction of `trials` independent runs ending below the threshold.
pub fn p_learn_empirical(cfg: &PLearnConfig, trials: u64, rng: &Rng) -> Result<f64> {
    let mut hits = 0u64;
    for i in 0..trials {
        if p_learn_trial(cfg, rng, i)?.learned {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

/// `x / sqrt N` as a single-column batch, for feeding [`TwoLayer::to_mlp`].
pub fn scaled_column(x: &Vector) -> Array2<f64> {
    let s = (x.len() as f64).sqrt();
    (x / s).insert_axis(Axis(1))
}
