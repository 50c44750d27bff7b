//! Order-parameter dynamics of a two-layer student learning a two-layer
//! teacher online, in the limit of large input dimension.
//!
//! The state is `(Q, R, W_2)` with `T` and the teacher's second layer fixed.
//! The equations of motion need Gaussian averages of the form
//!
//! ```text
//! I2(a, b)       = E[g(a) g(b)]
//! I3(a, b, c)    = E[g'(a) b g(c)]
//! I4(a, b, c, d) = E[g'(a) g'(b) g(c) g(d)]
//! ```
//!
//! over jointly Gaussian pre-activations. For `g(x) = erf(x / sqrt 2)` they
//! have closed forms; for the linear activation they reduce to covariances.
//!
//! The module also holds the early-time expansion, the plateau fixed point of
//! the symmetric phase and the closed forms for DRTP in a linear network.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_psd, cosine, identity, Matrix, Vector};
use crate::network::ActivationKind;
use crate::rng::Rng;
use crate::teacher_student::{eg_from_order_params, OrderParams, TrajectoryRow};

fn check_psd(c: &[f64], n: usize) -> Result<()> {
    let m = Array2::from_shape_vec((n, n), c.to_vec()).expect("n x n entries");
    cholesky_psd(m.view()).map(|_| ())
}

fn supported(act: ActivationKind) -> Result<()> {
    match act {
        ActivationKind::ScaledErf | ActivationKind::Linear => Ok(()),
        other => Err(Error::UnsupportedActivation(other.name())),
    }
}

fn i2_raw(act: ActivationKind, c11: f64, c12: f64, c22: f64) -> f64 {
    match act {
        ActivationKind::Linear => c12,
        _ => {
            let s = c12 / ((1.0 + c11) * (1.0 + c22)).sqrt();
            2.0 / PI * s.clamp(-1.0, 1.0).asin()
        }
    }
}

/// `c` is the row-major 3x3 covariance of `(a, b, c)`.
fn i3_raw(act: ActivationKind, c: &[f64; 9]) -> f64 {
    let (c11, c12, c13) = (c[0], c[1], c[2]);
    let (c23, c33) = (c[5], c[8]);
    match act {
        ActivationKind::Linear => c23,
        _ => {
            let lambda3 = (1.0 + c11) * (1.0 + c33) - c13 * c13;
            2.0 / PI / lambda3.sqrt() * (c23 * (1.0 + c11) - c12 * c13) / (1.0 + c11)
        }
    }
}

/// `c` is the row-major 4x4 covariance of `(a, b, c, d)`.
fn i4_raw(act: ActivationKind, c: &[f64; 16]) -> f64 {
    let at = |i: usize, j: usize| c[4 * (i - 1) + (j - 1)];
    if act == ActivationKind::Linear {
        return at(3, 4);
    }
    let (c11, c12, c13, c14) = (at(1, 1), at(1, 2), at(1, 3), at(1, 4));
    let (c22, c23, c24) = (at(2, 2), at(2, 3), at(2, 4));
    let (c33, c34, c44) = (at(3, 3), at(3, 4), at(4, 4));
    let lambda4 = (1.0 + c11) * (1.0 + c22) - c12 * c12;
    let lambda0 = lambda4 * c34 - c23 * c24 * (1.0 + c11) - c13 * c14 * (1.0 + c22)
        + c12 * c13 * c24
        + c12 * c14 * c23;
    let lambda1 = lambda4 * (1.0 + c33) - c23 * c23 * (1.0 + c11) - c13 * c13 * (1.0 + c22)
        + 2.0 * c12 * c13 * c23;
    let lambda2 = lambda4 * (1.0 + c44) - c24 * c24 * (1.0 + c11) - c14 * c14 * (1.0 + c22)
        + 2.0 * c12 * c14 * c24;
    let s = (lambda0 / (lambda1 * lambda2).sqrt()).clamp(-1.0, 1.0);
    4.0 / (PI * PI) / lambda4.sqrt() * s.asin()
}

/// `E[g(u) g(v)]` for `g(x) = erf(x / sqrt 2)`.
pub fn i2(c11: f64, c12: f64, c22: f64) -> Result<f64> {
    check_psd(&[c11, c12, c12, c22], 2)?;
    Ok(i2_raw(ActivationKind::ScaledErf, c11, c12, c22))
}

/// `E[g'(u) v g(w)]`; `cov` is the 3x3 covariance of `(u, v, w)`.
pub fn i3(cov: &[[f64; 3]; 3]) -> Result<f64> {
    let flat: Vec<f64> = cov.iter().flatten().copied().collect();
    check_psd(&flat, 3)?;
    Ok(i3_raw(ActivationKind::ScaledErf, &flat.try_into().expect("9 entries")))
}

/// `E[g'(u) g'(v) g(w) g(z)]`; `cov` is the 4x4 covariance of `(u, v, w, z)`.
pub fn i4(cov: &[[f64; 4]; 4]) -> Result<f64> {
    let flat: Vec<f64> = cov.iter().flatten().copied().collect();
    check_psd(&flat, 4)?;
    Ok(i4_raw(ActivationKind::ScaledErf, &flat.try_into().expect("16 entries")))
}

/// A Monte-Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

/// `E[f(z)]` for `z ~ N(0, cov)` by plain Monte Carlo.
pub fn gaussian_expectation(
    cov: &Matrix,
    samples: usize,
    rng: &mut Rng,
    mut f: impl FnMut(&[f64]) -> f64,
) -> Result<Estimate> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let l = cholesky_psd(cov.view())?;
    let n = cov.nrows();
    let mut z = vec![0.0; n];
    let mut u = vec![0.0; n];
    // Welford
    let (mut mean, mut m2) = (0.0, 0.0);
    for s in 0..samples {
        for zi in z.iter_mut() {
            *zi = rng.normal();
        }
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += l[[i, j]] * z[j];
            }
            u[i] = acc;
        }
        let v = f(&u);
        let d = v - mean;
        mean += d / (s + 1) as f64;
        m2 += d * (v - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok(Estimate {
        mean,
        std_err: (var / samples as f64).sqrt(),
    })
}

/// Where the ODE takes its first-layer feedback from.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedbackMode {
    /// fixed feedback vector `F_1` (DFA, equivalently FA at two layers)
    Dfa(Vector),
    /// `F_1 -> W_2`, which turns the equations into those of BP
    Bp,
}

/// `dQ/dalpha`, `dR/dalpha`, `dW_2/dalpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub dq: Matrix,
    pub dr: Matrix,
    pub dw2: Vector,
}

/// Covariance lookup over the fields `(lambda_1..lambda_K, nu_1..nu_M)`.
struct Fields<'a> {
    op: &'a OrderParams,
    k: usize,
}

impl Fields<'_> {
    fn cov(&self, i: usize, j: usize) -> f64 {
        let k = self.k;
        match (i < k, j < k) {
            (true, true) => self.op.q[[i, j]],
            (true, false) => self.op.r[[i, j - k]],
            (false, true) => self.op.r[[j, i - k]],
            (false, false) => self.op.t[[i - k, j - k]],
        }
    }

    fn cov3(&self, a: usize, b: usize, c: usize) -> [f64; 9] {
        let ids = [a, b, c];
        let mut out = [0.0; 9];
        for (p, &i) in ids.iter().enumerate() {
            for (q, &j) in ids.iter().enumerate() {
                out[3 * p + q] = self.cov(i, j);
            }
        }
        out
    }

    fn cov4(&self, a: usize, b: usize, c: usize, d: usize) -> [f64; 16] {
        let ids = [a, b, c, d];
        let mut out = [0.0; 16];
        for (p, &i) in ids.iter().enumerate() {
            for (q, &j) in ids.iter().enumerate() {
                out[4 * p + q] = self.cov(i, j);
            }
        }
        out
    }
}

/// Right-hand side of the equations of motion.
pub fn eom_rhs(
    op: &OrderParams,
    mode: &FeedbackMode,
    eta: f64,
    act: ActivationKind,
) -> Result<Derivatives> {
    supported(act)?;
    let k = op.k();
    let m = op.m();
    if let FeedbackMode::Dfa(f) = mode {
        if f.len() != k {
            return Err(Error::Shape(format!("feedback has {} entries, K = {k}", f.len())));
        }
    }
    let fb = match mode {
        FeedbackMode::Dfa(f) => f.clone(),
        FeedbackMode::Bp => op.w2.clone(),
    };
    let fields = Fields { op, k };
    // signed output weights over all K + M fields: e = sum_j v_j g(field_j)
    let v: Vec<f64> = op
        .w2
        .iter()
        .copied()
        .chain(op.w2_teacher.iter().map(|w| -w))
        .collect();
    let n = k + m;

    // E[g'(a) b e]
    let e_i3 = |a: usize, b: usize| -> f64 {
        (0..n)
            .map(|j| v[j] * i3_raw(act, &fields.cov3(a, b, j)))
            .sum()
    };
    // E[g'(a) g'(b) e^2]
    let e_i4 = |a: usize, b: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += v[i] * v[j] * i4_raw(act, &fields.cov4(a, b, i, j));
            }
        }
        s
    };

    let mut dr = Matrix::zeros((k, m));
    for a in 0..k {
        for mm in 0..m {
            dr[[a, mm]] = -eta * fb[a] * e_i3(a, k + mm);
        }
    }
    let mut dq = Matrix::zeros((k, k));
    for a in 0..k {
        for b in a..k {
            let val = -eta * fb[a] * e_i3(a, b) - eta * fb[b] * e_i3(b, a)
                + eta * eta * fb[a] * fb[b] * e_i4(a, b);
            dq[[a, b]] = val;
            dq[[b, a]] = val;
        }
    }
    let dw2 = Vector::from_shape_fn(k, |a| {
        let s: f64 = (0..n)
            .map(|j| v[j] * i2_raw(act, fields.cov(a, a), fields.cov(a, j), fields.cov(j, j)))
            .sum();
        -eta * s
    });
    Ok(Derivatives { dq, dr, dw2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Euler,
    Rk4,
}

/// Integration settings.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeConfig {
    pub eta: f64,
    pub activation: ActivationKind,
    pub d_alpha: f64,
    pub alpha_max: f64,
    pub method: Method,
    /// record every this many integration steps (0 = only the endpoints)
    pub log_every: usize,
}

/// Magnitude beyond which an integration is declared divergent.
pub const DIVERGENCE_BOUND: f64 = 1e10;

fn advance(op: &OrderParams, d: &Derivatives, h: f64) -> OrderParams {
    let mut out = op.clone();
    out.q.scaled_add(h, &d.dq);
    out.r.scaled_add(h, &d.dr);
    out.w2.scaled_add(h, &d.dw2);
    out
}

fn check_finite(op: &OrderParams, alpha: f64) -> Result<()> {
    let bad = op
        .q
        .iter()
        .chain(op.r.iter())
        .chain(op.w2.iter())
        .find(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND);
    match bad {
        Some(v) => Err(Error::Diverged {
            alpha,
            detail: format!("order parameter reached {v:e}"),
        }),
        None => Ok(()),
    }
}

fn row(op: &OrderParams, alpha: f64, mode: &FeedbackMode, act: ActivationKind) -> Result<TrajectoryRow> {
    let cos_w2_f1 = match mode {
        FeedbackMode::Dfa(f) => cosine(
            op.w2.as_slice().expect("contiguous"),
            f.as_slice().expect("contiguous"),
        )
        .ok(),
        FeedbackMode::Bp => None,
    };
    Ok(TrajectoryRow {
        alpha,
        eg: eg_from_order_params(op, act)?,
        q: op.q.clone(),
        r: op.r.clone(),
        w2: op.w2.clone(),
        cos_w2_f1,
    })
}

/// Integrates from `op0` to `alpha_max`. The first and last states are always
/// recorded.
pub fn integrate(op0: &OrderParams, mode: &FeedbackMode, cfg: &OdeConfig) -> Result<Vec<TrajectoryRow>> {
    if !(cfg.d_alpha > 0.0) {
        return Err(Error::InvalidArgument("d_alpha must be positive".into()));
    }
    supported(cfg.activation)?;
    let steps = (cfg.alpha_max / cfg.d_alpha).round() as usize;
    let h = cfg.d_alpha;
    let act = cfg.activation;
    let mut op = op0.clone();
    let mut rows = vec![row(&op, 0.0, mode, act)?];
    for s in 1..=steps {
        let rhs = |o: &OrderParams| eom_rhs(o, mode, cfg.eta, act);
        op = match cfg.method {
            Method::Euler => advance(&op, &rhs(&op)?, h),
            Method::Rk4 => {
                let k1 = rhs(&op)?;
                let k2 = rhs(&advance(&op, &k1, h / 2.0))?;
                let k3 = rhs(&advance(&op, &k2, h / 2.0))?;
                let k4 = rhs(&advance(&op, &k3, h))?;
                let mut next = op.clone();
                for (d, w) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
                    next = advance(&next, d, h * w / 6.0);
                }
                next
            }
        };
        let alpha = s as f64 * h;
        check_finite(&op, alpha)?;
        if s == steps || (cfg.log_every > 0 && s % cfg.log_every == 0) {
            rows.push(row(&op, alpha, mode, act)?);
        }
    }
    Ok(rows)
}

/// Symmetric-phase plateau for `K = M`, orthogonal teacher and unit teacher
/// second layer: `Q^kl = s_k s_l q`, `R^km = s_k r`, `W_2^k = s_k w_2`
/// with `s_k = sgn(F^k)`.
pub fn plateau_fixed_point(feedback_signs: &[f64]) -> OrderParams {
    let k = feedback_signs.len();
    let q = 1.0 / (2.0 * k as f64 - 1.0);
    let r = (q / 2.0).sqrt();
    let w2 = ((1.0 + 2.0 * q) / (q * (4.0 + 3.0 * q))).sqrt();
    let s: Vec<f64> = feedback_signs
        .iter()
        .map(|v| if *v < 0.0 { -1.0 } else { 1.0 })
        .collect();
    OrderParams {
        q: Matrix::from_shape_fn((k, k), |(a, b)| s[a] * s[b] * q),
        r: Matrix::from_shape_fn((k, k), |(a, _)| s[a] * r),
        t: identity(k),
        w2: Vector::from_shape_fn(k, |a| s[a] * w2),
        w2_teacher: Vector::ones(k),
    }
}

/// `(q, r, w_2)` of [`plateau_fixed_point`] for `K` hidden units.
pub fn plateau_values(k: usize) -> (f64, f64, f64) {
    let q = 1.0 / (2.0 * k as f64 - 1.0);
    (q, (q / 2.0).sqrt(), ((1.0 + 2.0 * q) / (q * (4.0 + 3.0 * q))).sqrt())
}

/// Lowest-order small-time behaviour of a zero-initialised erf student with
/// an orthogonal teacher (`T = I`):
///
/// ```text
/// R^km(t) = (sqrt 2 / pi) eta W~_2^m F^k t
/// Q^kl(t) = (2 / (3 pi)) eta^2 |W~_2|^2 F^k F^l t
/// W_2^k(t) = (1 / pi^2) eta^2 |W~_2|^2 F^k t^2
/// ```
///
/// The `Q` rate is `eta^2 F^k F^l g'(0)^2 E[y^2]` with `E[y^2] = |W~_2|^2 / 3`.
pub fn early_time_expansion(f: &Vector, w2_teacher: &Vector, eta: f64, t: f64) -> OrderParams {
    let k = f.len();
    let m = w2_teacher.len();
    let norm2 = w2_teacher.dot(w2_teacher);
    OrderParams {
        q: Matrix::from_shape_fn((k, k), |(a, b)| 2.0 / (3.0 * PI) * eta * eta * norm2 * f[a] * f[b] * t),
        r: Matrix::from_shape_fn((k, m), |(a, n)| 2f64.sqrt() / PI * eta * w2_teacher[n] * f[a] * t),
        t: identity(m),
        w2: f * (eta * eta * norm2 / (PI * PI) * t * t),
        w2_teacher: w2_teacher.clone(),
    }
}

/// `T Sigma_x^2 T^T`.
fn drtp_core(teacher: &Matrix, sigma_x: &Matrix) -> Matrix {
    teacher.dot(&sigma_x.dot(sigma_x)).dot(&teacher.t())
}

/// Linear-in-`t` large-batch form `A_l^t = eta^l (T Sigma_x^2 T^T)^(l-1) t`
/// for `l >= 2` (and `A_1^t = eta T Sigma_x t`). For `l = 2` this is the
/// per-step increment of `A_2`; the accumulated matrix is [`drtp_a2_exact`].
pub fn drtp_alignment_closed_form(teacher: &Matrix, sigma_x: &Matrix, eta: f64, l: usize, t: f64) -> Matrix {
    assert!(l >= 1, "layers are counted from 1");
    if l == 1 {
        return teacher.dot(sigma_x) * (eta * t);
    }
    let core = drtp_core(teacher, sigma_x);
    let mut p = identity(core.nrows());
    for _ in 0..l - 1 {
        p = p.dot(&core);
    }
    p * (eta.powi(l as i32) * t)
}

/// Exact large-batch DRTP alignment matrices `A_1 ... A_L` after `t` steps of
/// a linear network from zero, where every step sees `E[x x^T] = Sigma_x` and
/// `e = -T x`. `grams` are `F_j^T F_j` for `j = 1 .. L-1`.
///
/// For `l = 2` this is `eta^2 T Sigma_x^2 T^T t (t - 1) / 2`; in general `A_l`
/// is a polynomial of degree `2^(l-1)` in `t`.
pub fn drtp_alignment_exact(
    teacher: &Matrix,
    sigma_x: &Matrix,
    grams: &[Matrix],
    eta: f64,
    steps: usize,
) -> Vec<Matrix> {
    let depth = grams.len() + 1;
    let n_out = teacher.nrows();
    let ts = teacher.dot(sigma_x);
    let mut a: Vec<Matrix> = vec![Matrix::zeros(teacher.dim())];
    a.extend((2..=depth).map(|_| Matrix::zeros((n_out, n_out))));
    for _ in 0..steps {
        // P_{l-1}^T for every layer, from the pre-step state
        let mut p = identity(teacher.ncols());
        let mut incs = Vec::with_capacity(depth);
        for l in 1..=depth {
            incs.push(ts.dot(&p.t()) * eta);
            p = if l == 1 {
                a[0].clone()
            } else {
                a[l - 1].dot(&grams[l - 2]).dot(&p)
            };
        }
        for (al, inc) in a.iter_mut().zip(incs) {
            *al += &inc;
        }
    }
    a
}

/// `A_2^t` in closed form, `eta^2 T Sigma_x^2 T^T t (t - 1) / 2`.
pub fn drtp_a2_exact(teacher: &Matrix, sigma_x: &Matrix, eta: f64, t: f64) -> Matrix {
    drtp_core(teacher, sigma_x) * (eta * eta * t * (t - 1.0) / 2.0)
}

/// First-order deviation direction `(l - 1)(Sigma~_y + 2 T Sigma~_x T^T)` of
/// the normalised `A_l` from the identity, for `Sigma_x = I + Sigma~_x` and
/// `T T^T = I + Sigma~_y`.
pub fn drtp_deviation(teacher: &Matrix, sigma_x_tilde: &Matrix, sigma_y_tilde: &Matrix, l: usize) -> Matrix {
    (sigma_y_tilde + &(teacher.dot(sigma_x_tilde).dot(&teacher.t()) * 2.0)) * (l as f64 - 1.0)
}
