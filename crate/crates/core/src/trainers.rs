//! The four learning rules as producers of per-layer weight updates.
//!
//! All rules share the output-layer signal `delta a_L = e` and the update
//! `delta W_l = -eta_l * delta a_l h_{l-1}^T`; they differ only in how the
//! hidden-layer signals `delta a_l` are formed:
//!
//! | rule | `delta a_l` (`l < L`)                          |
//! |------|------------------------------------------------|
//! | BP   | `(W_{l+1}^T delta a_{l+1}) * g'(a_l)`          |
//! | FA   | `(F_l delta a_{l+1}) * g'(a_l)`                |
//! | DFA  | `(F_l e) * g'(a_l)`                            |
//! | DRTP | `(F_l (-y)) * g'(a_l)`, and `e = -y` on top    |
//!
//! Updates are summed over the columns of a batch. For a mean-reduced loss
//! pass `eta / B`.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{shape_err, Error, Result};
use crate::linalg::{left_orthogonal, uniform_matrix, gaussian_matrix, Matrix, Vector};
use crate::network::{softmax_columns, ForwardTrace, MlpParams};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// `J = 1/2 |y_hat - y|^2` with identity output
    Mse,
    /// `J = -sum y log softmax(a_L)`
    SoftmaxCrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    Bp,
    Fa,
    Dfa,
    Drtp,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Bp => "bp",
            Rule::Fa => "fa",
            Rule::Dfa => "dfa",
            Rule::Drtp => "drtp",
        }
    }
}

/// `e = dJ/da_L`, one column per sample.
pub fn error(trace: &ForwardTrace, y: ArrayView2<f64>, loss: Loss) -> Result<Matrix> {
    let a_last = trace.pre.last().expect("non-empty trace");
    if y.dim() != a_last.dim() {
        return Err(shape_err(format!(
            "target is {:?}, output is {:?}",
            y.dim(),
            a_last.dim()
        )));
    }
    Ok(match loss {
        Loss::Mse => &trace.output - &y,
        Loss::SoftmaxCrossEntropy => softmax_columns(a_last) - y,
    })
}

/// Mean loss over the batch.
pub fn loss_value(trace: &ForwardTrace, y: ArrayView2<f64>, loss: Loss) -> f64 {
    let b = trace.batch_size() as f64;
    match loss {
        Loss::Mse => 0.5 * (&trace.output - &y).iter().map(|v| v * v).sum::<f64>() / b,
        Loss::SoftmaxCrossEntropy => {
            let p = softmax_columns(trace.pre.last().expect("non-empty trace"));
            -p.iter()
                .zip(y.iter())
                .map(|(p, t)| if *t == 0.0 { 0.0 } else { t * p.max(1e-300).ln() })
                .sum::<f64>()
                / b
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackKind {
    /// `F_l` is `n_l x n_{l+1}`, chained layer by layer
    Fa,
    /// `F_l` is `n_l x n_L`, straight from the output error
    Dfa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackInit {
    /// uniform on `[-1/sqrt(n_l + 1), 1/sqrt(n_l + 1)]`
    Uniform,
    /// i.i.d. `N(0, 1/n_l)`, so that `E[F^T F] = I`
    Gaussian,
    /// `F^T F = I`
    LeftOrthogonal,
}

/// Fixed random feedback matrices `F_1 ... F_{L-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackEnsemble {
    pub kind: FeedbackKind,
    pub matrices: Vec<Matrix>,
}

impl FeedbackEnsemble {
    pub fn new(kind: FeedbackKind, matrices: Vec<Matrix>, widths: &[usize]) -> Result<Self> {
        let fb = FeedbackEnsemble { kind, matrices };
        fb.check(widths)?;
        Ok(fb)
    }

    /// `F_l`, counted from 1.
    pub fn f(&self, l: usize) -> &Matrix {
        &self.matrices[l - 1]
    }

    fn expected_shape(kind: FeedbackKind, widths: &[usize], l: usize) -> (usize, usize) {
        let depth = widths.len() - 1;
        match kind {
            FeedbackKind::Fa => (widths[l], widths[l + 1]),
            FeedbackKind::Dfa => (widths[l], widths[depth]),
        }
    }

    pub fn check(&self, widths: &[usize]) -> Result<()> {
        let depth = widths.len() - 1;
        if self.matrices.len() != depth - 1 {
            return Err(shape_err(format!(
                "{} feedback matrices for a {depth}-layer network",
                self.matrices.len()
            )));
        }
        for (i, m) in self.matrices.iter().enumerate() {
            let want = Self::expected_shape(self.kind, widths, i + 1);
            if m.dim() != want {
                return Err(shape_err(format!(
                    "F_{} is {:?}, expected {want:?}",
                    i + 1,
                    m.dim()
                )));
            }
        }
        Ok(())
    }

    /// DFA matrices that produce the same hidden signals in a linear network:
    /// for FA, `F_l -> F_l F_{l+1} ... F_{L-1}`; for DFA, unchanged.
    pub fn effective_direct(&self) -> Vec<Matrix> {
        match self.kind {
            FeedbackKind::Dfa => self.matrices.clone(),
            FeedbackKind::Fa => {
                let n = self.matrices.len();
                let mut out = vec![Matrix::zeros((0, 0)); n];
                for l in (0..n).rev() {
                    out[l] = if l + 1 == n {
                        self.matrices[l].clone()
                    } else {
                        self.matrices[l].dot(&out[l + 1])
                    };
                }
                out
            }
        }
    }

    /// Multiplies every feedback matrix by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        FeedbackEnsemble {
            kind: self.kind,
            matrices: self.matrices.iter().map(|m| m * s).collect(),
        }
    }
}

/// Draws `F_1 ... F_{L-1}` for a network with widths `[n_0, ..., n_L]`.
pub fn init_feedback(
    kind: FeedbackKind,
    init: FeedbackInit,
    widths: &[usize],
    rng: &mut Rng,
) -> Result<FeedbackEnsemble> {
    if widths.len() < 2 {
        return Err(shape_err("need at least one layer"));
    }
    let depth = widths.len() - 1;
    let mut matrices = Vec::with_capacity(depth.saturating_sub(1));
    for l in 1..depth {
        let (rows, cols) = FeedbackEnsemble::expected_shape(kind, widths, l);
        let m = match init {
            FeedbackInit::Uniform => {
                uniform_matrix(rng, rows, cols, 1.0 / ((widths[l] + 1) as f64).sqrt())
            }
            FeedbackInit::Gaussian => gaussian_matrix(rng, rows, cols, 1.0 / (rows as f64).sqrt()),
            FeedbackInit::LeftOrthogonal => {
                if rows < cols {
                    return Err(Error::InvalidArgument(format!(
                        "F_{l} is {rows}x{cols}; left-orthogonal needs rows >= cols"
                    )));
                }
                left_orthogonal(rng, rows, cols)
            }
        };
        matrices.push(m);
    }
    FeedbackEnsemble::new(kind, matrices, widths)
}

/// Per-layer learning rates `eta_1 ... eta_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningRates(Vec<f64>);

impl LearningRates {
    pub fn uniform(eta: f64, depth: usize) -> Self {
        LearningRates(vec![eta; depth])
    }

    pub fn per_layer(rates: Vec<f64>) -> Self {
        LearningRates(rates)
    }

    pub fn at(&self, l: usize) -> f64 {
        self.0[l - 1]
    }

    pub fn scaled(&self, s: f64) -> Self {
        LearningRates(self.0.iter().map(|r| r * s).collect())
    }
}

#[derive(Debug, Clone)]
pub struct LayerDeltas {
    pub e: Matrix,
    /// `delta a_1 ... delta a_L`
    pub delta_a: Vec<Matrix>,
    /// `delta W_1 ... delta W_L`, already carrying `-eta`
    pub delta_w: Vec<Matrix>,
    pub delta_b: Vec<Option<Vector>>,
}

fn gprime(params: &MlpParams, a: &Matrix) -> Matrix {
    let g = params.activation;
    a.mapv(|v| g.derivative(v))
}

/// BP hidden signals, `delta a_1 ... delta a_L`.
pub fn bp_signals(params: &MlpParams, trace: &ForwardTrace, e: &Matrix) -> Vec<Matrix> {
    let depth = params.depth();
    let mut out = vec![Matrix::zeros((0, 0)); depth];
    out[depth - 1] = e.clone();
    for l in (1..depth).rev() {
        let back = params.w(l + 1).t().dot(&out[l]);
        out[l - 1] = back * gprime(params, trace.a(l));
    }
    out
}

/// FA hidden signals.
pub fn fa_signals(
    params: &MlpParams,
    feedback: &FeedbackEnsemble,
    trace: &ForwardTrace,
    e: &Matrix,
) -> Result<Vec<Matrix>> {
    if feedback.kind != FeedbackKind::Fa {
        return Err(Error::InvalidArgument("FA needs layer-to-layer feedback".into()));
    }
    feedback.check(&params.widths())?;
    let depth = params.depth();
    let mut out = vec![Matrix::zeros((0, 0)); depth];
    out[depth - 1] = e.clone();
    for l in (1..depth).rev() {
        let back = feedback.f(l).dot(&out[l]);
        out[l - 1] = back * gprime(params, trace.a(l));
    }
    Ok(out)
}

/// DFA hidden signals; each layer depends only on `(F_l, e, a_l)`.
pub fn dfa_signals(
    params: &MlpParams,
    feedback: &FeedbackEnsemble,
    trace: &ForwardTrace,
    e: &Matrix,
) -> Result<Vec<Matrix>> {
    if feedback.kind != FeedbackKind::Dfa {
        return Err(Error::InvalidArgument("DFA needs direct feedback".into()));
    }
    feedback.check(&params.widths())?;
    let depth = params.depth();
    let mut out: Vec<Matrix> = (1..depth)
        .map(|l| feedback.f(l).dot(e) * gprime(params, trace.a(l)))
        .collect();
    out.push(e.clone());
    Ok(out)
}

fn assemble(
    trace: &ForwardTrace,
    e: &Matrix,
    delta_a: Vec<Matrix>,
    rates: &LearningRates,
    bias: &[bool],
) -> LayerDeltas {
    let mut delta_w = Vec::with_capacity(delta_a.len());
    let mut delta_b = Vec::with_capacity(delta_a.len());
    for (i, da) in delta_a.iter().enumerate() {
        let l = i + 1;
        let eta = rates.at(l);
        let mut dw = da.dot(&trace.h(l - 1).t());
        dw.mapv_inplace(|v| -eta * v);
        delta_w.push(dw);
        delta_b.push(bias[i].then(|| da.sum_axis(Axis(1)) * -eta));
    }
    LayerDeltas {
        e: e.clone(),
        delta_a,
        delta_w,
        delta_b,
    }
}

fn bias_flags(params: &MlpParams) -> Vec<bool> {
    params.layers.iter().map(|l| l.bias.is_some()).collect()
}

pub fn bp_deltas(
    params: &MlpParams,
    trace: &ForwardTrace,
    e: &Matrix,
    rates: &LearningRates,
) -> LayerDeltas {
    let da = bp_signals(params, trace, e);
    assemble(trace, e, da, rates, &bias_flags(params))
}

pub fn fa_deltas(
    params: &MlpParams,
    feedback: &FeedbackEnsemble,
    trace: &ForwardTrace,
    e: &Matrix,
    rates: &LearningRates,
) -> Result<LayerDeltas> {
    let da = fa_signals(params, feedback, trace, e)?;
    Ok(assemble(trace, e, da, rates, &bias_flags(params)))
}

pub fn dfa_deltas(
    params: &MlpParams,
    feedback: &FeedbackEnsemble,
    trace: &ForwardTrace,
    e: &Matrix,
    rates: &LearningRates,
) -> Result<LayerDeltas> {
    let da = dfa_signals(params, feedback, trace, e)?;
    Ok(assemble(trace, e, da, rates, &bias_flags(params)))
}

/// DFA with the broadcast error replaced by `-y`, independent of the prediction.
pub fn drtp_deltas(
    params: &MlpParams,
    feedback: &FeedbackEnsemble,
    trace: &ForwardTrace,
    y: ArrayView2<f64>,
    rates: &LearningRates,
) -> Result<LayerDeltas> {
    let e = y.mapv(|v| -v);
    dfa_deltas(params, feedback, trace, &e, rates)
}

/// `W_l <- W_l + delta W_l` (and biases).
pub fn apply(params: &mut MlpParams, deltas: &LayerDeltas) -> Result<()> {
    if deltas.delta_w.len() != params.depth() {
        return Err(shape_err("delta count does not match depth"));
    }
    for (layer, (dw, db)) in params
        .layers
        .iter_mut()
        .zip(deltas.delta_w.iter().zip(&deltas.delta_b))
    {
        if layer.weight.dim() != dw.dim() {
            return Err(shape_err(format!(
                "delta {:?} for weight {:?}",
                dw.dim(),
                layer.weight.dim()
            )));
        }
        layer.weight += dw;
        if let (Some(b), Some(d)) = (layer.bias.as_mut(), db) {
            *b += d;
        }
    }
    Ok(())
}

/// Updates produced by `rule` on one batch; `y` is `n_L x B`.
pub fn rule_deltas(
    rule: Rule,
    params: &MlpParams,
    feedback: Option<&FeedbackEnsemble>,
    trace: &ForwardTrace,
    y: ArrayView2<f64>,
    loss: Loss,
    rates: &LearningRates,
) -> Result<LayerDeltas> {
    let need = || {
        feedback.ok_or_else(|| Error::InvalidArgument(format!("{} needs feedback", rule.name())))
    };
    match rule {
        Rule::Bp => {
            let e = error(trace, y, loss)?;
            Ok(bp_deltas(params, trace, &e, rates))
        }
        Rule::Fa => {
            let e = error(trace, y, loss)?;
            fa_deltas(params, need()?, trace, &e, rates)
        }
        Rule::Dfa => {
            let e = error(trace, y, loss)?;
            dfa_deltas(params, need()?, trace, &e, rates)
        }
        Rule::Drtp => drtp_deltas(params, need()?, trace, y, rates),
    }
}

/// Single-column target helper.
pub fn column(y: &Vector) -> Array2<f64> {
    y.view().insert_axis(Axis(1)).to_owned()
}
