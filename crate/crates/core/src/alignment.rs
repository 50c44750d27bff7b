//! Weight and gradient alignment.
//!
//! Global and layerwise observables compare the forward weights
//! `(W_2, ..., W_L)` with the feedback products `(F_2 F_1^T, ..., F_{L-1}^T)`
//! (weight alignment, WA) and the rule's hidden signals with the BP signals on
//! the same batch (gradient alignment, GA).
//!
//! For deep linear networks trained from zero with DFA, every weight factors
//! as `W_l = F_l A_l F_{l-1}^T` (with `F_0 = F_L = I`). [`AlignmentMatrices`]
//! tracks the `A_l` step by step:
//!
//! ```text
//! A_l <- A_l - eta e (P_{l-1} x)^T
//! P_0 = I,  P_j = A_j G_{j-1} A_{j-1} ... G_1 A_1,  G_j = F_j^T F_j
//! ```
//!
//! When every `F_j` is left-orthogonal the Gram matrices drop out and `A_l`
//! reduces to the familiar double sum over pairs of steps
//! `A_l = eta^2 sum_{t'' < t'} (B_l x_t'').(B_l x_t') e_t' e_t''^T`, `B_l = P_{l-2}`.
//! [`alignment_by_double_sums`] evaluates that double sum (with the Gram
//! weighting kept) directly from a recorded history.

use ndarray::Array2;

use crate::error::{shape_err, Error, Result};
use crate::linalg::{cosine_matrices, frobenius, identity, singular_values, Matrix};
use crate::network::{ForwardTrace, MlpParams};
use crate::trainers::{bp_signals, dfa_signals, fa_signals, FeedbackEnsemble, FeedbackKind};

/// Floor on denominators of relative residuals.
pub const RESIDUAL_FLOOR: f64 = 1e-30;

/// Running alignment matrices of a deep linear network.
#[derive(Debug, Clone)]
pub struct AlignmentMatrices {
    /// `A_1` is `n_L x n_0`, the others `n_L x n_L`
    a: Vec<Matrix>,
    /// `F_1 ... F_{L-1}` in direct (`n_l x n_L`) form
    direct: Vec<Matrix>,
    /// `F_j^T F_j`
    grams: Vec<Matrix>,
    steps: usize,
}

impl AlignmentMatrices {
    /// Zero state for a network with widths `[n_0, ..., n_L]`. FA feedback is
    /// converted to its direct equivalent `F_l F_{l+1} ... F_{L-1}`.
    pub fn new(feedback: &FeedbackEnsemble, widths: &[usize]) -> Result<Self> {
        feedback.check(widths)?;
        let depth = widths.len() - 1;
        let n_out = widths[depth];
        let direct = feedback.effective_direct();
        let grams = direct.iter().map(|f| f.t().dot(f)).collect();
        let mut a = vec![Matrix::zeros((n_out, widths[0]))];
        a.extend((2..=depth).map(|_| Matrix::zeros((n_out, n_out))));
        Ok(AlignmentMatrices {
            a,
            direct,
            grams,
            steps: 0,
        })
    }

    pub fn depth(&self) -> usize {
        self.a.len()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `A_l`, counted from 1.
    pub fn a(&self, l: usize) -> &Matrix {
        &self.a[l - 1]
    }

    /// `G_j = F_j^T F_j` for `j >= 1`; `G_0 = I`.
    pub fn gram(&self, j: usize) -> Matrix {
        if j == 0 {
            identity(self.a[0].ncols())
        } else {
            self.grams[j - 1].clone()
        }
    }

    /// `P_j`, mapping the input to the coefficients of `h_j` in the basis `F_j`.
    pub fn p(&self, j: usize) -> Matrix {
        let mut p = identity(self.a[0].ncols());
        for i in 1..=j {
            p = if i == 1 {
                self.a[0].clone()
            } else {
                self.a[i - 1].dot(&self.grams[i - 2]).dot(&p)
            };
        }
        p
    }

    /// `B_l = P_{l-2}` for `l >= 2`.
    pub fn b(&self, l: usize) -> Matrix {
        assert!(l >= 2, "B_l is defined for l >= 2");
        self.p(l - 2)
    }

    /// One training step with errors `e` (`n_L x B`) on inputs `x` (`n_0 x B`).
    /// Every `A_l` is advanced using the state before the step.
    pub fn accumulate(&mut self, e: &Matrix, x: &Matrix, eta: f64) -> Result<()> {
        let n_out = self.a[0].nrows();
        if e.nrows() != n_out || x.nrows() != self.a[0].ncols() || e.ncols() != x.ncols() {
            return Err(shape_err(format!(
                "accumulate with e {:?} and x {:?}",
                e.dim(),
                x.dim()
            )));
        }
        // v_j = P_j x for j = 0 .. L-1, all from the pre-step state
        let depth = self.depth();
        let mut v = Vec::with_capacity(depth);
        v.push(x.clone());
        for j in 1..depth {
            let next = if j == 1 {
                self.a[0].dot(x)
            } else {
                self.a[j - 1].dot(&self.grams[j - 2].dot(&v[j - 1]))
            };
            v.push(next);
        }
        for (l, vl) in v.iter().enumerate() {
            let inc = e.dot(&vl.t());
            self.a[l].scaled_add(-eta, &inc);
        }
        self.steps += 1;
        Ok(())
    }

    /// `F_l A_l F_{l-1}^T` for every layer, with `F_0 = F_L = I`.
    pub fn predicted_weights(&self) -> Vec<Matrix> {
        let depth = self.depth();
        (1..=depth)
            .map(|l| {
                let mut m = self.a[l - 1].clone();
                if l < depth {
                    m = self.direct[l - 1].dot(&m);
                }
                if l > 1 {
                    m = m.dot(&self.direct[l - 2].t());
                }
                m
            })
            .collect()
    }
}

/// `|W_l - F_l A_l F_{l-1}^T| / |W_l|` per layer; 0 when both sides vanish.
pub fn weak_wa_residual(params: &MlpParams, state: &AlignmentMatrices) -> Result<Vec<f64>> {
    if params.depth() != state.depth() {
        return Err(shape_err("network and alignment state differ in depth"));
    }
    state
        .predicted_weights()
        .iter()
        .enumerate()
        .map(|(i, pred)| {
            let w = params.w(i + 1);
            if w.dim() != pred.dim() {
                return Err(shape_err(format!(
                    "layer {} is {:?}, factorization gives {:?}",
                    i + 1,
                    w.dim(),
                    pred.dim()
                )));
            }
            let diff = frobenius(&(w - pred));
            let scale = frobenius(w);
            if diff == 0.0 {
                Ok(0.0)
            } else {
                Ok(diff / scale.max(RESIDUAL_FLOOR))
            }
        })
        .collect()
}

/// Alignment matrices evaluated from a recorded history by explicit double
/// sums. `history` holds `(e_t, x_t)` for `t = 0, 1, ...`; `grams` are
/// `G_1 ... G_{L-1}`. Returns `A_1 ... A_L` after the whole history.
pub fn alignment_by_double_sums(
    history: &[(Matrix, Matrix)],
    grams: &[Matrix],
    eta: f64,
) -> Vec<Matrix> {
    let depth = grams.len() + 1;
    let n_out = history.first().map_or(0, |(e, _)| e.nrows());
    let n0 = history.first().map_or(0, |(_, x)| x.nrows());
    let steps = history.len();

    // a_hist[l-1][s] = A_l after s steps
    let mut a_hist: Vec<Vec<Matrix>> = Vec::with_capacity(depth);
    let mut a1 = vec![Matrix::zeros((n_out, n0))];
    for (e, x) in history {
        let prev = a1.last().expect("non-empty");
        a1.push(prev - &(e.dot(&x.t()) * eta));
    }
    a_hist.push(a1);

    for l in 2..=depth {
        // v[s] = B_l^s x_s with B_l = P_{l-2}, from the levels below
        let v: Vec<Matrix> = (0..steps)
            .map(|s| {
                let x = &history[s].1;
                let mut p = x.clone();
                for j in 1..=l - 2 {
                    p = if j == 1 {
                        a_hist[0][s].dot(&p)
                    } else {
                        a_hist[j - 1][s].dot(&grams[j - 2].dot(&p))
                    };
                }
                p
            })
            .collect();
        let g = if l == 2 {
            identity(n0)
        } else {
            grams[l - 3].clone()
        };
        // the sum up to step s is the sum up to s-1 plus the terms with t' = s-1
        let mut al = vec![Matrix::zeros((n_out, n_out))];
        let mut total = Matrix::zeros((n_out, n_out));
        for t1 in 0..steps {
            let e1 = &history[t1].0;
            let gv1 = g.dot(&v[t1]);
            for t2 in 0..t1 {
                let kernel: Array2<f64> = v[t2].t().dot(&gv1);
                total += &(e1.dot(&kernel.t()).dot(&history[t2].0.t()) * (eta * eta));
            }
            al.push(total.clone());
        }
        a_hist.push(al);
    }
    a_hist.into_iter().map(|mut h| h.pop().expect("non-empty")).collect()
}

/// Conditioning of a square alignment matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditioning {
    /// `sigma_min / sigma_max`, 1 for a multiple of an orthogonal matrix
    pub ratio: f64,
    /// `|A / tau - I| / |I|` with `tau = tr(A) / n`
    pub identity_distance: f64,
}

pub fn conditioning(a: &Matrix) -> Result<Conditioning> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(shape_err(format!("conditioning of {:?}", a.dim())));
    }
    let sv = singular_values(a);
    let smax = sv[0];
    if smax == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let ratio = sv[n - 1] / smax;
    let tau = a.diag().sum() / n as f64;
    let identity_distance = if tau == 0.0 {
        f64::INFINITY
    } else {
        frobenius(&(a / tau - identity(n))) / (n as f64).sqrt()
    };
    Ok(Conditioning {
        ratio,
        identity_distance,
    })
}

/// Alignment observables at one point of training. `None` marks a cosine
/// with a zero-norm argument.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    pub wa_global: Option<f64>,
    pub ga_global: Option<f64>,
    /// layers `2 ..= L`
    pub wa_layer: Vec<Option<f64>>,
    /// layers `1 ..= L-1`; the top layer always has GA 1 and is left out
    pub ga_layer: Vec<Option<f64>>,
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::ZeroNorm) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `F_l F_{l-1}^T` for `l = 2 ..= L` (with `F_L = I`), in direct form.
pub fn feedback_products(feedback: &FeedbackEnsemble) -> Vec<Matrix> {
    let direct = feedback.effective_direct();
    let depth = direct.len() + 1;
    (2..=depth)
        .map(|l| {
            let prev = direct[l - 2].t();
            if l < depth {
                direct[l - 1].dot(&prev)
            } else {
                prev.to_owned()
            }
        })
        .collect()
}

/// Global and per-layer weight alignment.
pub fn weight_alignment(
    params: &MlpParams,
    feedback: &FeedbackEnsemble,
) -> Result<(Option<f64>, Vec<Option<f64>>)> {
    feedback.check(&params.widths())?;
    let fs = feedback_products(feedback);
    let ws: Vec<&Matrix> = (2..=params.depth()).map(|l| params.w(l)).collect();
    let f_refs: Vec<&Matrix> = fs.iter().collect();
    let global = defined(cosine_matrices(&ws, &f_refs))?;
    let layer = ws
        .iter()
        .zip(&fs)
        .map(|(w, f)| defined(cosine_matrices(&[*w], &[f])))
        .collect::<Result<Vec<_>>>()?;
    Ok((global, layer))
}

/// Global and per-layer gradient alignment between the feedback rule driven
/// by `e_broadcast` and BP driven by `e`, on the batch in `trace`.
pub fn gradient_alignment(
    params: &MlpParams,
    feedback: &FeedbackEnsemble,
    trace: &ForwardTrace,
    e: &Matrix,
    e_broadcast: &Matrix,
) -> Result<(Option<f64>, Vec<Option<f64>>)> {
    let bp = bp_signals(params, trace, e);
    let rule = match feedback.kind {
        FeedbackKind::Dfa => dfa_signals(params, feedback, trace, e_broadcast)?,
        FeedbackKind::Fa => fa_signals(params, feedback, trace, e_broadcast)?,
    };
    let hidden = params.depth() - 1;
    let r: Vec<&Matrix> = rule[..hidden].iter().collect();
    let b: Vec<&Matrix> = bp[..hidden].iter().collect();
    let global = if hidden == 0 {
        None
    } else {
        defined(cosine_matrices(&r, &b))?
    };
    let layer = r
        .iter()
        .zip(&b)
        .map(|(x, y)| defined(cosine_matrices(&[*x], &[*y])))
        .collect::<Result<Vec<_>>>()?;
    Ok((global, layer))
}

/// WA from the weights and GA on the batch in `trace` with error `e`.
pub fn report(
    params: &MlpParams,
    feedback: &FeedbackEnsemble,
    trace: &ForwardTrace,
    e: &Matrix,
) -> Result<AlignmentReport> {
    report_with_signal(params, feedback, trace, e, e)
}

/// As [`report`], with a broadcast signal different from the BP error
/// (`-y` for DRTP).
pub fn report_with_signal(
    params: &MlpParams,
    feedback: &FeedbackEnsemble,
    trace: &ForwardTrace,
    e: &Matrix,
    e_broadcast: &Matrix,
) -> Result<AlignmentReport> {
    let (wa_global, wa_layer) = weight_alignment(params, feedback)?;
    let (ga_global, ga_layer) = gradient_alignment(params, feedback, trace, e, e_broadcast)?;
    Ok(AlignmentReport {
        wa_global,
        ga_global,
        wa_layer,
        ga_layer,
    })
}

/// Cosine between the stacked weight matrices of two networks (biases are
/// not included).
pub fn interrun_cosine(a: &MlpParams, b: &MlpParams) -> Result<f64> {
    if a.widths() != b.widths() {
        return Err(shape_err(format!(
            "architectures {:?} and {:?}",
            a.widths(),
            b.widths()
        )));
    }
    cosine_matrices(&a.weights(), &b.weights())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, left_orthogonal};
    use crate::network::{forward, forward_batch, init, ActivationKind, InitScheme, OutputMap};
    use crate::rng::Rng;
    use crate::trainers::{apply, dfa_deltas, init_feedback, FeedbackInit, LearningRates};
    use ndarray::array;
    use proptest::prelude::*;

    fn zero_linear(widths: &[usize]) -> MlpParams {
        init(
            InitScheme::Zero,
            widths,
            ActivationKind::Linear,
            OutputMap::Identity,
            false,
            &mut Rng::new(0),
        )
        .unwrap()
    }

    #[test]
    fn first_step_only_moves_a1() {
        let widths = [4, 3, 3, 2];
        let mut r = Rng::new(1);
        let fb = init_feedback(FeedbackKind::Dfa, FeedbackInit::Uniform, &widths, &mut r).unwrap();
        let mut st = AlignmentMatrices::new(&fb, &widths).unwrap();
        let e = gaussian_matrix(&mut r, 2, 1, 1.0);
        let x = gaussian_matrix(&mut r, 4, 1, 1.0);
        st.accumulate(&e, &x, 0.1).unwrap();
        let want = e.dot(&x.t()) * -0.1;
        assert!((st.a(1) - &want).iter().all(|v| v.abs() < 1e-15));
        assert!(st.a(2).iter().chain(st.a(3).iter()).all(|v| *v == 0.0));
    }

    #[test]
    fn zero_errors_leave_state_zero() {
        let widths = [3, 3, 2];
        let mut r = Rng::new(2);
        let fb = init_feedback(FeedbackKind::Dfa, FeedbackInit::Gaussian, &widths, &mut r).unwrap();
        let mut st = AlignmentMatrices::new(&fb, &widths).unwrap();
        for _ in 0..5 {
            let x = gaussian_matrix(&mut r, 3, 1, 1.0);
            st.accumulate(&Matrix::zeros((2, 1)), &x, 0.5).unwrap();
        }
        assert!((1..=2).all(|l| st.a(l).iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn residual_is_zero_before_training() {
        let widths = [4, 3, 2];
        let fb = init_feedback(FeedbackKind::Dfa, FeedbackInit::Uniform, &widths, &mut Rng::new(3)).unwrap();
        let st = AlignmentMatrices::new(&fb, &widths).unwrap();
        let res = weak_wa_residual(&zero_linear(&widths), &st).unwrap();
        assert_eq!(res, vec![0.0, 0.0]);
    }

    #[test]
    fn double_sum_matches_incremental_with_batches() {
        let widths = [5, 4, 4, 3, 2];
        let mut r = Rng::new(4);
        let fb = init_feedback(FeedbackKind::Dfa, FeedbackInit::Uniform, &widths, &mut r).unwrap();
        let mut st = AlignmentMatrices::new(&fb, &widths).unwrap();
        let grams: Vec<Matrix> = (1..4).map(|j| st.gram(j)).collect();
        let mut hist = Vec::new();
        for _ in 0..12 {
            let e = gaussian_matrix(&mut r, 2, 3, 1.0);
            let x = gaussian_matrix(&mut r, 5, 3, 1.0);
            st.accumulate(&e, &x, 0.3).unwrap();
            hist.push((e, x));
        }
        let oracle = alignment_by_double_sums(&hist, &grams, 0.3);
        for l in 1..=4 {
            let d = frobenius(&(st.a(l) - &oracle[l - 1]));
            assert!(d <= 1e-10 * frobenius(st.a(l)).max(1.0), "layer {l}: {d}");
        }
    }

    #[test]
    fn dfa_linear_net_factorizes() {
        let widths = [6, 5, 4, 3];
        let mut r = Rng::new(5);
        let fb = init_feedback(FeedbackKind::Dfa, FeedbackInit::Uniform, &widths, &mut r).unwrap();
        let mut params = zero_linear(&widths);
        let mut st = AlignmentMatrices::new(&fb, &widths).unwrap();
        let teacher = gaussian_matrix(&mut r, 3, 6, 1.0);
        let rates = LearningRates::uniform(0.05, 3);
        for _ in 0..50 {
            let x = gaussian_matrix(&mut r, 6, 1, 1.0);
            let tr = forward_batch(&params, x.view()).unwrap();
            let e = &tr.output - &teacher.dot(&x);
            let d = dfa_deltas(&params, &fb, &tr, &e, &rates).unwrap();
            st.accumulate(&e, &x, 0.05).unwrap();
            apply(&mut params, &d).unwrap();
        }
        for res in weak_wa_residual(&params, &st).unwrap() {
            assert!(res < 1e-10, "{res}");
        }
    }

    #[test]
    fn conditioning_examples() {
        let c = conditioning(&identity(3)).unwrap();
        assert!((c.ratio - 1.0).abs() < 1e-12 && c.identity_distance < 1e-12);
        let c = conditioning(&array![[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!(c.ratio.abs() < 1e-12);
        assert_eq!(conditioning(&Matrix::zeros((2, 2))), Err(Error::ZeroNorm));
        // singular values of [[2,1],[1,2]] are 3 and 1
        let c = conditioning(&array![[2.0, 1.0], [1.0, 2.0]]).unwrap();
        assert!((c.ratio - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn strong_alignment_gives_unit_wa() {
        let widths = [5, 6, 6, 3];
        let mut r = Rng::new(6);
        let f1 = left_orthogonal(&mut r, 6, 3);
        let f2 = left_orthogonal(&mut r, 6, 3);
        let fb = FeedbackEnsemble::new(FeedbackKind::Dfa, vec![f1.clone(), f2.clone()], &widths).unwrap();
        let w1 = gaussian_matrix(&mut r, 6, 5, 1.0);
        let params = MlpParams::from_weights(
            vec![w1, f2.dot(&f1.t()), f2.t().to_owned()],
            ActivationKind::Linear,
            OutputMap::Identity,
        )
        .unwrap();
        let (g, layer) = weight_alignment(&params, &fb).unwrap();
        assert!((g.unwrap() - 1.0).abs() < 1e-12);
        assert!(layer.iter().all(|v| (v.unwrap() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn two_layer_ga_with_w2_proportional_to_feedback() {
        let widths = [4, 3, 2];
        let mut r = Rng::new(7);
        let f1 = gaussian_matrix(&mut r, 3, 2, 1.0);
        let fb = FeedbackEnsemble::new(FeedbackKind::Dfa, vec![f1.clone()], &widths).unwrap();
        let params = MlpParams::from_weights(
            vec![gaussian_matrix(&mut r, 3, 4, 1.0), f1.t().to_owned() * 2.5],
            ActivationKind::ScaledErf,
            OutputMap::Identity,
        )
        .unwrap();
        let x = gaussian_matrix(&mut r, 4, 1, 1.0).column(0).to_owned();
        let tr = forward(&params, &x).unwrap();
        let e = gaussian_matrix(&mut r, 2, 1, 1.0);
        let rep = report(&params, &fb, &tr, &e).unwrap();
        assert!((rep.ga_layer[0].unwrap() - 1.0).abs() < 1e-12);
        let neg = MlpParams::from_weights(
            vec![params.w(1).clone(), f1.t().to_owned() * -1.0],
            ActivationKind::ScaledErf,
            OutputMap::Identity,
        )
        .unwrap();
        let rep = report(&neg, &fb, &tr, &e).unwrap();
        assert!((rep.ga_layer[0].unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_give_undefined_wa() {
        let widths = [3, 3, 2];
        let fb = init_feedback(FeedbackKind::Dfa, FeedbackInit::Uniform, &widths, &mut Rng::new(8)).unwrap();
        let (g, layer) = weight_alignment(&zero_linear(&widths), &fb).unwrap();
        assert_eq!(g, None);
        assert_eq!(layer, vec![None]);
    }

    #[test]
    fn random_wide_net_has_small_wa() {
        let widths = [100, 100, 100, 100, 10];
        let r = Rng::new(9);
        let params = init(
            InitScheme::FanInUniform,
            &widths,
            ActivationKind::Tanh,
            OutputMap::Identity,
            false,
            &mut r.substream("init"),
        )
        .unwrap();
        let fb = init_feedback(FeedbackKind::Dfa, FeedbackInit::Uniform, &widths, &mut r.substream("fb")).unwrap();
        let (g, _) = weight_alignment(&params, &fb).unwrap();
        assert!(g.unwrap().abs() < 0.05, "{g:?}");
    }

    #[test]
    fn interrun_examples() {
        let widths = [4, 3, 2];
        let a = init(
            InitScheme::GaussianStd(1.0),
            &widths,
            ActivationKind::Relu,
            OutputMap::Identity,
            false,
            &mut Rng::new(10),
        )
        .unwrap();
        assert!((interrun_cosine(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let mut b = a.clone();
        for l in &mut b.layers {
            l.weight.mapv_inplace(|v| -v);
        }
        assert!((interrun_cosine(&a, &b).unwrap() + 1.0).abs() < 1e-12);
        let c = zero_linear(&[4, 2, 2]);
        assert!(matches!(interrun_cosine(&a, &c), Err(Error::Shape(_))));
    }

    proptest! {
        #[test]
        fn report_is_bounded_and_scale_invariant(seed in 0u64..200, s in 0.01..100.0f64) {
            let widths = [4, 5, 5, 3];
            let mut r = Rng::new(seed);
            let params = init(
                InitScheme::GaussianStd(0.5),
                &widths,
                ActivationKind::Tanh,
                OutputMap::Identity,
                false,
                &mut r,
            )
            .unwrap();
            let fb = init_feedback(FeedbackKind::Dfa, FeedbackInit::Uniform, &widths, &mut r).unwrap();
            let x = gaussian_matrix(&mut r, 4, 2, 1.0);
            let tr = forward_batch(&params, x.view()).unwrap();
            let e = gaussian_matrix(&mut r, 3, 2, 1.0);
            let a = report(&params, &fb, &tr, &e).unwrap();
            let b = report(&params, &fb.scaled(s), &tr, &e).unwrap();
            // global WA mixes blocks that scale as s^2 and s, so it is left out
            let all = |rep: &AlignmentReport| {
                let mut v = vec![rep.ga_global];
                v.extend(rep.wa_layer.iter().copied());
                v.extend(rep.ga_layer.iter().copied());
                v
            };
            prop_assert!((-1.0..=1.0).contains(&a.wa_global.unwrap()));
            for (x, y) in all(&a).into_iter().zip(all(&b)) {
                let (x, y) = (x.unwrap(), y.unwrap());
                prop_assert!((-1.0..=1.0).contains(&x));
                prop_assert!((x - y).abs() < 1e-10);
            }
        }
    }
}
