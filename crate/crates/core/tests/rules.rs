use fa_core::alignment::report;
use fa_core::linalg::{gaussian_matrix, left_orthogonal, Matrix};
use fa_core::network::{forward_batch, init, ActivationKind, InitScheme, MlpParams, OutputMap};
use fa_core::rng::Rng;
use fa_core::trainers::{
    apply, bp_deltas, dfa_deltas, error, fa_deltas, FeedbackEnsemble, FeedbackKind, LearningRates, Loss,
};

fn tanh_net(rng: &mut Rng) -> MlpParams {
    init(InitScheme::FanInUniform, &[6, 5, 4, 3], ActivationKind::Tanh, OutputMap::Identity, true, rng).unwrap()
}

#[test]
fn fa_with_refreshed_transposes_reproduces_bp() {
    let mut rng = Rng::new(11);
    let mut bp = tanh_net(&mut rng);
    let mut fa = bp.clone();
    let rates = LearningRates::uniform(0.05, 3);
    for _ in 0..200 {
        let x = gaussian_matrix(&mut rng, 6, 4, 1.0);
        let y = gaussian_matrix(&mut rng, 3, 4, 1.0);

        let trace = forward_batch(&bp, x.view()).unwrap();
        let e = error(&trace, y.view(), Loss::Mse).unwrap();
        let d = bp_deltas(&bp, &trace, &e, &rates);
        apply(&mut bp, &d).unwrap();

        let fb = FeedbackEnsemble::new(
            FeedbackKind::Fa,
            (2..=3).map(|l| fa.w(l).t().to_owned()).collect(),
            &fa.widths(),
        )
        .unwrap();
        let trace = forward_batch(&fa, x.view()).unwrap();
        let e = error(&trace, y.view(), Loss::Mse).unwrap();
        let d = fa_deltas(&fa, &fb, &trace, &e, &rates).unwrap();
        apply(&mut fa, &d).unwrap();
    }
    assert_eq!(bp, fa);
}

#[test]
fn strong_alignment_makes_dfa_equal_bp() {
    let mut rng = Rng::new(12);
    let widths = [7, 6, 5, 4, 3];
    let fs: Vec<Matrix> = (1..4).map(|l| left_orthogonal(&mut rng, widths[l], 3)).collect();
    let mut weights = vec![gaussian_matrix(&mut rng, 6, 7, 0.5)];
    for l in 2..4 {
        weights.push(fs[l - 1].dot(&fs[l - 2].t()));
    }
    weights.push(fs[2].t().to_owned());
    let params = MlpParams::from_weights(weights, ActivationKind::Linear, OutputMap::Identity).unwrap();
    let fb = FeedbackEnsemble::new(FeedbackKind::Dfa, fs, &widths).unwrap();

    let x = gaussian_matrix(&mut rng, 7, 5, 1.0);
    let y = gaussian_matrix(&mut rng, 3, 5, 1.0);
    let trace = forward_batch(&params, x.view()).unwrap();
    let e = error(&trace, y.view(), Loss::Mse).unwrap();
    let rates = LearningRates::uniform(0.1, 4);
    let b = bp_deltas(&params, &trace, &e, &rates);
    let d = dfa_deltas(&params, &fb, &trace, &e, &rates).unwrap();
    for (x, y) in b.delta_w.iter().zip(&d.delta_w) {
        assert!((x - y).iter().all(|v| v.abs() < 1e-12));
    }
    let r = report(&params, &fb, &trace, &e).unwrap();
    assert!((r.wa_global.unwrap() - 1.0).abs() < 1e-12);
    assert!((r.ga_global.unwrap() - 1.0).abs() < 1e-12);
    for g in r.ga_layer {
        assert!((g.unwrap() - 1.0).abs() < 1e-12);
    }
}
