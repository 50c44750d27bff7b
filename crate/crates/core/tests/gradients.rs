use fa_core::network::{forward_batch, init, ActivationKind, InitScheme, MlpParams, OutputMap};
use fa_core::rng::Rng;
use fa_core::trainers::{bp_deltas, error, loss_value, LearningRates, Loss};
use fa_core::linalg::{gaussian_matrix, Matrix};
use ndarray::Array2;

const STEP: f64 = 1e-5;

fn loss_at(params: &MlpParams, x: &Matrix, y: &Matrix, loss: Loss) -> f64 {
    let trace = forward_batch(params, x.view()).unwrap();
    loss_value(&trace, y.view(), loss)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Largest relative error between BP gradients and centred differences over
/// every weight and bias.
fn max_gradient_error(act: ActivationKind, loss: Loss, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let output = match loss {
        Loss::Mse => OutputMap::Identity,
        Loss::SoftmaxCrossEntropy => OutputMap::Softmax,
    };
    let mut params = init(InitScheme::GaussianStd(0.7), &[5, 4, 3, 2], act, output, true, &mut rng).unwrap();
    for layer in params.layers.iter_mut() {
        let b = gaussian_matrix(&mut rng, layer.weight.nrows(), 1, 0.3);
        layer.bias = Some(b.column(0).to_owned());
    }
    let x = gaussian_matrix(&mut rng, 5, 3, 1.0);
    let y: Array2<f64> = match loss {
        Loss::Mse => gaussian_matrix(&mut rng, 2, 3, 1.0),
        Loss::SoftmaxCrossEntropy => ndarray::array![[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]],
    };
    let trace = forward_batch(&params, x.view()).unwrap();
    let e = error(&trace, y.view(), loss).unwrap();
    let deltas = bp_deltas(&params, &trace, &e, &LearningRates::uniform(1.0 / 3.0, 3));

    let mut worst: f64 = 0.0;
    for l in 0..3 {
        let (rows, cols) = params.layers[l].weight.dim();
        for i in 0..rows {
            for j in 0..cols {
                let orig = params.layers[l].weight[[i, j]];
                params.layers[l].weight[[i, j]] = orig + STEP;
                let up = loss_at(&params, &x, &y, loss);
                params.layers[l].weight[[i, j]] = orig - STEP;
                let down = loss_at(&params, &x, &y, loss);
                params.layers[l].weight[[i, j]] = orig;
                let fd = (up - down) / (2.0 * STEP);
                worst = worst.max(rel(-deltas.delta_w[l][[i, j]], fd));
            }
            let orig = params.layers[l].bias.as_ref().unwrap()[i];
            params.layers[l].bias.as_mut().unwrap()[i] = orig + STEP;
            let up = loss_at(&params, &x, &y, loss);
            params.layers[l].bias.as_mut().unwrap()[i] = orig - STEP;
            let down = loss_at(&params, &x, &y, loss);
            params.layers[l].bias.as_mut().unwrap()[i] = orig;
            let fd = (up - down) / (2.0 * STEP);
            worst = worst.max(rel(-deltas.delta_b[l].as_ref().unwrap()[i], fd));
        }
    }
    worst
}

#[test]
fn bp_matches_finite_differences_for_every_activation() {
    for act in [ActivationKind::ScaledErf, ActivationKind::Relu, ActivationKind::Tanh, ActivationKind::Linear] {
        for loss in [Loss::Mse, Loss::SoftmaxCrossEntropy] {
            for seed in 0..5 {
                let err = max_gradient_error(act, loss, seed);
                assert!(err < 1e-5, "{} {loss:?} seed {seed}: {err:e}", act.name());
            }
        }
    }
}
