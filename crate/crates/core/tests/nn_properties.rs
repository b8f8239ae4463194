use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::Rng;
use vsdl_core::nn::gradcheck::{central_difference, max_relative_error};
use vsdl_core::nn::{
    kl_diag_gaussian, reparameterize, squared_error_grad, squared_error_rows, standard_normal_matrix, Activation, Dense, GaussianLatent, Mlp,
};
use vsdl_core::rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const FLOOR: f64 = 1e-5;

fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

/// Smallest |pre-activation| over the ReLU layers, to keep finite differences
/// away from kinks.
fn relu_margin(net: &Mlp, x: &Array2<f64>) -> f64 {
    let mut input = x.clone();
    let mut margin = f64::INFINITY;
    for layer in &net.layers {
        let pre = input.dot(&layer.weight.t()) + &layer.bias;
        if layer.activation == Activation::Relu {
            margin = pre.iter().fold(margin, |m, v| m.min(v.abs()));
        }
        input = layer.forward(input.view()).unwrap();
    }
    margin
}

fn mse(net: &Mlp, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    squared_error_rows(y, &net.predict(x.view()).unwrap()).mean().unwrap()
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let mut checked = 0;
    for case in 0..40u64 {
        let mut r = rng::stream(case, &[900]);
        let input = r.random_range(1..=6);
        let hidden: Vec<usize> = (0..r.random_range(0..=2)).map(|_| r.random_range(1..=8)).collect();
        let output = r.random_range(1..=4);
        let act = if case % 3 == 0 { Activation::Softmax } else { Activation::Identity };
        let net = Mlp::new(input, &hidden, output, act, &mut r);
        let n = r.random_range(1..=5);
        let x = random_matrix(n, input, &mut r);
        let y = random_matrix(n, output, &mut r);
        if relu_margin(&net, &x) < 1e-3 {
            continue;
        }
        let trace = net.forward(x.view()).unwrap();
        let g_out = squared_error_grad(&y, trace.output().unwrap(), 1.0 / n as f64);
        let (grads, dx) = net.backward(&trace, &g_out, true).unwrap();

        let mut probe = net.clone();
        let numeric = central_difference(
            |p| {
                probe.set_flat_params(p).unwrap();
                mse(&probe, &x, &y)
            },
            &net.flatten_params(),
            H,
        );
        let err = max_relative_error(&grads.flatten(), &numeric, FLOOR);
        assert!(err < TOL, "case {case}: parameter error {err}");

        let numeric_x = central_difference(
            |v| mse(&net, &Array2::from_shape_vec(x.raw_dim(), v.to_vec()).unwrap(), &y),
            x.as_slice().unwrap(),
            H,
        );
        let err = max_relative_error(dx.unwrap().as_slice().unwrap(), &numeric_x, FLOOR);
        assert!(err < TOL, "case {case}: input error {err}");
        checked += 1;
    }
    assert!(checked >= 30, "only {checked} cases away from relu kinks");
}

#[test]
fn gaussian_head_gradient_matches_finite_differences() {
    for case in 0..20u64 {
        let mut r = rng::stream(case, &[901]);
        let (n, j) = (r.random_range(1..=4), r.random_range(1..=6));
        let head = random_matrix(n, 2 * j, &mut r);
        let eps = standard_normal_matrix(n, j, &mut r);
        let w = random_matrix(n, j, &mut r);
        let kl_scale = r.random_range(0.0..2.0);
        let objective = |h: &[f64]| {
            let h = Array2::from_shape_vec((n, 2 * j), h.to_vec()).unwrap();
            let (mu, lv) = h.view().split_at(Axis(1), j);
            let g = GaussianLatent::with_noise(mu.to_owned(), lv.to_owned(), eps.clone()).unwrap();
            (&g.z * &w).sum() + kl_scale * g.kl_rows().sum()
        };
        let (mu, lv) = head.view().split_at(Axis(1), j);
        let g = GaussianLatent::with_noise(mu.to_owned(), lv.to_owned(), eps.clone()).unwrap();
        let analytic = g.backward(&w, kl_scale);
        let numeric = central_difference(objective, head.as_slice().unwrap(), H);
        let err = max_relative_error(analytic.as_slice().unwrap(), &numeric, FLOOR);
        assert!(err < TOL, "case {case}: {err}");
    }
}

#[test]
fn kl_matches_monte_carlo() {
    let mut r = rng::stream(7, &[902]);
    let draws = 200_000;
    for _ in 0..5 {
        let mu = r.random_range(-2.0..2.0);
        let sigma: f64 = r.random_range(0.3..2.0);
        let exact = kl_diag_gaussian(&[mu], &[sigma]).unwrap();
        // log q(z) - log p(z) for z ~ q
        let samples: Vec<f64> = (0..draws)
            .map(|_| {
                let z = mu + sigma * rng::standard_normal(&mut r);
                let e = (z - mu) / sigma;
                -sigma.ln() - 0.5 * e * e + 0.5 * z * z
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!((mean - exact).abs() < 4.0 * se, "mu {mu} sigma {sigma}: mc {mean} exact {exact} se {se}");
    }
}

#[test]
fn kl_vanishes_at_standard_normal() {
    assert_eq!(kl_diag_gaussian(&[0.0; 5], &[1.0; 5]).unwrap(), 0.0);
    assert!(kl_diag_gaussian(&[0.0], &[0.0]).is_err());
    assert!(kl_diag_gaussian(&[0.0, 1.0], &[1.0]).is_err());
}

#[test]
fn reparameterized_draws_have_requested_moments() {
    let mut r = rng::stream(3, &[903]);
    let (mu, sigma) = ([1.5, -0.5], [0.5, 2.0]);
    let n = 100_000;
    let mut sum = [0.0; 2];
    let mut sq = [0.0; 2];
    for _ in 0..n {
        let g = reparameterize(&mu, &sigma, &mut r).unwrap();
        for k in 0..2 {
            sum[k] += g.z[[0, k]];
            sq[k] += g.z[[0, k]].powi(2);
        }
    }
    for k in 0..2 {
        let m = sum[k] / n as f64;
        let v = sq[k] / n as f64 - m * m;
        assert!((m - mu[k]).abs() < 4.0 * sigma[k] / (n as f64).sqrt(), "mean {m}");
        assert!((v.sqrt() / sigma[k] - 1.0).abs() < 0.02, "std {}", v.sqrt());
    }
}

proptest! {
    #[test]
    fn kl_is_nonnegative(mu in prop::collection::vec(-5.0f64..5.0, 1..8), s in 0.05f64..5.0) {
        let sigma = vec![s; mu.len()];
        prop_assert!(kl_diag_gaussian(&mu, &sigma).unwrap() >= 0.0);
    }

    #[test]
    fn softmax_ignores_common_shift(bias in prop::collection::vec(-10.0f64..10.0, 2..6), shift in -50.0f64..50.0) {
        let k = bias.len();
        let mut a = Dense::zeros(1, k, Activation::Softmax);
        a.bias = bias.iter().copied().collect();
        let mut b = a.clone();
        b.bias.mapv_inplace(|v| v + shift);
        let x = Array2::from_elem((1, 1), 0.3);
        let (ya, yb) = (a.forward(x.view()).unwrap(), b.forward(x.view()).unwrap());
        prop_assert!((ya.sum() - 1.0).abs() < 1e-12);
        for (p, q) in ya.iter().zip(yb.iter()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }
}
