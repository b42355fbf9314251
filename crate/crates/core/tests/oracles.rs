mod common;

use common::{box_point, v, zoo};
use extragrad::problems::check_grad_default;
use extragrad::{build_problem, RngStream, SampleStats, StochasticOracle, Vector};
use serde_json::json;

#[test]
fn sampled_lipschitz_ratio_stays_below_l() {
    for (i, spec) in zoo().iter().enumerate() {
        let mut rng = RngStream::new(100 + i as u64, 1);
        let ratio = spec.sampled_lipschitz_ratio(1000, &mut rng);
        assert!(
            ratio <= spec.lipschitz_l * (1.0 + 1e-9),
            "{}: ratio {ratio} exceeds L = {}",
            spec.name,
            spec.lipschitz_l
        );
        assert!(ratio > 0.0);
    }
}

#[test]
fn gradients_agree_with_finite_differences() {
    for (i, spec) in zoo().iter().enumerate() {
        let mut rng = RngStream::new(200 + i as u64, 2);
        for _ in 0..100 {
            let x = box_point(spec, &mut rng);
            let c = check_grad_default(spec, &x, 1e-4).unwrap();
            assert!(c.pass, "{} at {x:?}: {}", spec.name, c.max_rel_err);
        }
    }
}

fn mean_of_draws(oracle: &StochasticOracle, x: &Vector, m: usize, n: usize, rng: &mut RngStream) -> (Vec<f64>, Vec<f64>) {
    let d = oracle.dim();
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    for _ in 0..n {
        let g = oracle.stoch_grad(x, m, rng).unwrap();
        for i in 0..d {
            sum[i] += g[i];
            sum_sq[i] += g[i] * g[i];
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let std: Vec<f64> = (0..d)
        .map(|i| ((sum_sq[i] / n as f64 - mean[i] * mean[i]) * n as f64 / (n - 1) as f64).max(0.0).sqrt())
        .collect();
    (mean, std)
}

#[test]
fn additive_noise_is_unbiased() {
    let base = build_problem("rosenbrock", &json!({"dim": 3})).unwrap();
    let oracle = StochasticOracle::additive_gaussian(base.clone(), 0.7).unwrap();
    let x = v(&[0.3, -0.4, 1.1]);
    let truth = base.eval_grad(&x).unwrap();
    let n = 100_000;
    let mut rng = RngStream::new(9, 4);
    let (mean, _) = mean_of_draws(&oracle, &x, 1, n, &mut rng);
    for i in 0..3 {
        let tol = 4.0 * 0.7 / (n as f64).sqrt();
        assert!((mean[i] - truth[i]).abs() <= tol, "coord {i}: {} vs {}", mean[i], truth[i]);
    }
}

#[test]
fn component_sampling_is_unbiased() {
    let base = build_problem("sigmoid_loss", &json!({"dim": 4, "n_samples": 50, "seed": 1})).unwrap();
    let oracle = StochasticOracle::finite_sum(base.clone(), 64, 0).unwrap();
    let x = v(&[0.5, -0.2, 0.1, 0.9]);
    let truth = base.eval_grad(&x).unwrap();
    let n = 100_000;
    let mut rng = RngStream::new(10, 4);
    let (mean, std) = mean_of_draws(&oracle, &x, 1, n, &mut rng);
    for i in 0..4 {
        let tol = 4.0 * std[i] / (n as f64).sqrt();
        assert!((mean[i] - truth[i]).abs() <= tol, "coord {i}: {} vs {} (tol {tol})", mean[i], truth[i]);
    }
}

fn mean_sq_error(oracle: &StochasticOracle, x: &Vector, m: usize, n: usize, seed: u64) -> f64 {
    let truth = oracle.base.eval_grad(x).unwrap();
    let mut rng = RngStream::new(seed, 5);
    let errs: Vec<f64> = (0..n)
        .map(|_| oracle.stoch_grad(x, m, &mut rng).unwrap().dist_sq(&truth))
        .collect();
    SampleStats::from_slice(&errs).unwrap().mean
}

#[test]
fn minibatch_variance_scales_inversely_with_m() {
    let gauss = StochasticOracle::additive_gaussian(build_problem("quadratic", &json!({"dim": 6})).unwrap(), 0.5).unwrap();
    let comps = StochasticOracle::finite_sum(
        build_problem("sigmoid_loss", &json!({"dim": 3, "n_samples": 40, "seed": 2})).unwrap(),
        32,
        0,
    )
    .unwrap();
    for (k, oracle) in [gauss, comps].iter().enumerate() {
        let x = Vector::filled(oracle.dim(), 0.4);
        let base = mean_sq_error(oracle, &x, 1, 20_000, 11 + k as u64);
        for m in [10, 100] {
            let got = mean_sq_error(oracle, &x, m, 4000, 20 + m as u64);
            let ratio = got * m as f64 / base;
            assert!((0.7..=1.3).contains(&ratio), "oracle {k}, m = {m}: ratio {ratio}");
        }
    }
}

#[test]
fn declared_variance_bound_covers_observed_variance() {
    let gauss = StochasticOracle::additive_gaussian(build_problem("quadratic", &json!({"dim": 10})).unwrap(), 0.3).unwrap();
    assert!((gauss.variance_bound_g2 - 0.9).abs() < 1e-15);
    let observed = mean_sq_error(&gauss, &Vector::zeros(10), 1, 20_000, 3);
    assert!((observed / 0.9 - 1.0).abs() < 0.05, "{observed}");

    let comps = StochasticOracle::finite_sum(
        build_problem("sigmoid_loss", &json!({"dim": 3, "n_samples": 40, "seed": 2})).unwrap(),
        64,
        0,
    )
    .unwrap();
    let mut rng = RngStream::new(4, 4);
    for _ in 0..20 {
        let x = box_point(&comps.base, &mut rng);
        let observed = mean_sq_error(&comps, &x, 1, 4000, 6);
        assert!(observed <= comps.variance_bound_g2 * 1.1, "{observed} > {}", comps.variance_bound_g2);
    }
}

#[test]
fn oracle_draws_are_reproducible() {
    let oracle = StochasticOracle::additive_gaussian(build_problem("quadratic", &json!({"dim": 4})).unwrap(), 1.0).unwrap();
    let x = Vector::filled(4, 1.0);
    let draw = |seed, stream| {
        let mut rng = RngStream::new(seed, stream);
        (0..50).map(|_| oracle.stoch_grad(&x, 3, &mut rng).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(draw(1, 2), draw(1, 2));
    assert_ne!(draw(1, 2), draw(1, 3));
    assert_ne!(draw(1, 2), draw(2, 2));
}
