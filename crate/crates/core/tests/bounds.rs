mod common;

use common::{box_point, zoo};
use extragrad::numkit::default_fd_step;
use extragrad::theory::thm1_iterations_for;
use extragrad::{
    bound_thm1, bound_thm2, build_problem, finite_diff_grad, prox_moreau, run_gde, run_minibatch_sgde,
    GdeConfig, MoreauConfig, RngStream, SampleStats, SgdeConfig, StochasticOracle, Vector,
};
use proptest::prelude::*;
use serde_json::json;

#[test]
fn minibatch_bound_on_noisy_quadratic() {
    // d = 10, σ = 1, m = 100, η = 1/12, T = 1000 over 20 seeds
    let base = build_problem("quadratic", &json!({"dim": 10})).unwrap();
    let oracle = StochasticOracle::additive_gaussian(base.clone(), 1.0).unwrap();
    let x0 = Vector::filled(10, 1.0);
    let delta0 = base.initial_gap(&x0).unwrap();
    assert_eq!(delta0, 5.0);
    let cfg = SgdeConfig::new(1.0 / 12.0, 1000, 100);
    let (mut lhs, mut sums) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        let mut rng = RngStream::new(seed, 1);
        let traj = run_minibatch_sgde(&oracle, &x0, &cfg, &mut rng).unwrap();
        lhs.push(traj.min_grad_norm_from_first.powi(2));
        sums.push(traj.sum_step_diff_sq);
    }
    let obs = SampleStats::from_slice(&lhs).unwrap();
    let sum = SampleStats::from_slice(&sums).unwrap();
    let rep = bound_thm2(delta0, 1.0 / 12.0, 1000, 1.0, 10.0, 100, sum.mean, obs.mean, 3.0 * obs.stderr).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert_eq!(rep.inputs.g2, Some(10.0));
}

#[test]
fn deterministic_bound_holds_across_problems() {
    for spec in zoo().into_iter().filter(|s| s.f_opt.is_some()) {
        let mut rng = RngStream::new(31, 0);
        for _ in 0..5 {
            let x0 = box_point(&spec, &mut rng);
            let delta0 = spec.initial_gap(&x0).unwrap();
            for k in [12.0, 24.0] {
                let eta = 1.0 / (k * spec.lipschitz_l);
                for t in [10, 100, 1000] {
                    let traj = run_gde(&spec, &x0, &GdeConfig::new(eta, t)).unwrap();
                    let rep = bound_thm1(
                        delta0,
                        eta,
                        t,
                        spec.lipschitz_l,
                        traj.sum_step_diff_sq,
                        traj.min_grad_norm_from_first.powi(2),
                    )
                    .unwrap();
                    assert!(rep.pass, "{} T = {t}: {rep:?}", spec.name);
                }
            }
        }
    }
}

#[test]
fn iteration_count_reaches_tolerance() {
    let spec = build_problem("quadratic", &json!({"diag": [0.5, 1.0, 2.0]})).unwrap();
    let x0 = Vector::new(vec![1.0, -1.0, 2.0]).unwrap();
    let eta = 1.0 / (12.0 * spec.lipschitz_l);
    for eps in [1e-1, 1e-2] {
        let t = thm1_iterations_for(spec.initial_gap(&x0).unwrap(), eta, eps) as usize;
        let cfg = GdeConfig {
            record_every: 10_000,
            target_grad_norm: Some(eps),
            ..GdeConfig::new(eta, t)
        };
        let traj = run_gde(&spec, &x0, &cfg).unwrap();
        assert!(traj.iterations <= t);
        assert!(traj.min_grad_norm_from_first <= eps);
    }
}

#[test]
fn envelope_gradient_matches_finite_differences() {
    let specs = [
        build_problem("rosenbrock", &json!({"dim": 2})).unwrap(),
        build_problem("saddle_quadratic", &json!({})).unwrap(),
        build_problem("sigmoid_loss", &json!({"dim": 3, "n_samples": 30})).unwrap(),
    ];
    for spec in &specs {
        let cfg = MoreauConfig::new(1.0 / (4.0 * spec.lipschitz_l));
        let mut rng = RngStream::new(17, 0);
        for _ in 0..10 {
            let x = box_point(spec, &mut rng);
            let p = prox_moreau(spec, &x, &cfg).unwrap();
            let h = 1e3 * default_fd_step(&x);
            let fd = finite_diff_grad(|y| prox_moreau(spec, y, &cfg).unwrap().f_gamma, &x, h).unwrap();
            let err = fd.sub(&p.grad_f_gamma).norm() / (1.0 + p.grad_f_gamma.norm());
            assert!(err <= 1e-3, "{}: {err}", spec.name);
        }
    }
}

#[test]
fn quadratic_prox_matches_closed_form() {
    // (A + I/γ) x̂ = b + x/γ for f = ½xᵀAx − bᵀx with diagonal A
    let d = [0.5, 1.0, 3.0];
    let b = [0.1, -0.2, 0.3];
    let spec = build_problem("quadratic", &json!({"diag": d, "b": b})).unwrap();
    let gamma = 0.2;
    let cfg = MoreauConfig::new(gamma);
    let mut rng = RngStream::new(2, 2);
    for _ in 0..50 {
        let x = box_point(&spec, &mut rng);
        let p = prox_moreau(&spec, &x, &cfg).unwrap();
        for i in 0..3 {
            let exact = (x[i] / gamma + b[i]) / (d[i] + 1.0 / gamma);
            assert!((p.x_hat[i] - exact).abs() <= 2.0 * cfg.tolerance_at(&x));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bound_holds_for_random_quadratics(
        d in prop::collection::vec(0.05f64..5.0, 1..5),
        seed in any::<u64>(),
        k in 12.0f64..100.0,
        t in 1usize..400,
    ) {
        let spec = build_problem("quadratic", &json!({"diag": d})).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let x0 = box_point(&spec, &mut rng);
        let eta = 1.0 / (k * spec.lipschitz_l);
        let traj = run_gde(&spec, &x0, &GdeConfig::new(eta, t)).unwrap();
        let rep = bound_thm1(
            spec.initial_gap(&x0).unwrap(),
            eta,
            t,
            spec.lipschitz_l,
            traj.sum_step_diff_sq,
            traj.min_grad_norm_from_first.powi(2),
        )
        .unwrap();
        prop_assert!(rep.pass, "{:?}", rep);
    }
}
