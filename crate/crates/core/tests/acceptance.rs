//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use common::{rotated_matrix, v};
use extragrad::harness::{execute, parse_config, parse_config_str, run_experiment, RunOptions};
use extragrad::optimizers::verify_extrapolation_identities;
use extragrad::problems::check_grad_default;
use extragrad::theory::{lemma31_instance, thm1_iterations_for};
use extragrad::{
    bound_thm1, build_problem, check_lemma31, check_moreau_relations, prox_moreau, run_gde,
    run_minibatch_sgde, G0Mode, GdeConfig, MoreauConfig, ObjectiveSpec, RngStream, SampleStats,
    SgdeConfig, StochasticOracle, Vector,
};
use nalgebra::{DMatrix, DVector};
use serde_json::json;

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn box_points(spec: &ObjectiveSpec, n: usize, seed: u64) -> Vec<Vector> {
    let mut rng = RngStream::new(seed, 0xacce);
    (0..n)
        .map(|_| rng.uniform_in_box(spec.dim, -spec.test_box, spec.test_box))
        .collect()
}

/// Dense quadratic with eigenvalues 0.1, 1.2, …, 10, so L = 10 exactly.
fn dense_quadratic() -> ObjectiveSpec {
    let eigs: Vec<f64> = (0..10).map(|i| 0.1 + 1.1 * i as f64).collect();
    build_problem("quadratic", &json!({"matrix": rotated_matrix(&eigs, 11)})).unwrap()
}

fn deterministic_problems() -> Vec<ObjectiveSpec> {
    vec![dense_quadratic(), build_problem("rosenbrock", &json!({"dim": 2})).unwrap()]
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let (mut runs, mut worst) = (0, f64::INFINITY);
    for spec in deterministic_problems() {
        ensure((spec.lipschitz_l - 10.0).abs() < 1e-9 || spec.name == "rosenbrock", || {
            format!("quadratic L = {}", spec.lipschitz_l)
        })?;
        for x0 in box_points(&spec, 5, 1) {
            let delta0 = spec.initial_gap(&x0).unwrap();
            for k in [12.0, 24.0] {
                let eta = 1.0 / (k * spec.lipschitz_l);
                for t in [100, 1000, 10_000] {
                    let traj = run_gde(&spec, &x0, &GdeConfig::new(eta, t)).map_err(|e| e.to_string())?;
                    let rep = bound_thm1(
                        delta0,
                        eta,
                        t,
                        spec.lipschitz_l,
                        traj.sum_step_diff_sq,
                        traj.min_grad_norm_from_first.powi(2),
                    )
                    .map_err(|e| e.to_string())?;
                    ensure(rep.pass, || format!("{} eta=1/({k}L) T={t}: {rep:?}", spec.name))?;
                    worst = worst.min(rep.slack);
                    runs += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2}s (budget 5s)"))?;
    Ok(format!("{runs} runs, smallest slack {worst:.3e}, {secs:.2}s"))
}

fn criterion_2() -> Verdict {
    let mut runs = 0;
    let mut longest = 0;
    for spec in deterministic_problems() {
        for x0 in box_points(&spec, 2, 2) {
            let delta0 = spec.initial_gap(&x0).unwrap();
            for k in [12.0, 24.0] {
                let eta = 1.0 / (k * spec.lipschitz_l);
                for eps in [1e-1, 1e-2, 1e-3] {
                    let budget = thm1_iterations_for(delta0, eta, eps);
                    // the minimum over t ≤ T is reached at the first t with ‖∇f‖ ≤ ε
                    let cfg = GdeConfig {
                        record_every: 1 << 20,
                        target_grad_norm: Some(eps),
                        ..GdeConfig::new(eta, budget.min(usize::MAX as f64) as usize)
                    };
                    let traj = run_gde(&spec, &x0, &cfg).map_err(|e| e.to_string())?;
                    ensure(traj.min_grad_norm_from_first <= eps, || {
                        format!(
                            "{} eps={eps}: min grad norm {} after {} iterations",
                            spec.name, traj.min_grad_norm_from_first, traj.iterations
                        )
                    })?;
                    ensure((traj.iterations as f64) <= budget, || "iteration budget exceeded".into())?;
                    longest = longest.max(traj.iterations);
                    runs += 1;
                }
            }
        }
    }
    Ok(format!("{runs} runs reached their tolerance, longest {longest} iterations"))
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let mut parts = Vec::new();
    for m in [10, 100] {
        let cfg = parse_config_str(
            &json!({
                "schema_version": 1,
                "name": format!("sgde-m{m}"),
                "problem": {"name": "quadratic", "params": {"dim": 10}},
                "noise": {"model": "additive_gaussian", "sigma": 0.3},
                "algorithm": {"name": "minibatch_sgde", "eta": {"per_l": 12}, "T": 2000, "m": m},
                "seeds": (1..=30).collect::<Vec<u64>>(),
                "outputs": {"record_every": 100},
                "checks": {"thm2": true}
            })
            .to_string(),
        )
        .map_err(|e| e.to_string())?;
        ensure((cfg.oracle.variance_bound_g2 - 0.9).abs() < 1e-12, || "G² != dim σ²".into())?;
        let out = execute(&cfg, None).map_err(|e| e.to_string())?;
        ensure(out.failures().next().is_none(), || "a seed failed".into())?;
        let rep = out.bounds[0].report.clone().ok_or("no bound report")?;
        ensure(rep.pass, || format!("m={m}: {rep:?}"))?;
        parts.push(format!("m={m}: mean {:.3e} <= {:.3e} (+{:.1e})", rep.lhs, rep.rhs, rep.tolerance));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.2}s (budget 30s)"))?;
    Ok(format!("{}, {secs:.2}s", parts.join("; ")))
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let cfg = parse_config_str(
        &json!({
            "schema_version": 1,
            "name": "stagewise",
            "problem": {"name": "quadratic", "params": {"dim": 10}},
            "noise": {"model": "additive_gaussian", "sigma": 0.3},
            "algorithm": {"name": "stagewise_sgde", "c": 1.0, "alpha": 2.0, "S": 50},
            "seeds": (1..=30).collect::<Vec<u64>>(),
            "outputs": {"record_every": 1000},
            "checks": {"thm3": true}
        })
        .to_string(),
    )
    .map_err(|e| e.to_string())?;
    let out = execute(&cfg, None).map_err(|e| e.to_string())?;
    ensure(out.failures().next().is_none(), || "a seed failed".into())?;
    let rep = out.bounds[0].report.clone().ok_or("no bound report")?;
    ensure(rep.alpha_branch.as_deref() == Some("alpha>=1"), || "wrong alpha branch".into())?;
    ensure(rep.inputs.gamma == Some(0.25), || "gamma != 1/(4L)".into())?;
    ensure(rep.pass, || format!("{rep:?}"))?;
    let converted = rep.converted_rhs.ok_or("no converted rhs")?;
    ensure(rep.lhs <= converted + rep.tolerance, || format!("converted form violated: {rep:?}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.2}s (budget 60s)"))?;
    Ok(format!(
        "mean {:.3e} <= {:.3e} (+{:.1e}), converted {:.3e}, {secs:.2}s",
        rep.lhs, rep.rhs, rep.tolerance, converted
    ))
}

fn criterion_5() -> Verdict {
    let mut worst = f64::INFINITY;
    let mut trials = 0;
    for d in [1, 5, 20] {
        for radius in [1.0, 10.0] {
            for gamma in [0.1, 1.0] {
                let mut rng = RngStream::new(d as u64, (radius * 100.0 + gamma * 10.0) as u64);
                let rep = check_lemma31(d, radius, gamma, 10_000, &mut rng).map_err(|e| e.to_string())?;
                ensure(rep.pass, || format!("{rep:?}"))?;
                worst = worst.min(rep.worst_slack);
                trials += rep.trials;
            }
        }
    }
    ensure(worst >= -1e-9, || format!("worst slack {worst}"))?;

    let inst = lemma31_instance(&v(&[0.0]), &v(&[0.5]), &v(&[0.3]), &v(&[0.0]), 1.0, 10.0).map_err(|e| e.to_string())?;
    ensure((inst.lhs + 0.15).abs() <= 1e-12 && (inst.rhs + 0.15).abs() <= 1e-12, || {
        format!("first instance: {} / {}", inst.lhs, inst.rhs)
    })?;
    let z = v(&[0.0]);
    let one = v(&[1.0]);
    let x = lemma31_instance(&z, &one, &one, &z, 1.0, 10.0).map_err(|e| e.to_string())?.x;
    let inst = lemma31_instance(&z, &one, &one, &x, 1.0, 10.0).map_err(|e| e.to_string())?;
    ensure(inst.lhs.abs() <= 1e-12 && inst.rhs.abs() <= 1e-12, || {
        format!("second instance: {} / {}", inst.lhs, inst.rhs)
    })?;
    Ok(format!("{trials} trials, worst slack {worst:.3e}; both equality instances exact"))
}

fn criterion_6() -> Verdict {
    // quadratic against (A + I/γ)⁻¹(b + x/γ)
    let eigs = [0.2, 0.7, 1.5, 3.0, 4.0];
    let a = rotated_matrix(&eigs, 3);
    let b = [0.3, -0.1, 0.5, 0.0, -0.4];
    let spec = build_problem("quadratic", &json!({"matrix": a, "b": b})).unwrap();
    let gamma = 1.0 / (4.0 * spec.lipschitz_l);
    let cfg = MoreauConfig::new(gamma);
    let n = spec.dim;
    let mut m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    for i in 0..n {
        m[(i, i)] += 1.0 / gamma;
    }
    let lu = m.lu();
    let mut worst_ratio: f64 = 0.0;
    for x in box_points(&spec, 100, 6) {
        let rhs = DVector::from_fn(n, |i, _| b[i] + x[i] / gamma);
        let exact = lu.solve(&rhs).ok_or("singular system")?;
        let p = prox_moreau(&spec, &x, &cfg).map_err(|e| e.to_string())?;
        let err = (0..n).map(|i| (p.x_hat[i] - exact[i]).powi(2)).sum::<f64>().sqrt();
        let tol = cfg.tolerance_at(&x);
        ensure(err <= 2.0 * tol, || format!("prox error {err:e} > 2·{tol:e}"))?;
        worst_ratio = worst_ratio.max(err / tol);
    }

    let mut reports = Vec::new();
    for spec in [
        build_problem("rosenbrock", &json!({"dim": 2})).unwrap(),
        build_problem("saddle_quadratic", &json!({})).unwrap(),
    ] {
        let cfg = MoreauConfig::new(1.0 / (4.0 * spec.lipschitz_l));
        let rep = check_moreau_relations(&spec, &box_points(&spec, 100, 7), &cfg).map_err(|e| e.to_string())?;
        ensure(rep.pass, || format!("{}: {rep:?}", spec.name))?;
        reports.push(spec.name.clone());
    }
    Ok(format!(
        "closed-form prox within {worst_ratio:.2}·tol at 100 points; relations hold on {}",
        reports.join(", ")
    ))
}

fn criterion_7() -> Verdict {
    let mut checked = 0;
    let problems = [
        dense_quadratic(),
        build_problem("rosenbrock", &json!({"dim": 3})).unwrap(),
        build_problem("saddle_quadratic", &json!({"diag": [1.0, -0.5]})).unwrap(),
        build_problem("sigmoid_loss", &json!({"dim": 4, "n_samples": 50})).unwrap(),
    ];
    for spec in &problems {
        for x0 in box_points(spec, 3, 8) {
            let eta = 1.0 / (12.0 * spec.lipschitz_l);
            for mode in [G0Mode::Zero, G0Mode::Gradient] {
                let gde = run_gde(spec, &x0, &GdeConfig::new(eta, 500).with_g0(mode)).map_err(|e| e.to_string())?;
                let rep = verify_extrapolation_identities(&gde).map_err(|e| e.to_string())?;
                ensure(rep.bitwise, || format!("{} GDE identities: {rep:?}", spec.name))?;
                checked += rep.checked;

                let noisy = StochasticOracle::additive_gaussian(spec.clone(), 0.5).unwrap();
                let mut rng = RngStream::new(checked as u64, 1);
                let cfg = SgdeConfig {
                    g0_mode: mode,
                    ..SgdeConfig::new(eta, 500, 4)
                };
                let sgde = run_minibatch_sgde(&noisy, &x0, &cfg, &mut rng).map_err(|e| e.to_string())?;
                let rep = verify_extrapolation_identities(&sgde).map_err(|e| e.to_string())?;
                ensure(rep.bitwise, || format!("{} SGDE identities: {rep:?}", spec.name))?;
                checked += rep.checked;

                let exact = StochasticOracle::exact(spec.clone());
                let cfg = SgdeConfig {
                    g0_mode: mode,
                    ..SgdeConfig::new(eta, 500, 1)
                };
                let quiet = run_minibatch_sgde(&exact, &x0, &cfg, &mut rng).map_err(|e| e.to_string())?;
                ensure(
                    quiet.records.len() == gde.records.len()
                        && quiet.records.iter().zip(&gde.records).all(|(a, b)| a.x == b.x && a.z == b.z),
                    || format!("{}: noiseless SGDE differs from GDE", spec.name),
                )?;
            }
        }
    }
    let spec = build_problem("quadratic", &json!({"dim": 1})).unwrap();
    let traj = run_gde(&spec, &v(&[1.0]), &GdeConfig::new(1.0 / 12.0, 2)).map_err(|e| e.to_string())?;
    let r2 = &traj.records[2];
    let z2 = r2.z.as_ref().ok_or("no anchor")?[0];
    ensure((r2.x[0] - 10.0 / 12.0).abs() <= 1e-15 && (z2 - 122.0 / 144.0).abs() <= 1e-15, || {
        format!("x2 = {}, z2 = {z2}", r2.x[0])
    })?;
    Ok(format!("{checked} steps bitwise; noiseless SGDE == GDE; x2 = 10/12, z2 = 122/144"))
}

fn criterion_8() -> Verdict {
    let mut worst: f64 = 0.0;
    let specs = [
        build_problem("quadratic", &json!({"matrix": rotated_matrix(&[0.5, 1.0, 2.0, 4.0], 1), "b": [1.0, 0.0, -1.0, 0.5]})).unwrap(),
        build_problem("rosenbrock", &json!({"dim": 4})).unwrap(),
        build_problem("saddle_quadratic", &json!({"diag": [3.0, -2.0, 1.0]})).unwrap(),
        build_problem("sigmoid_loss", &json!({})).unwrap(),
    ];
    for spec in &specs {
        for x in box_points(spec, 100, 9) {
            let c = check_grad_default(spec, &x, 1e-4).map_err(|e| e.to_string())?;
            ensure(c.pass, || format!("{} at {x:?}: {}", spec.name, c.max_rel_err))?;
            worst = worst.max(c.max_rel_err);
        }
    }

    let gauss = StochasticOracle::additive_gaussian(specs[1].clone(), 0.5).unwrap();
    let comps = StochasticOracle::finite_sum(specs[3].clone(), 64, 0).unwrap();
    let n = 100_000;
    let mut max_z: f64 = 0.0;
    for (k, oracle) in [&gauss, &comps].into_iter().enumerate() {
        let x = Vector::filled(oracle.dim(), 0.3);
        let truth = oracle.base.eval_grad(&x).unwrap();
        let mut rng = RngStream::new(40 + k as u64, 2);
        let draws: Vec<Vector> = (0..n).map(|_| oracle.stoch_grad(&x, 1, &mut rng).unwrap()).collect();
        for i in 0..oracle.dim() {
            let col: Vec<f64> = draws.iter().map(|g| g[i]).collect();
            let st = SampleStats::from_slice(&col).unwrap();
            let z = (st.mean - truth[i]).abs() / (st.std / (n as f64).sqrt()).max(1e-300);
            ensure(z <= 4.0, || format!("oracle {k} coordinate {i}: bias z-score {z:.2}"))?;
            max_z = max_z.max(z);
        }
        let err = |m: usize, draws: usize, rng: &mut RngStream| {
            (0..draws)
                .map(|_| oracle.stoch_grad(&x, m, rng).unwrap().dist_sq(&truth))
                .sum::<f64>()
                / draws as f64
        };
        let v1 = err(1, 20_000, &mut rng);
        for m in [10, 100] {
            let ratio = err(m, 4000, &mut rng) * m as f64 / v1;
            ensure((0.7..=1.3).contains(&ratio), || format!("oracle {k}, m={m}: variance ratio {ratio:.3}"))?;
        }
    }
    Ok(format!(
        "400 gradient checks, worst rel err {worst:.2e}; unbiasedness max z {max_z:.2}; 1/m scaling within 30%"
    ))
}

fn criterion_9() -> Verdict {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/acceptance.json");
    let cfg = parse_config(&path).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for threads in [None, Some(1)] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let opts = RunOptions {
            threads,
            out_dir: Some(dir.path().to_path_buf()),
        };
        let (_, files) = run_experiment(&cfg, &opts).map_err(|e| e.to_string())?;
        outputs.push((
            fs::read(&files.trajectory).map_err(|e| e.to_string())?,
            fs::read(&files.ledger).map_err(|e| e.to_string())?,
        ));
    }
    ensure(outputs[0].0 == outputs[1].0, || "trajectory CSV differs".into())?;
    ensure(outputs[0].1 == outputs[1].1, || "ledger differs".into())?;
    Ok(format!(
        "two runs identical ({} CSV bytes, {} ledger bytes)",
        outputs[0].0.len(),
        outputs[0].1.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("deterministic GDE per-run bound", criterion_1),
        ("GDE iteration complexity", criterion_2),
        ("mini-batch SGDE expectation bound", criterion_3),
        ("stagewise SGDE expectation bound", criterion_4),
        ("projection inequality checker", criterion_5),
        ("Moreau envelope relations", criterion_6),
        ("extrapolation identities", criterion_7),
        ("gradient and oracle correctness", criterion_8),
        ("reproducible outputs", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS criterion {}: {name} [{detail}] ({secs:.2}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name} [{why}] ({secs:.2}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
