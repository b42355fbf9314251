//! Python bindings. Structured results cross the boundary as JSON and come
//! back as plain dicts and lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use extragrad::harness::{self, RunOptions};
use extragrad::optimizers::{stage_probabilities, StagewiseRun};
use extragrad::problems::{check_grad_default, ObjectiveSpec, StochasticOracle};
use extragrad::theory::{self, lemma31_instance, MoreauConfig};
use extragrad::{Error, G0Mode, GdeConfig, RngStream, SgdeConfig, StagewiseConfig, Trajectory, Vector};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Argument(_)
        | Error::DimensionMismatch { .. }
        | Error::Config { .. }
        | Error::Precondition(_)
        | Error::Json(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn vector(xs: Vec<f64>) -> PyResult<Vector> {
    Vector::new(xs).map_err(to_py)
}

fn to_object<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_object(py: Python<'_>, obj: Option<&Bound<'_, PyAny>>) -> PyResult<Value> {
    match obj {
        None => Ok(Value::Null),
        Some(o) => {
            let text: String = py.import("json")?.call_method1("dumps", (o,))?.extract()?;
            serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
        }
    }
}

fn g0_mode(name: &str) -> PyResult<G0Mode> {
    match name {
        "zero" => Ok(G0Mode::Zero),
        "gradient" => Ok(G0Mode::Gradient),
        other => Err(PyValueError::new_err(format!("g0_mode must be 'zero' or 'gradient', got '{other}'"))),
    }
}

fn trajectory_value(t: &Trajectory) -> Value {
    json!({
        "t": t.records.iter().map(|r| r.t).collect::<Vec<_>>(),
        "x": t.records.iter().map(|r| r.x.as_slice().to_vec()).collect::<Vec<_>>(),
        "f": t.records.iter().map(|r| r.f).collect::<Vec<_>>(),
        "grad_norm": t.records.iter().map(|r| r.grad_norm).collect::<Vec<_>>(),
        "step_diff_sq": t.records.iter().map(|r| r.step_diff_sq).collect::<Vec<_>>(),
        "iterations": t.iterations,
        "min_grad_norm": t.min_grad_norm_from_first,
        "sum_step_diff_sq": t.sum_step_diff_sq,
        "final_x": t.final_x.as_slice(),
        "grad_evals": t.grad_evals,
    })
}

/// A registered test problem.
#[pyclass(module = "extragrad_py", frozen)]
struct Problem {
    spec: ObjectiveSpec,
}

#[pymethods]
impl Problem {
    #[new]
    #[pyo3(signature = (name, params=None))]
    fn new(py: Python<'_>, name: &str, params: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let params = from_object(py, params)?;
        Ok(Problem {
            spec: extragrad::build_problem(name, &params).map_err(to_py)?,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.spec.name
    }

    #[getter]
    fn dim(&self) -> usize {
        self.spec.dim
    }

    #[getter]
    fn lipschitz_l(&self) -> f64 {
        self.spec.lipschitz_l
    }

    #[getter]
    fn f_opt(&self) -> Option<f64> {
        self.spec.f_opt
    }

    #[getter]
    fn gap_bound(&self) -> Option<f64> {
        self.spec.gap_bound
    }

    #[getter]
    fn test_box(&self) -> f64 {
        self.spec.test_box
    }

    fn f(&self, x: Vec<f64>) -> PyResult<f64> {
        self.spec.eval_f(&vector(x)?).map_err(to_py)
    }

    fn grad(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.spec.eval_grad(&vector(x)?).map_err(to_py)?.into_inner())
    }

    /// Returns (max_rel_err, pass).
    #[pyo3(signature = (x, rel_tol=1e-4))]
    fn check_grad(&self, x: Vec<f64>, rel_tol: f64) -> PyResult<(f64, bool)> {
        let c = check_grad_default(&self.spec, &vector(x)?, rel_tol).map_err(to_py)?;
        Ok((c.max_rel_err, c.pass))
    }

    fn __repr__(&self) -> String {
        format!("Problem(name={:?}, dim={}, L={})", self.spec.name, self.spec.dim, self.spec.lipschitz_l)
    }
}

fn noisy(problem: &Problem, sigma: f64) -> PyResult<StochasticOracle> {
    if sigma == 0.0 {
        Ok(StochasticOracle::exact(problem.spec.clone()))
    } else {
        StochasticOracle::additive_gaussian(problem.spec.clone(), sigma).map_err(to_py)
    }
}

#[pyfunction]
#[pyo3(signature = (problem, x0, eta, iterations, g0_mode="zero", record_every=1, target_grad_norm=None))]
fn run_gde(
    py: Python<'_>,
    problem: &Problem,
    x0: Vec<f64>,
    eta: f64,
    iterations: usize,
    g0_mode: &str,
    record_every: usize,
    target_grad_norm: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let cfg = GdeConfig {
        record_every,
        target_grad_norm,
        ..GdeConfig::new(eta, iterations).with_g0(self::g0_mode(g0_mode)?)
    };
    let t = extragrad::run_gde(&problem.spec, &vector(x0)?, &cfg).map_err(to_py)?;
    to_object(py, &trajectory_value(&t))
}

#[pyfunction]
#[pyo3(signature = (problem, x0, eta, iterations, batch_m, sigma, seed, stream=0, g0_mode="zero", record_every=1))]
fn run_minibatch_sgde(
    py: Python<'_>,
    problem: &Problem,
    x0: Vec<f64>,
    eta: f64,
    iterations: usize,
    batch_m: usize,
    sigma: f64,
    seed: u64,
    stream: u64,
    g0_mode: &str,
    record_every: usize,
) -> PyResult<Py<PyAny>> {
    let oracle = noisy(problem, sigma)?;
    let cfg = SgdeConfig {
        g0_mode: self::g0_mode(g0_mode)?,
        record_every,
        ..SgdeConfig::new(eta, iterations, batch_m)
    };
    let mut rng = RngStream::new(seed, stream);
    let t = extragrad::run_minibatch_sgde(&oracle, &vector(x0)?, &cfg, &mut rng).map_err(to_py)?;
    to_object(py, &trajectory_value(&t))
}

fn stagewise_value(run: &StagewiseRun) -> Value {
    json!({
        "tau": run.tau,
        "selected": run.selected.as_slice(),
        "grad_evals": run.grad_evals(),
        "stages": run.stages.iter().map(|s| json!({
            "s": s.s,
            "eta_s": s.eta_s,
            "T_s": s.iterations,
            "w_s": s.weight,
            "d_ts": s.d_ts,
            "x_end": s.x_end.as_slice(),
        })).collect::<Vec<_>>(),
    })
}

#[pyfunction]
#[pyo3(signature = (problem, x0, sigma, stages, seed, c=1.0, alpha=1.0, gamma=None, stream=0))]
fn run_stagewise(
    py: Python<'_>,
    problem: &Problem,
    x0: Vec<f64>,
    sigma: f64,
    stages: usize,
    seed: u64,
    c: f64,
    alpha: f64,
    gamma: Option<f64>,
    stream: u64,
) -> PyResult<Py<PyAny>> {
    let oracle = noisy(problem, sigma)?;
    let mut cfg = StagewiseConfig::for_lipschitz(problem.spec.lipschitz_l, c, alpha, stages);
    if let Some(g) = gamma {
        cfg.gamma = g;
    }
    let mut rng = RngStream::new(seed, stream);
    let run = extragrad::run_stagewise(&oracle, &vector(x0)?, &cfg, &mut rng).map_err(to_py)?;
    to_object(py, &stagewise_value(&run))
}

#[pyfunction]
fn bound_thm1(
    py: Python<'_>,
    delta0: f64,
    eta: f64,
    iterations: usize,
    lipschitz_l: f64,
    sum_step_diff_sq: f64,
    observed_min_grad_sq: f64,
) -> PyResult<Py<PyAny>> {
    let r = theory::bound_thm1(delta0, eta, iterations, lipschitz_l, sum_step_diff_sq, observed_min_grad_sq)
        .map_err(to_py)?;
    to_object(py, &r)
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn bound_thm2(
    py: Python<'_>,
    delta0: f64,
    eta: f64,
    iterations: usize,
    lipschitz_l: f64,
    g2: f64,
    batch_m: u64,
    sum_step_diff_sq_mean: f64,
    observed_mean_min_grad_sq: f64,
    statistical_slack: f64,
) -> PyResult<Py<PyAny>> {
    let r = theory::bound_thm2(
        delta0,
        eta,
        iterations,
        lipschitz_l,
        g2,
        batch_m,
        sum_step_diff_sq_mean,
        observed_mean_min_grad_sq,
        statistical_slack,
    )
    .map_err(to_py)?;
    to_object(py, &r)
}

#[pyfunction]
#[pyo3(signature = (problem, x, gamma, inner_tol=None))]
fn prox_moreau(py: Python<'_>, problem: &Problem, x: Vec<f64>, gamma: f64, inner_tol: Option<f64>) -> PyResult<Py<PyAny>> {
    let cfg = MoreauConfig {
        inner_tol,
        ..MoreauConfig::new(gamma)
    };
    let p = theory::prox_moreau(&problem.spec, &vector(x)?, &cfg).map_err(to_py)?;
    to_object(
        py,
        &json!({
            "x_hat": p.x_hat.as_slice(),
            "f_gamma": p.f_gamma,
            "grad_f_gamma": p.grad_f_gamma.as_slice(),
            "inner_iterations": p.inner_iterations,
            "residual": p.residual,
        }),
    )
}

/// Returns (lhs, rhs) of the projection inequality for one instance.
#[pyfunction]
fn lemma31(z: Vec<f64>, xi: Vec<f64>, zeta: Vec<f64>, u: Vec<f64>, gamma: f64, radius: f64) -> PyResult<(f64, f64)> {
    let inst = lemma31_instance(&vector(z)?, &vector(xi)?, &vector(zeta)?, &vector(u)?, gamma, radius).map_err(to_py)?;
    Ok((inst.lhs, inst.rhs))
}

#[pyfunction]
#[pyo3(signature = (dim, radius, gamma, trials, seed, stream=0))]
fn check_lemma31(
    py: Python<'_>,
    dim: usize,
    radius: f64,
    gamma: f64,
    trials: usize,
    seed: u64,
    stream: u64,
) -> PyResult<Py<PyAny>> {
    let mut rng = RngStream::new(seed, stream);
    let r = theory::check_lemma31(dim, radius, gamma, trials, &mut rng).map_err(to_py)?;
    to_object(py, &r)
}

#[pyfunction]
#[pyo3(signature = (lipschitz_l, stages, c=1.0, alpha=1.0))]
fn schedule(py: Python<'_>, lipschitz_l: f64, stages: usize, c: f64, alpha: f64) -> PyResult<Py<PyAny>> {
    let cfg = StagewiseConfig::for_lipschitz(lipschitz_l, c, alpha, stages);
    cfg.validate(lipschitz_l).map_err(to_py)?;
    let probs = stage_probabilities(alpha, stages).map_err(to_py)?;
    let rows: Vec<Value> = (1..=stages)
        .map(|s| {
            json!({
                "s": s,
                "eta_s": cfg.stage_eta(s),
                "T_s": cfg.stage_iterations(s),
                "w_s": cfg.stage_weight(s),
                "p_s": probs[s - 1],
            })
        })
        .collect();
    to_object(py, &rows)
}

/// Runs an experiment config; returns the exit code and output paths.
#[pyfunction]
#[pyo3(signature = (path, out_dir=None, threads=None))]
fn run_config(py: Python<'_>, path: PathBuf, out_dir: Option<PathBuf>, threads: Option<usize>) -> PyResult<Py<PyAny>> {
    let cfg = harness::parse_config(&path).map_err(to_py)?;
    let opts = RunOptions { threads, out_dir };
    let (outcome, files) = py
        .detach(|| harness::run_experiment(&cfg, &opts))
        .map_err(to_py)?;
    to_object(
        py,
        &json!({
            "exit_code": outcome.exit_code(),
            "checks_pass": outcome.checks_pass(),
            "trajectory": files.trajectory,
            "ledger": files.ledger,
        }),
    )
}

#[pyfunction]
fn stream_id(run_id: &str, seed: u64) -> u64 {
    harness::stream_id(run_id, seed)
}

#[pymodule]
fn extragrad_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_function(wrap_pyfunction!(run_gde, m)?)?;
    m.add_function(wrap_pyfunction!(run_minibatch_sgde, m)?)?;
    m.add_function(wrap_pyfunction!(run_stagewise, m)?)?;
    m.add_function(wrap_pyfunction!(bound_thm1, m)?)?;
    m.add_function(wrap_pyfunction!(bound_thm2, m)?)?;
    m.add_function(wrap_pyfunction!(prox_moreau, m)?)?;
    m.add_function(wrap_pyfunction!(lemma31, m)?)?;
    m.add_function(wrap_pyfunction!(check_lemma31, m)?)?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(stream_id, m)?)?;
    Ok(())
}
