//! Experiment harness: JSON configs, seeded multi-run execution, trajectory
//! CSV and JSON-lines ledger output, and cross-seed summaries.
//!
//! A config looks like
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "sgde-quadratic",
//!   "problem": {"name": "quadratic", "params": {"dim": 10}},
//!   "noise": {"model": "additive_gaussian", "sigma": 0.3},
//!   "algorithm": {"name": "minibatch_sgde", "eta": {"per_l": 12}, "T": 2000, "m": 10},
//!   "x0": {"random_in_box": {}},
//!   "seeds": [1, 2, 3],
//!   "outputs": {"trajectory_path": "traj.csv", "ledger_path": "ledger.jsonl", "record_every": 10},
//!   "checks": {"thm2": true}
//! }
//! ```
//!
//! `eta` is either a number or `{"per_l": k}` meaning 1/(kL).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::numkit::{RngStream, SampleStats, Vector};
use crate::optimizers::{
    run_gd, run_gde, run_minibatch_sgde, run_sgd, run_stagewise, step_admissible, G0Mode, GdConfig,
    GdeConfig, InnerSolver, SgdeConfig, StageRecord, StagewiseConfig, Trajectory,
};
use crate::problems::{build_problem, check_grad_default, ObjectiveSpec, StochasticOracle};
use crate::theory::{
    bound_thm1, bound_thm2, bound_thm3, check_lemma31, check_moreau_relations, BoundReport,
    MoreauConfig,
};

pub const SCHEMA_VERSION: u32 = 1;

pub const ALGORITHM_NAMES: [&str; 6] = [
    "gd",
    "sgd",
    "gde",
    "minibatch_sgde",
    "stagewise_sgde",
    "stagewise_sgd",
];

/// Stream id of a run: 64-bit FNV-1a over the UTF-8 bytes of `run_id`
/// followed by the little-endian bytes of `seed`.
pub fn stream_id(run_id: &str, seed: u64) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    run_id
        .bytes()
        .chain(seed.to_le_bytes())
        .fold(OFFSET, |h, b| (h ^ b as u64).wrapping_mul(PRIME))
}

// ---------------------------------------------------------------------------
// Config

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    #[serde(default = "default_name")]
    name: String,
    problem: RawProblem,
    #[serde(default)]
    noise: RawNoise,
    algorithm: RawAlgorithm,
    #[serde(default)]
    x0: RawX0,
    seeds: Vec<u64>,
    #[serde(default)]
    outputs: OutputConfig,
    #[serde(default)]
    checks: Checks,
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    name: String,
    #[serde(default)]
    params: Value,
}

#[derive(Deserialize, Default)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
enum RawNoise {
    #[default]
    None,
    AdditiveGaussian {
        sigma: f64,
    },
    FiniteSum {
        #[serde(default = "default_probe_points")]
        probe_points: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_probe_points() -> usize {
    256
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StepSpec {
    Value(f64),
    PerL(PerL),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PerL {
    per_l: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlgorithm {
    name: String,
    eta: Option<StepSpec>,
    #[serde(rename = "T")]
    iterations: Option<usize>,
    #[serde(rename = "m")]
    batch_m: Option<usize>,
    g0_mode: Option<G0Mode>,
    target_grad_norm: Option<f64>,
    gamma: Option<f64>,
    c: Option<f64>,
    alpha: Option<f64>,
    #[serde(rename = "S")]
    stages: Option<usize>,
    delta: Option<f64>,
}

impl RawAlgorithm {
    fn present(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let flags = [
            ("eta", self.eta.is_some()),
            ("T", self.iterations.is_some()),
            ("m", self.batch_m.is_some()),
            ("g0_mode", self.g0_mode.is_some()),
            ("target_grad_norm", self.target_grad_norm.is_some()),
            ("gamma", self.gamma.is_some()),
            ("c", self.c.is_some()),
            ("alpha", self.alpha.is_some()),
            ("S", self.stages.is_some()),
            ("delta", self.delta.is_some()),
        ];
        for (name, set) in flags {
            if set {
                out.push(name);
            }
        }
        out
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RawX0 {
    Explicit(Vec<f64>),
    RandomInBox {
        #[serde(default)]
        half_width: Option<f64>,
    },
}

impl Default for RawX0 {
    fn default() -> Self {
        RawX0::RandomInBox { half_width: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub trajectory_path: PathBuf,
    pub ledger_path: PathBuf,
    pub record_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            trajectory_path: "trajectory.csv".into(),
            ledger_path: "ledger.jsonl".into(),
            record_every: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoreauCheck {
    pub points: usize,
    /// Defaults to 1/(4L).
    pub gamma: Option<f64>,
    pub inner_tol: Option<f64>,
    /// Defaults to the first experiment seed.
    pub seed: Option<u64>,
}

impl Default for MoreauCheck {
    fn default() -> Self {
        MoreauCheck {
            points: 100,
            gamma: None,
            inner_tol: None,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaCheck {
    pub dims: Vec<usize>,
    pub radii: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Trials per (dim, radius, gamma) cell.
    pub trials: usize,
    pub seed: Option<u64>,
}

impl Default for LemmaCheck {
    fn default() -> Self {
        LemmaCheck {
            dims: vec![1, 5, 20],
            radii: vec![1.0, 10.0],
            gammas: vec![0.1, 1.0],
            trials: 1000,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckSpec {
    pub points: usize,
    pub rel_tol: f64,
    pub seed: Option<u64>,
}

impl Default for GradCheckSpec {
    fn default() -> Self {
        GradCheckSpec {
            points: 100,
            rel_tol: 1e-4,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    pub thm1: bool,
    pub thm2: bool,
    pub thm3: bool,
    pub moreau: Option<MoreauCheck>,
    pub lemma31: Option<LemmaCheck>,
    pub grad: Option<GradCheckSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Algorithm {
    Gd {
        eta: f64,
        iterations: usize,
    },
    Sgd {
        eta: f64,
        iterations: usize,
        batch_m: usize,
    },
    Gde {
        eta: f64,
        iterations: usize,
        g0_mode: G0Mode,
        target_grad_norm: Option<f64>,
    },
    MinibatchSgde {
        eta: f64,
        iterations: usize,
        batch_m: usize,
        g0_mode: G0Mode,
    },
    Stagewise {
        gamma: f64,
        c: f64,
        alpha: f64,
        stages: usize,
        inner: InnerSolver,
        /// Overrides the certified initial gap in the stagewise bound.
        delta: Option<f64>,
    },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Gd { .. } => "gd",
            Algorithm::Sgd { .. } => "sgd",
            Algorithm::Gde { .. } => "gde",
            Algorithm::MinibatchSgde { .. } => "minibatch_sgde",
            Algorithm::Stagewise {
                inner: InnerSolver::Sgde,
                ..
            } => "stagewise_sgde",
            Algorithm::Stagewise {
                inner: InnerSolver::Sgd,
                ..
            } => "stagewise_sgd",
        }
    }

    pub fn eta(&self) -> Option<f64> {
        match *self {
            Algorithm::Gd { eta, .. }
            | Algorithm::Sgd { eta, .. }
            | Algorithm::Gde { eta, .. }
            | Algorithm::MinibatchSgde { eta, .. } => Some(eta),
            Algorithm::Stagewise { .. } => None,
        }
    }

    pub fn is_stochastic(&self) -> bool {
        !matches!(self, Algorithm::Gd { .. } | Algorithm::Gde { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum X0Spec {
    Explicit(Vector),
    RandomInBox { half_width: f64 },
}

/// A validated experiment.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem_name: String,
    pub problem_params: Value,
    pub oracle: StochasticOracle,
    pub algorithm: Algorithm,
    pub x0: X0Spec,
    pub seeds: Vec<u64>,
    pub outputs: OutputConfig,
    pub checks: Checks,
    /// Whether η ≤ 1/(12L); `None` for stagewise runs. Inadmissible steps
    /// are allowed but flagged.
    pub eta_admissible: Option<bool>,
}

impl ExperimentConfig {
    pub fn spec(&self) -> &ObjectiveSpec {
        &self.oracle.base
    }

    pub fn set_seeds(&mut self, seeds: Vec<u64>) -> Result<()> {
        validate_seeds(&seeds)?;
        self.seeds = seeds;
        Ok(())
    }

    pub fn set_record_every(&mut self, record_every: usize) -> Result<()> {
        if record_every == 0 {
            return Err(Error::config("outputs.record_every", "must be at least 1"));
        }
        self.outputs.record_every = record_every;
        Ok(())
    }

    pub fn run_id(&self, seed: u64) -> String {
        format!("{}-{}", self.name, seed)
    }
}

fn validate_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::config("seeds", format!("duplicate seed {}", w[0])));
    }
    Ok(())
}

fn at(field: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Argument(m) | Error::Precondition(m) => Error::config(field, m),
        Error::Config { .. } => e,
        other => Error::config(field, other.to_string()),
    }
}

fn positive(field: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(field, format!("must be a positive finite number, got {v}")))
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path.as_ref())?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { "<root>".into() } else { path }, e.inner().to_string())
    })?;
    validate(raw)
}

fn validate(raw: RawConfig) -> Result<ExperimentConfig> {
    if raw.schema_version != SCHEMA_VERSION {
        return Err(Error::config(
            "schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", raw.schema_version),
        ));
    }
    if raw.name.is_empty() || raw.name.contains(['/', '\\', ',', '\n']) {
        return Err(Error::config("name", "must be non-empty without '/', '\\', ',' or newlines"));
    }
    validate_seeds(&raw.seeds)?;
    if raw.outputs.record_every == 0 {
        return Err(Error::config("outputs.record_every", "must be at least 1"));
    }

    let spec = build_problem(&raw.problem.name, &raw.problem.params).map_err(|e| match e {
        Error::Argument(m) if m.starts_with("unknown problem") => Error::config("problem.name", m),
        other => at("problem.params")(other),
    })?;
    let l = spec.lipschitz_l;

    let a = &raw.algorithm;
    let allowed: &[&str] = match a.name.as_str() {
        "gd" => &["eta", "T"],
        "sgd" => &["eta", "T", "m"],
        "gde" => &["eta", "T", "g0_mode", "target_grad_norm"],
        "minibatch_sgde" => &["eta", "T", "m", "g0_mode"],
        "stagewise_sgde" | "stagewise_sgd" => &["gamma", "c", "alpha", "S", "delta"],
        other => {
            return Err(Error::config(
                "algorithm.name",
                format!("unknown algorithm `{other}` (expected one of {ALGORITHM_NAMES:?})"),
            ))
        }
    };
    if let Some(extra) = a.present().into_iter().find(|f| !allowed.contains(f)) {
        return Err(Error::Config {
            field: format!("algorithm.{extra}"),
            message: format!("not used by `{}`", a.name),
        });
    }
    let eta = |a: &RawAlgorithm| -> Result<f64> {
        match &a.eta {
            None => Err(Error::config("algorithm.eta", "required")),
            Some(StepSpec::Value(v)) => positive("algorithm.eta", *v),
            Some(StepSpec::PerL(PerL { per_l })) => {
                positive("algorithm.eta.per_l", *per_l)?;
                positive("algorithm.eta", 1.0 / (per_l * l))
            }
        }
    };
    let iterations = |a: &RawAlgorithm| -> Result<usize> {
        match a.iterations {
            None => Err(Error::config("algorithm.T", "required")),
            Some(0) => Err(Error::config("algorithm.T", "must be at least 1")),
            Some(t) => Ok(t),
        }
    };
    let batch = |a: &RawAlgorithm| -> Result<usize> {
        match a.batch_m.unwrap_or(1) {
            0 => Err(Error::config("algorithm.m", "must be at least 1")),
            m => Ok(m),
        }
    };
    let algorithm = match a.name.as_str() {
        "gd" => Algorithm::Gd {
            eta: eta(a)?,
            iterations: iterations(a)?,
        },
        "sgd" => Algorithm::Sgd {
            eta: eta(a)?,
            iterations: iterations(a)?,
            batch_m: batch(a)?,
        },
        "gde" => Algorithm::Gde {
            eta: eta(a)?,
            iterations: iterations(a)?,
            g0_mode: a.g0_mode.unwrap_or_default(),
            target_grad_norm: a
                .target_grad_norm
                .map(|v| positive("algorithm.target_grad_norm", v))
                .transpose()?,
        },
        "minibatch_sgde" => Algorithm::MinibatchSgde {
            eta: eta(a)?,
            iterations: iterations(a)?,
            batch_m: batch(a)?,
            g0_mode: a.g0_mode.unwrap_or_default(),
        },
        _ => {
            let inner = if a.name == "stagewise_sgde" {
                InnerSolver::Sgde
            } else {
                InnerSolver::Sgd
            };
            let stages = a
                .stages
                .ok_or_else(|| Error::config("algorithm.S", "required"))?;
            let mut cfg = StagewiseConfig::for_lipschitz(l, a.c.unwrap_or(1.0), a.alpha.unwrap_or(1.0), stages);
            if let Some(g) = a.gamma {
                cfg.gamma = g;
            }
            cfg.inner = inner;
            if !(cfg.c > 0.0 && cfg.c <= 1.0) {
                return Err(Error::config("algorithm.c", format!("c must lie in (0, 1], got {}", cfg.c)));
            }
            if !(cfg.alpha > 0.0 && cfg.alpha.is_finite()) {
                return Err(Error::config("algorithm.alpha", format!("must be positive, got {}", cfg.alpha)));
            }
            if stages == 0 {
                return Err(Error::config("algorithm.S", "must be at least 1"));
            }
            positive("algorithm.gamma", cfg.gamma)?;
            cfg.validate(l).map_err(at("algorithm.gamma"))?;
            let delta = a.delta.map(|d| {
                if d >= 0.0 && d.is_finite() {
                    Ok(d)
                } else {
                    Err(Error::config("algorithm.delta", "must be a finite non-negative number"))
                }
            });
            Algorithm::Stagewise {
                gamma: cfg.gamma,
                c: cfg.c,
                alpha: cfg.alpha,
                stages,
                inner,
                delta: delta.transpose()?,
            }
        }
    };

    let oracle = match raw.noise {
        RawNoise::None => StochasticOracle::exact(spec),
        _ if !algorithm.is_stochastic() => {
            return Err(Error::config(
                "noise.model",
                format!("`{}` is deterministic and takes no noise model", algorithm.name()),
            ))
        }
        RawNoise::AdditiveGaussian { sigma } => {
            StochasticOracle::additive_gaussian(spec, sigma).map_err(at("noise.sigma"))?
        }
        RawNoise::FiniteSum { probe_points, seed } => {
            StochasticOracle::finite_sum(spec, probe_points, seed).map_err(at("noise.model"))?
        }
    };
    let spec = &oracle.base;

    let x0 = match raw.x0 {
        RawX0::Explicit(v) => {
            let v = Vector::new(v).map_err(at("x0.explicit"))?;
            if v.dim() != spec.dim {
                return Err(Error::config(
                    "x0.explicit",
                    format!("length {} does not match dimension {}", v.dim(), spec.dim),
                ));
            }
            X0Spec::Explicit(v)
        }
        RawX0::RandomInBox { half_width } => X0Spec::RandomInBox {
            half_width: positive("x0.random_in_box.half_width", half_width.unwrap_or(spec.test_box))?,
        },
    };

    let checks = raw.checks;
    if checks.thm1 {
        if !matches!(algorithm, Algorithm::Gde { .. }) {
            return Err(Error::config("checks.thm1", "applies to `gde` only"));
        }
        if spec.f_opt.is_none() {
            return Err(Error::config("checks.thm1", format!("`{}` has no certified minimum value", spec.name)));
        }
    }
    if checks.thm2 {
        if !matches!(algorithm, Algorithm::MinibatchSgde { .. }) {
            return Err(Error::config("checks.thm2", "applies to `minibatch_sgde` only"));
        }
        if spec.f_opt.is_none() {
            return Err(Error::config("checks.thm2", format!("`{}` has no certified minimum value", spec.name)));
        }
    }
    if checks.thm1 || checks.thm2 {
        let eta = algorithm.eta().unwrap_or(0.0);
        if !step_admissible(eta, spec.lipschitz_l) {
            return Err(Error::config(
                "algorithm.eta",
                format!(
                    "bound checks need eta <= 1/(12L) = {}, got {eta}",
                    1.0 / (12.0 * spec.lipschitz_l)
                ),
            ));
        }
    }
    if checks.thm3 {
        match &algorithm {
            Algorithm::Stagewise {
                inner: InnerSolver::Sgde,
                delta,
                ..
            } => {
                if delta.is_none() {
                    if spec.gap_bound.is_none() {
                        return Err(Error::config(
                            "checks.thm3",
                            format!("`{}` has no certified gap; set algorithm.delta", spec.name),
                        ));
                    }
                    let inside = match &x0 {
                        X0Spec::Explicit(v) => v.norm_inf() <= spec.test_box,
                        X0Spec::RandomInBox { half_width } => *half_width <= spec.test_box,
                    };
                    if !inside {
                        return Err(Error::config(
                            "x0",
                            "the certified gap only covers starting points inside the test box",
                        ));
                    }
                }
            }
            _ => return Err(Error::config("checks.thm3", "applies to `stagewise_sgde` only")),
        }
    }
    if let Some(m) = &checks.moreau {
        if m.points == 0 {
            return Err(Error::config("checks.moreau.points", "must be at least 1"));
        }
        if let Some(g) = m.gamma {
            positive("checks.moreau.gamma", g)?;
        }
    }
    if let Some(lc) = &checks.lemma31 {
        if lc.trials == 0 || lc.dims.is_empty() || lc.radii.is_empty() || lc.gammas.is_empty() {
            return Err(Error::config("checks.lemma31", "needs trials >= 1 and non-empty grids"));
        }
    }
    if let Some(g) = &checks.grad {
        if g.points == 0 {
            return Err(Error::config("checks.grad.points", "must be at least 1"));
        }
        positive("checks.grad.rel_tol", g.rel_tol)?;
    }

    let eta_admissible = algorithm.eta().map(|eta| step_admissible(eta, spec.lipschitz_l));
    Ok(ExperimentConfig {
        name: raw.name,
        problem_name: raw.problem.name,
        problem_params: raw.problem.params,
        oracle,
        algorithm,
        x0,
        seeds: raw.seeds,
        outputs: raw.outputs,
        checks,
        eta_admissible,
    })
}

// ---------------------------------------------------------------------------
// Execution

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub stage: Option<usize>,
    pub t: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub step_diff_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub iterations: usize,
    /// min over t ≥ 1 of ‖∇f(x_t)‖.
    pub min_grad_norm: f64,
    pub sum_step_diff_sq: f64,
    pub final_f: f64,
    pub initial_gap: Option<f64>,
    pub grad_evals: Option<u64>,
    pub diagnostic_evals: Option<u64>,
    pub tau: Option<usize>,
    pub grad_sq_at_tau: Option<f64>,
    /// Not written to the ledger, which must be reproducible.
    #[serde(skip)]
    pub wall_time_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub run_id: String,
    pub seed: u64,
    pub algorithm: String,
    pub rows: Vec<RunRow>,
    pub summary: RunSummary,
    pub stages: Vec<StageRecord>,
}

impl RunRecord {
    /// Rebuilds a record from trajectory rows. Minima and sums are taken
    /// over the stored rows only, so decimated files give coarser minima.
    pub fn from_rows(run_id: String, seed: u64, algorithm: String, rows: Vec<RunRow>) -> Result<Self> {
        let last = rows
            .last()
            .ok_or_else(|| Error::arg(format!("run `{run_id}` has no rows")))?;
        let mut iterations = 0;
        let mut stage_max: Option<(Option<usize>, usize)> = None;
        for r in &rows {
            match stage_max {
                Some((s, t)) if s == r.stage => stage_max = Some((s, t.max(r.t))),
                Some((_, t)) => {
                    iterations += t;
                    stage_max = Some((r.stage, r.t));
                }
                None => stage_max = Some((r.stage, r.t)),
            }
        }
        iterations += stage_max.map(|(_, t)| t).unwrap_or(0);
        let summary = RunSummary {
            iterations,
            min_grad_norm: rows
                .iter()
                .filter(|r| r.t >= 1)
                .map(|r| r.grad_norm)
                .fold(f64::INFINITY, f64::min),
            sum_step_diff_sq: rows.iter().map(|r| r.step_diff_sq).sum(),
            final_f: last.f,
            initial_gap: None,
            grad_evals: None,
            diagnostic_evals: None,
            tau: None,
            grad_sq_at_tau: None,
            wall_time_s: None,
        };
        Ok(RunRecord {
            run_id,
            seed,
            algorithm,
            rows,
            summary,
            stages: Vec::new(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunFailure {
    pub run_id: String,
    pub seed: u64,
    pub message: String,
    /// Rows of the partial trajectory when the run diverged.
    pub partial_rows: Vec<RunRow>,
}

/// A bound evaluated for one run or across seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    /// A run id, or `aggregate` for seed-mean bounds.
    pub scope: String,
    pub theorem_id: u8,
    pub report: Option<BoundReport>,
    pub error: Option<String>,
}

impl BoundEntry {
    pub fn pass(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.pass)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: String,
    pub pass: bool,
    pub detail: Value,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    /// One entry per seed, in config order.
    pub runs: Vec<std::result::Result<RunRecord, RunFailure>>,
    pub bounds: Vec<BoundEntry>,
    pub checks: Vec<CheckOutcome>,
}

impl ExperimentOutcome {
    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = &RunFailure> {
        self.runs.iter().filter_map(|r| r.as_ref().err())
    }

    pub fn checks_pass(&self) -> bool {
        self.bounds.iter().all(BoundEntry::pass) && self.checks.iter().all(|c| c.pass)
    }

    /// 0 when everything passed, 3 when a run failed, 1 when a check failed.
    pub fn exit_code(&self) -> i32 {
        if self.failures().next().is_some() {
            3
        } else if !self.checks_pass() {
            1
        } else {
            0
        }
    }
}

fn rows_from(traj: &Trajectory, stage: Option<usize>) -> Vec<RunRow> {
    traj.records
        .iter()
        .map(|r| RunRow {
            stage,
            t: r.t,
            f: r.f,
            grad_norm: r.grad_norm,
            step_diff_sq: r.step_diff_sq,
        })
        .collect()
}

fn initial_point(cfg: &ExperimentConfig, run_id: &str, seed: u64) -> Vector {
    match &cfg.x0 {
        X0Spec::Explicit(v) => v.clone(),
        X0Spec::RandomInBox { half_width } => {
            let mut rng = RngStream::new(seed, stream_id(&format!("{run_id}/x0"), seed));
            rng.uniform_in_box(cfg.spec().dim, -half_width, *half_width)
        }
    }
}

fn summary_of(traj: &Trajectory, initial_gap: Option<f64>) -> RunSummary {
    RunSummary {
        iterations: traj.iterations,
        min_grad_norm: traj.min_grad_norm_from_first,
        sum_step_diff_sq: traj.sum_step_diff_sq,
        final_f: traj.final_f(),
        initial_gap,
        grad_evals: Some(traj.grad_evals),
        diagnostic_evals: Some(traj.diagnostic_evals),
        tau: None,
        grad_sq_at_tau: None,
        wall_time_s: None,
    }
}

/// Runs a single seed of the experiment.
pub fn execute_seed(cfg: &ExperimentConfig, seed: u64) -> std::result::Result<RunRecord, RunFailure> {
    let run_id = cfg.run_id(seed);
    let mut rng = RngStream::new(seed, stream_id(&run_id, seed));
    let x0 = initial_point(cfg, &run_id, seed);
    let spec = cfg.spec();
    let gap = spec.initial_gap(&x0);
    let every = cfg.outputs.record_every;
    let start = Instant::now();
    let result = match cfg.algorithm {
        Algorithm::Gd { eta, iterations } => {
            let c = GdConfig {
                record_every: every,
                ..GdConfig::new(eta, iterations)
            };
            run_gd(spec, &x0, &c).map(|t| (rows_from(&t, None), summary_of(&t, gap), Vec::new()))
        }
        Algorithm::Sgd {
            eta,
            iterations,
            batch_m,
        } => {
            let c = GdConfig {
                eta,
                iterations,
                batch_m,
                record_every: every,
            };
            run_sgd(&cfg.oracle, &x0, &c, &mut rng).map(|t| (rows_from(&t, None), summary_of(&t, gap), Vec::new()))
        }
        Algorithm::Gde {
            eta,
            iterations,
            g0_mode,
            target_grad_norm,
        } => {
            let c = GdeConfig {
                record_every: every,
                target_grad_norm,
                ..GdeConfig::new(eta, iterations).with_g0(g0_mode)
            };
            run_gde(spec, &x0, &c).map(|t| (rows_from(&t, None), summary_of(&t, gap), Vec::new()))
        }
        Algorithm::MinibatchSgde {
            eta,
            iterations,
            batch_m,
            g0_mode,
        } => {
            let c = SgdeConfig {
                g0_mode,
                record_every: every,
                ..SgdeConfig::new(eta, iterations, batch_m)
            };
            run_minibatch_sgde(&cfg.oracle, &x0, &c, &mut rng)
                .map(|t| (rows_from(&t, None), summary_of(&t, gap), Vec::new()))
        }
        Algorithm::Stagewise {
            gamma,
            c,
            alpha,
            stages,
            inner,
            ..
        } => {
            let sc = StagewiseConfig {
                gamma,
                c,
                alpha,
                stages,
                inner,
                record_every: every,
            };
            run_stagewise(&cfg.oracle, &x0, &sc, &mut rng).map(|run| {
                let mut rows = Vec::new();
                for (s, t) in run.inner.iter().enumerate() {
                    rows.extend(rows_from(t, Some(s + 1)));
                }
                let grad_sq = spec.gradient(&run.selected).norm_sq();
                let summary = RunSummary {
                    iterations: run.inner.iter().map(|t| t.iterations).sum(),
                    min_grad_norm: run
                        .inner
                        .iter()
                        .map(|t| t.min_grad_norm_from_first)
                        .fold(f64::INFINITY, f64::min),
                    sum_step_diff_sq: run.inner.iter().map(|t| t.sum_step_diff_sq).sum(),
                    final_f: spec.value(&run.selected),
                    initial_gap: gap,
                    grad_evals: Some(run.grad_evals()),
                    diagnostic_evals: Some(run.diagnostic_evals()),
                    tau: Some(run.tau),
                    grad_sq_at_tau: Some(grad_sq),
                    wall_time_s: None,
                };
                (rows, summary, run.stages)
            })
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    match result {
        Ok((rows, mut summary, stages)) => {
            summary.wall_time_s = Some(elapsed);
            Ok(RunRecord {
                run_id,
                seed,
                algorithm: cfg.algorithm.name().into(),
                rows,
                summary,
                stages,
            })
        }
        Err(e) => {
            let partial_rows = match &e {
                Error::Divergence { stage, partial, .. } => rows_from(partial, *stage),
                _ => Vec::new(),
            };
            Err(RunFailure {
                run_id,
                seed,
                message: e.to_string(),
                partial_rows,
            })
        }
    }
}

/// Runs every seed (concurrently when `threads` allows) and evaluates the
/// configured bounds and checks. Results are ordered as the seeds are
/// listed; one failing seed does not stop the others.
pub fn execute(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentOutcome> {
    let run_all = || -> Vec<_> { cfg.seeds.par_iter().map(|&s| execute_seed(cfg, s)).collect() };
    let runs = match threads {
        Some(0) => return Err(Error::arg("thread count must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::arg(e.to_string()))?
            .install(run_all),
        None => run_all(),
    };
    let records: Vec<&RunRecord> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let bounds = evaluate_bounds(cfg, &records);
    let checks = run_checks(cfg, &CheckSelection::configured(&cfg.checks));
    Ok(ExperimentOutcome { runs, bounds, checks })
}

fn bound_entry(scope: &str, theorem_id: u8, r: Result<BoundReport>) -> BoundEntry {
    match r {
        Ok(report) => BoundEntry {
            scope: scope.into(),
            theorem_id,
            report: Some(report),
            error: None,
        },
        Err(e) => BoundEntry {
            scope: scope.into(),
            theorem_id,
            report: None,
            error: Some(e.to_string()),
        },
    }
}

fn no_runs(theorem_id: u8) -> BoundEntry {
    bound_entry("aggregate", theorem_id, Err(Error::arg("no successful runs")))
}

fn evaluate_bounds(cfg: &ExperimentConfig, records: &[&RunRecord]) -> Vec<BoundEntry> {
    let spec = cfg.spec();
    let l = spec.lipschitz_l;
    let mut out = Vec::new();
    if cfg.checks.thm1 {
        let eta = cfg.algorithm.eta().unwrap_or(f64::NAN);
        for r in records {
            let s = &r.summary;
            let report = s
                .initial_gap
                .ok_or_else(|| Error::Precondition("initial gap unavailable".into()))
                .and_then(|gap| {
                    bound_thm1(gap, eta, s.iterations, l, s.sum_step_diff_sq, s.min_grad_norm.powi(2))
                });
            out.push(bound_entry(&r.run_id, 1, report));
        }
    }
    if cfg.checks.thm2 {
        if let Algorithm::MinibatchSgde {
            eta,
            iterations,
            batch_m,
            ..
        } = cfg.algorithm
        {
            let lhs: Vec<f64> = records.iter().map(|r| r.summary.min_grad_norm.powi(2)).collect();
            let sums: Vec<f64> = records.iter().map(|r| r.summary.sum_step_diff_sq).collect();
            let gaps: Option<Vec<f64>> = records.iter().map(|r| r.summary.initial_gap).collect();
            out.push(match (SampleStats::from_slice(&lhs), SampleStats::from_slice(&sums), gaps) {
                (Some(obs), Some(sum), Some(gaps)) => {
                    let gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
                    let report = bound_thm2(
                        gap,
                        eta,
                        iterations,
                        l,
                        cfg.oracle.variance_bound_g2,
                        batch_m as u64,
                        sum.mean,
                        obs.mean,
                        3.0 * obs.stderr,
                    );
                    bound_entry("aggregate", 2, report)
                }
                _ => no_runs(2),
            });
        }
    }
    if cfg.checks.thm3 {
        if let Algorithm::Stagewise {
            gamma,
            c,
            alpha,
            stages,
            delta,
            ..
        } = cfg.algorithm
        {
            let lhs: Vec<f64> = records.iter().filter_map(|r| r.summary.grad_sq_at_tau).collect();
            out.push(match SampleStats::from_slice(&lhs) {
                Some(obs) => {
                    let n = records.len() as f64;
                    let mean_stages: Vec<StageRecord> = (0..stages)
                        .map(|i| {
                            let mut rec = records[0].stages[i].clone();
                            rec.d_ts = records.iter().map(|r| r.stages[i].d_ts).sum::<f64>() / n;
                            rec
                        })
                        .collect();
                    let delta = delta.or(spec.gap_bound).unwrap_or(f64::NAN);
                    let report = bound_thm3(
                        delta,
                        gamma,
                        c,
                        alpha,
                        stages,
                        cfg.oracle.variance_bound_g2,
                        &mean_stages,
                        obs.mean,
                        3.0 * obs.stderr,
                    );
                    bound_entry("aggregate", 3, report)
                }
                None => no_runs(3),
            });
        }
    }
    out
}

/// Which randomized checks to run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckSelection {
    pub moreau: Option<MoreauCheck>,
    pub lemma31: Option<LemmaCheck>,
    pub grad: Option<GradCheckSpec>,
}

impl CheckSelection {
    pub fn configured(checks: &Checks) -> Self {
        CheckSelection {
            moreau: checks.moreau.clone(),
            lemma31: checks.lemma31.clone(),
            grad: checks.grad.clone(),
        }
    }
}

fn check_outcome(check: &str, r: Result<(bool, Value)>) -> CheckOutcome {
    match r {
        Ok((pass, detail)) => CheckOutcome {
            check: check.into(),
            pass,
            detail,
            error: None,
        },
        Err(e) => CheckOutcome {
            check: check.into(),
            pass: false,
            detail: Value::Null,
            error: Some(e.to_string()),
        },
    }
}

fn box_points(spec: &ObjectiveSpec, n: usize, rng: &mut RngStream) -> Vec<Vector> {
    (0..n)
        .map(|_| rng.uniform_in_box(spec.dim, -spec.test_box, spec.test_box))
        .collect()
}

/// Runs the selected randomized checks against the configured problem.
pub fn run_checks(cfg: &ExperimentConfig, sel: &CheckSelection) -> Vec<CheckOutcome> {
    let spec = cfg.spec();
    let default_seed = cfg.seeds[0];
    let mut out = Vec::new();
    if let Some(m) = &sel.moreau {
        let seed = m.seed.unwrap_or(default_seed);
        let r = (|| {
            let mc = MoreauConfig {
                inner_tol: m.inner_tol,
                ..MoreauConfig::new(m.gamma.unwrap_or(1.0 / (4.0 * spec.lipschitz_l)))
            };
            let mut rng = RngStream::new(seed, stream_id("check/moreau", seed));
            let points = box_points(spec, m.points, &mut rng);
            let report = check_moreau_relations(spec, &points, &mc)?;
            Ok((report.pass, json!({"gamma": mc.gamma, "seed": seed, "report": report})))
        })();
        out.push(check_outcome("moreau", r));
    }
    if let Some(lc) = &sel.lemma31 {
        let seed = lc.seed.unwrap_or(default_seed);
        let r = (|| {
            let mut reports = Vec::new();
            for &d in &lc.dims {
                for &radius in &lc.radii {
                    for &gamma in &lc.gammas {
                        let key = format!("check/lemma31/{d}/{radius:?}/{gamma:?}");
                        let mut rng = RngStream::new(seed, stream_id(&key, seed));
                        reports.push(check_lemma31(d, radius, gamma, lc.trials, &mut rng)?);
                    }
                }
            }
            let pass = reports.iter().all(|r| r.pass);
            let worst = reports.iter().map(|r| r.worst_slack).fold(f64::INFINITY, f64::min);
            Ok((pass, json!({"seed": seed, "worst_slack": worst, "cells": reports})))
        })();
        out.push(check_outcome("lemma31", r));
    }
    if let Some(g) = &sel.grad {
        let seed = g.seed.unwrap_or(default_seed);
        let r = (|| {
            let mut rng = RngStream::new(seed, stream_id("check/grad", seed));
            let mut worst: f64 = 0.0;
            let mut pass = true;
            for x in box_points(spec, g.points, &mut rng) {
                let c = check_grad_default(spec, &x, g.rel_tol)?;
                worst = worst.max(c.max_rel_err);
                pass &= c.pass;
            }
            Ok((
                pass,
                json!({"seed": seed, "points": g.points, "rel_tol": g.rel_tol, "max_rel_err": worst}),
            ))
        })();
        out.push(check_outcome("grad", r));
    }
    out
}

// ---------------------------------------------------------------------------
// Output

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub const CSV_HEADER: [&str; 7] = ["run_id", "seed", "stage", "t", "f", "grad_norm", "step_diff_sq"];

/// Writes every stored row (including partial rows of failed runs) with
/// shortest round-trip float formatting.
pub fn write_trajectory_csv(path: &Path, outcome: &ExperimentOutcome) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for run in &outcome.runs {
        let (run_id, seed, rows) = match run {
            Ok(r) => (&r.run_id, r.seed, &r.rows),
            Err(f) => (&f.run_id, f.seed, &f.partial_rows),
        };
        for row in rows {
            w.write_record([
                run_id.clone(),
                seed.to_string(),
                row.stage.map(|s| s.to_string()).unwrap_or_default(),
                row.t.to_string(),
                fmt_f64(row.f),
                fmt_f64(row.grad_norm),
                fmt_f64(row.step_diff_sq),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// The ledger as JSON values, one per line: the config, then each run with
/// its stage records, then bounds and checks.
pub fn ledger_lines(cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> Vec<Value> {
    let spec = cfg.spec();
    let mut lines = vec![json!({
        "kind": "config",
        "schema_version": SCHEMA_VERSION,
        "name": cfg.name,
        "problem": cfg.problem_name,
        "problem_params": cfg.problem_params,
        "dim": spec.dim,
        "lipschitz_l": spec.lipschitz_l,
        "f_opt": spec.f_opt,
        "gap_bound": spec.gap_bound,
        "g2": cfg.oracle.variance_bound_g2,
        "algorithm": cfg.algorithm.name(),
        "eta": cfg.algorithm.eta(),
        "eta_admissible": cfg.eta_admissible,
        "seeds": cfg.seeds,
        "record_every": cfg.outputs.record_every,
    })];
    for run in &outcome.runs {
        match run {
            Ok(r) => {
                lines.push(json!({
                    "kind": "run",
                    "run_id": r.run_id,
                    "seed": r.seed,
                    "stream_id": stream_id(&r.run_id, r.seed),
                    "algorithm": r.algorithm,
                    "summary": r.summary,
                }));
                for s in &r.stages {
                    lines.push(json!({
                        "kind": "stage",
                        "run_id": r.run_id,
                        "s": s.s,
                        "eta_s": s.eta_s,
                        "T_s": s.iterations,
                        "w_s": s.weight,
                        "d_ts": s.d_ts,
                    }));
                }
            }
            Err(f) => lines.push(json!({
                "kind": "error",
                "run_id": f.run_id,
                "seed": f.seed,
                "message": f.message,
                "partial_rows": f.partial_rows.len(),
            })),
        }
    }
    for b in &outcome.bounds {
        lines.push(json!({
            "kind": "bound",
            "scope": b.scope,
            "theorem_id": b.theorem_id,
            "pass": b.pass(),
            "report": b.report,
            "error": b.error,
        }));
    }
    for c in &outcome.checks {
        lines.push(json!({
            "kind": "check",
            "check": c.check,
            "pass": c.pass,
            "detail": c.detail,
            "error": c.error,
        }));
    }
    lines
}

pub fn write_ledger(path: &Path, cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for line in ledger_lines(cfg, outcome) {
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn resolve(out_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out_dir.join(p)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
    /// Base for relative output paths; defaults to the working directory.
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct ExperimentFiles {
    pub trajectory: PathBuf,
    pub ledger: PathBuf,
}

/// Executes the experiment and writes its trajectory CSV and ledger.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<(ExperimentOutcome, ExperimentFiles)> {
    let outcome = execute(cfg, opts.threads)?;
    let base = opts.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let files = ExperimentFiles {
        trajectory: resolve(&base, &cfg.outputs.trajectory_path),
        ledger: resolve(&base, &cfg.outputs.ledger_path),
    };
    for p in [&files.trajectory, &files.ledger] {
        if let Some(parent) = p.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
    }
    write_trajectory_csv(&files.trajectory, &outcome)?;
    write_ledger(&files.ledger, cfg, &outcome)?;
    Ok((outcome, files))
}

// ---------------------------------------------------------------------------
// Summaries

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub run_id: String,
    pub seed: u64,
    pub algorithm: String,
    pub iterations: usize,
    pub min_grad_norm: f64,
    pub sum_step_diff_sq: f64,
    pub grad_evals: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Sorted by (seed, run_id).
    pub runs: Vec<SummaryRow>,
    pub min_grad_norm: SampleStats,
    pub min_grad_sq: SampleStats,
    pub sum_step_diff_sq: SampleStats,
    pub total_grad_evals: Option<u64>,
    pub total_diagnostic_evals: Option<u64>,
}

pub fn summarize(records: &[RunRecord]) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::arg("nothing to summarize: no run records"));
    }
    let mut runs: Vec<SummaryRow> = records
        .iter()
        .map(|r| SummaryRow {
            run_id: r.run_id.clone(),
            seed: r.seed,
            algorithm: r.algorithm.clone(),
            iterations: r.summary.iterations,
            min_grad_norm: r.summary.min_grad_norm,
            sum_step_diff_sq: r.summary.sum_step_diff_sq,
            grad_evals: r.summary.grad_evals,
        })
        .collect();
    runs.sort_by(|a, b| (a.seed, &a.run_id).cmp(&(b.seed, &b.run_id)));
    let col = |f: fn(&SummaryRow) -> f64| -> SampleStats {
        let xs: Vec<f64> = runs.iter().map(f).collect();
        SampleStats::from_slice(&xs).expect("non-empty")
    };
    let total = |f: fn(&RunRecord) -> Option<u64>| -> Option<u64> { records.iter().map(f).sum() };
    Ok(Summary {
        min_grad_norm: col(|r| r.min_grad_norm),
        min_grad_sq: col(|r| r.min_grad_norm * r.min_grad_norm),
        sum_step_diff_sq: col(|r| r.sum_step_diff_sq),
        total_grad_evals: total(|r| r.summary.grad_evals),
        total_diagnostic_evals: total(|r| r.summary.diagnostic_evals),
        runs,
    })
}

impl Summary {
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str("run_id\tseed\talgorithm\tT\tmin_grad_norm\tsum_step_diff_sq\tgrad_evals\n");
        for r in &self.runs {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:e}\t{:e}\t{}\n",
                r.run_id,
                r.seed,
                r.algorithm,
                r.iterations,
                r.min_grad_norm,
                r.sum_step_diff_sq,
                r.grad_evals.map(|g| g.to_string()).unwrap_or_else(|| "-".into())
            ));
        }
        let stat = |name: &str, st: &SampleStats| {
            format!("{name}: mean {:e}  std {:e}  stderr {:e}  (n = {})\n", st.mean, st.std, st.stderr, st.n)
        };
        s.push_str(&stat("min_grad_norm", &self.min_grad_norm));
        s.push_str(&stat("min_grad_norm^2", &self.min_grad_sq));
        s.push_str(&stat("sum_step_diff_sq", &self.sum_step_diff_sq));
        if let Some(g) = self.total_grad_evals {
            s.push_str(&format!("gradient evaluations: {g}\n"));
        }
        s
    }
}

#[derive(Deserialize)]
struct CsvRow {
    run_id: String,
    seed: u64,
    stage: Option<usize>,
    t: usize,
    f: f64,
    grad_norm: f64,
    step_diff_sq: f64,
}

/// Reads a trajectory CSV back into per-run records, in order of first
/// appearance.
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut groups: Vec<(String, u64, Vec<RunRow>)> = Vec::new();
    for row in reader.deserialize::<CsvRow>() {
        let row = row?;
        let entry = RunRow {
            stage: row.stage,
            t: row.t,
            f: row.f,
            grad_norm: row.grad_norm,
            step_diff_sq: row.step_diff_sq,
        };
        match groups.iter_mut().find(|(id, seed, _)| *id == row.run_id && *seed == row.seed) {
            Some(g) => g.2.push(entry),
            None => groups.push((row.run_id, row.seed, vec![entry])),
        }
    }
    groups
        .into_iter()
        .map(|(id, seed, rows)| {
            let algorithm = if rows.iter().any(|r| r.stage.is_some()) {
                "stagewise"
            } else {
                "unknown"
            };
            RunRecord::from_rows(id, seed, algorithm.into(), rows)
        })
        .collect()
}
