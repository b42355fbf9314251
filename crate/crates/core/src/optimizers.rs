//! Gradient descent baselines and the extrapolation family: deterministic
//! GDE, mini-batch SGDE, the averaged single-sample SGDE subroutine and the
//! stagewise proximal driver around it.
//!
//! Every method keeps two sequences. The extrapolated point reuses the
//! previous gradient, `x_t = z_{t-1} - η g_{t-1}`, and only then is a single
//! new gradient `g_t` taken at `x_t` to move the anchor, `z_t = z_{t-1} - η g_t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{check_dims, RngStream, Vector};
use crate::problems::{ObjectiveSpec, StochasticOracle};

/// How the gradient memory is initialized before the first extrapolation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum G0Mode {
    /// g₀ = 0, so x₁ = z₀ = x₀. The convergence bounds are stated for this.
    #[default]
    Zero,
    /// g₀ = ∇f(x₀) (or a batch estimate of it), as in the pseudocode.
    Gradient,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GdConfig {
    pub eta: f64,
    pub iterations: usize,
    pub batch_m: usize,
    pub record_every: usize,
}

impl GdConfig {
    pub fn new(eta: f64, iterations: usize) -> Self {
        GdConfig {
            eta,
            iterations,
            batch_m: 1,
            record_every: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GdeConfig {
    pub eta: f64,
    pub iterations: usize,
    pub g0_mode: G0Mode,
    pub record_every: usize,
    /// Stop once ‖∇f(x_t)‖ ≤ target for some t ≥ 1.
    pub target_grad_norm: Option<f64>,
}

impl GdeConfig {
    pub fn new(eta: f64, iterations: usize) -> Self {
        GdeConfig {
            eta,
            iterations,
            g0_mode: G0Mode::Zero,
            record_every: 1,
            target_grad_norm: None,
        }
    }

    pub fn with_g0(mut self, mode: G0Mode) -> Self {
        self.g0_mode = mode;
        self
    }

    /// Whether η ≤ 1/(12L), the step-size premise of the bounds.
    pub fn theorem_admissible(&self, lipschitz_l: f64) -> bool {
        step_admissible(self.eta, lipschitz_l)
    }
}

pub(crate) fn step_admissible(eta: f64, lipschitz_l: f64) -> bool {
    // one-ulp allowance so that η written as 1/(12L) is accepted
    eta <= (1.0 / (12.0 * lipschitz_l)) * (1.0 + f64::EPSILON)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgdeConfig {
    pub eta: f64,
    pub iterations: usize,
    pub batch_m: usize,
    pub g0_mode: G0Mode,
    pub record_every: usize,
}

impl SgdeConfig {
    pub fn new(eta: f64, iterations: usize, batch_m: usize) -> Self {
        SgdeConfig {
            eta,
            iterations,
            batch_m,
            g0_mode: G0Mode::Zero,
            record_every: 1,
        }
    }

    pub fn theorem_admissible(&self, lipschitz_l: f64) -> bool {
        step_admissible(self.eta, lipschitz_l)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    #[default]
    Sgde,
    Sgd,
}

/// Stage schedule: η_s = cγ/(3s), T_s = ⌈36s/c⌉, w_s = s^α.
#[derive(Clone, Debug, PartialEq)]
pub struct StagewiseConfig {
    pub gamma: f64,
    pub c: f64,
    pub alpha: f64,
    pub stages: usize,
    pub inner: InnerSolver,
    pub record_every: usize,
}

impl StagewiseConfig {
    /// γ = 1/(4L).
    pub fn for_lipschitz(lipschitz_l: f64, c: f64, alpha: f64, stages: usize) -> Self {
        StagewiseConfig {
            gamma: 1.0 / (4.0 * lipschitz_l),
            c,
            alpha,
            stages,
            inner: InnerSolver::Sgde,
            record_every: 1,
        }
    }

    pub fn validate(&self, lipschitz_l: f64) -> Result<()> {
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(Error::arg(format!("c must lie in (0, 1], got {}", self.c)));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::arg(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.stages == 0 {
            return Err(Error::arg("number of stages must be at least 1"));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::arg(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(1.0 / self.gamma - lipschitz_l > 0.0) {
            return Err(Error::arg(format!(
                "gamma = {} must be below 1/L = {} for strongly convex stage problems",
                self.gamma,
                1.0 / lipschitz_l
            )));
        }
        if self.record_every == 0 {
            return Err(Error::arg("record_every must be at least 1"));
        }
        Ok(())
    }

    pub fn stage_eta(&self, s: usize) -> f64 {
        self.c * self.gamma / (3.0 * s as f64)
    }

    pub fn stage_iterations(&self, s: usize) -> usize {
        (36.0 * s as f64 / self.c).ceil() as usize
    }

    pub fn stage_weight(&self, s: usize) -> f64 {
        (s as f64).powf(self.alpha)
    }

    /// Strong-convexity modulus 1/γ − L of each stage objective.
    pub fn stage_modulus(&self, lipschitz_l: f64) -> f64 {
        1.0 / self.gamma - lipschitz_l
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub t: usize,
    pub x: Vector,
    /// Anchor sequence; absent for plain gradient descent.
    pub z: Option<Vector>,
    /// Gradient estimate used by the method at this iteration.
    pub g: Option<Vector>,
    pub f: f64,
    /// True ‖∇f(x_t)‖ of the base objective.
    pub grad_norm: f64,
    pub running_min_grad_norm: f64,
    /// Σ‖x_k − x_{k−1}‖² over the iterations since the previous stored row;
    /// the single-step value when every iterate is stored.
    pub step_diff_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<IterRecord>,
    /// Iterations actually performed.
    pub iterations: usize,
    pub eta: f64,
    pub record_every: usize,
    /// min over t = 0..T of ‖∇f(x_t)‖.
    pub min_grad_norm: f64,
    /// min over t = 1..T (t = 0 when no iteration ran), the quantity bounded
    /// by the convergence theorems.
    pub min_grad_norm_from_first: f64,
    /// Σ_{t=1}^{T} ‖x_t − x_{t−1}‖², accumulated at every iteration.
    pub sum_step_diff_sq: f64,
    pub final_x: Vector,
    pub final_z: Option<Vector>,
    pub seed: Option<u64>,
    /// Per-sample gradient evaluations spent by the method itself.
    pub grad_evals: u64,
    /// Extra true-gradient evaluations made only for the recorded norms.
    pub diagnostic_evals: u64,
    /// Set when grad_norm comes from the diagnostic oracle rather than from
    /// gradients the method computed anyway.
    pub grad_norm_is_diagnostic: bool,
}

impl Trajectory {
    pub fn initial(&self) -> &IterRecord {
        &self.records[0]
    }

    pub fn final_f(&self) -> f64 {
        self.records.last().map(|r| r.f).unwrap_or(f64::NAN)
    }
}

enum SourceKind<'a> {
    Exact(&'a ObjectiveSpec),
    Sampled {
        oracle: &'a StochasticOracle,
        batch_m: usize,
        rng: &'a mut RngStream,
    },
}

/// Gradient oracle seen by a method: the base gradient (exact or sampled),
/// optionally shifted by a proximal term (x − center)/γ.
struct GradSource<'a> {
    kind: SourceKind<'a>,
    prox: Option<(&'a Vector, f64)>,
    evals: u64,
}

impl<'a> GradSource<'a> {
    fn exact(spec: &'a ObjectiveSpec) -> Self {
        GradSource {
            kind: SourceKind::Exact(spec),
            prox: None,
            evals: 0,
        }
    }

    fn sampled(oracle: &'a StochasticOracle, batch_m: usize, rng: &'a mut RngStream) -> Self {
        GradSource {
            kind: SourceKind::Sampled {
                oracle,
                batch_m,
                rng,
            },
            prox: None,
            evals: 0,
        }
    }

    fn with_prox(mut self, center: &'a Vector, gamma: f64) -> Self {
        self.prox = Some((center, gamma));
        self
    }

    fn base(&self) -> &'a ObjectiveSpec {
        match &self.kind {
            SourceKind::Exact(spec) => spec,
            SourceKind::Sampled { oracle, .. } => &oracle.base,
        }
    }

    /// True when the returned gradient is exactly ∇f of the base objective.
    fn yields_true_gradient(&self) -> bool {
        matches!(self.kind, SourceKind::Exact(_)) && self.prox.is_none()
    }

    fn seed(&self) -> Option<u64> {
        match &self.kind {
            SourceKind::Exact(_) => None,
            SourceKind::Sampled { rng, .. } => Some(rng.seed()),
        }
    }

    fn eval(&mut self, x: &Vector) -> Vector {
        let g = match &mut self.kind {
            SourceKind::Exact(spec) => {
                self.evals += 1;
                spec.gradient(x)
            }
            SourceKind::Sampled {
                oracle,
                batch_m,
                rng,
            } => {
                self.evals += *batch_m as u64;
                oracle.sample(x, *batch_m, rng)
            }
        };
        match self.prox {
            Some((center, gamma)) => g.plus_scaled(1.0 / gamma, &x.sub(center)),
            None => g,
        }
    }
}

struct Recorder<'a> {
    base: &'a ObjectiveSpec,
    every: usize,
    pending_step: f64,
    traj: Trajectory,
}

impl<'a> Recorder<'a> {
    fn new(base: &'a ObjectiveSpec, x0: &Vector, eta: f64, every: usize, seed: Option<u64>) -> Self {
        Recorder {
            base,
            every: every.max(1),
            pending_step: 0.0,
            traj: Trajectory {
                records: Vec::new(),
                iterations: 0,
                eta,
                record_every: every.max(1),
                min_grad_norm: f64::INFINITY,
                min_grad_norm_from_first: f64::INFINITY,
                sum_step_diff_sq: 0.0,
                final_x: x0.clone(),
                final_z: None,
                seed,
                grad_evals: 0,
                diagnostic_evals: 0,
                grad_norm_is_diagnostic: false,
            },
        }
    }

    /// Records iterate t. `true_grad` is ∇f(x_t) when the method already has
    /// it; otherwise a diagnostic evaluation is made.
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        t: usize,
        x: &Vector,
        z: Option<&Vector>,
        g: Option<&Vector>,
        true_grad: Option<&Vector>,
        step_diff_sq: f64,
        last: bool,
    ) -> f64 {
        let grad_norm = match true_grad {
            Some(g) => g.norm(),
            None => {
                self.traj.diagnostic_evals += 1;
                self.traj.grad_norm_is_diagnostic = true;
                self.base.gradient(x).norm()
            }
        };
        let tr = &mut self.traj;
        tr.sum_step_diff_sq += step_diff_sq;
        self.pending_step += step_diff_sq;
        tr.min_grad_norm = tr.min_grad_norm.min(grad_norm);
        if t >= 1 {
            tr.min_grad_norm_from_first = tr.min_grad_norm_from_first.min(grad_norm);
        }
        tr.iterations = t;
        if tr.final_x.dim() == x.dim() {
            tr.final_x.as_mut_slice().copy_from_slice(x.as_slice());
        } else {
            tr.final_x = x.clone();
        }
        match (&mut tr.final_z, z) {
            (Some(dst), Some(src)) => dst.as_mut_slice().copy_from_slice(src.as_slice()),
            (dst, src) => *dst = src.cloned(),
        }
        if t % self.every == 0 || last {
            tr.records.push(IterRecord {
                t,
                x: x.clone(),
                z: z.cloned(),
                g: g.cloned(),
                f: self.base.value(x),
                grad_norm,
                running_min_grad_norm: tr.min_grad_norm,
                step_diff_sq: self.pending_step,
            });
            self.pending_step = 0.0;
        }
        grad_norm
    }

    fn finish(mut self, grad_evals: u64) -> Trajectory {
        if self.traj.iterations == 0 {
            self.traj.min_grad_norm_from_first = self.traj.min_grad_norm;
        }
        // the last iterate is always stored
        if let Some(last) = self.traj.records.last() {
            if last.t != self.traj.iterations {
                let x = self.traj.final_x.clone();
                let grad_norm = self.base.gradient(&x).norm();
                self.traj.diagnostic_evals += 1;
                self.traj.records.push(IterRecord {
                    t: self.traj.iterations,
                    f: self.base.value(&x),
                    x,
                    z: self.traj.final_z.clone(),
                    g: None,
                    grad_norm,
                    running_min_grad_norm: self.traj.min_grad_norm,
                    step_diff_sq: self.pending_step,
                });
            }
        }
        self.traj.grad_evals = grad_evals;
        self.traj
    }

    fn diverged(self, iteration: usize, grad_evals: u64, stage: Option<usize>) -> Error {
        Error::Divergence {
            stage,
            iteration,
            partial: Box::new(self.finish(grad_evals)),
        }
    }
}

fn check_step(eta: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::arg(format!("step size must be positive, got {eta}")));
    }
    Ok(())
}

fn check_start(base: &ObjectiveSpec, x0: &Vector) -> Result<()> {
    check_dims(base.dim, x0.dim())?;
    if let Some(i) = x0.first_non_finite() {
        return Err(Error::Evaluation {
            coordinate: Some(i),
            message: "starting point is not finite".into(),
        });
    }
    Ok(())
}

struct LoopOutput {
    traj: Trajectory,
    x_sum: Vector,
}

/// x_{t+1} = x_t − η g(x_t).
fn descent_loop(
    mut src: GradSource<'_>,
    x0: &Vector,
    eta: f64,
    iterations: usize,
    record_every: usize,
    stage: Option<usize>,
) -> Result<LoopOutput> {
    let base = src.base();
    let exact = src.yields_true_gradient();
    let mut rec = Recorder::new(base, x0, eta, record_every, src.seed());
    let mut x = x0.clone();
    let mut x_sum = Vector::zeros(x0.dim());
    for t in 0..=iterations {
        let g = if t < iterations { Some(src.eval(&x)) } else { None };
        if let Some(g) = &g {
            if !g.is_finite() {
                return Err(rec.diverged(t, src.evals, stage));
            }
        }
        let step = if t == 0 { 0.0 } else { x.dist_sq(&rec.traj.final_x) };
        let true_grad = if exact { g.as_ref() } else { None };
        rec.push(t, &x, None, g.as_ref(), true_grad, step, t == iterations);
        if t >= 1 {
            x_sum.axpy(1.0, &x);
        }
        if let Some(g) = g {
            let next = x.plus_scaled(-eta, &g);
            if !next.is_finite() {
                return Err(rec.diverged(t + 1, src.evals, stage));
            }
            x = next;
        }
    }
    let evals = src.evals;
    Ok(LoopOutput {
        traj: rec.finish(evals),
        x_sum,
    })
}

/// Shared extrapolation loop for every GDE/SGDE variant.
fn extrapolation_loop(
    mut src: GradSource<'_>,
    x0: &Vector,
    eta: f64,
    iterations: usize,
    g0_mode: G0Mode,
    record_every: usize,
    target_grad_norm: Option<f64>,
    stage: Option<usize>,
) -> Result<LoopOutput> {
    let base = src.base();
    let exact = src.yields_true_gradient();
    let mut rec = Recorder::new(base, x0, eta, record_every, src.seed());

    let mut z = x0.clone();
    let mut g_prev = match g0_mode {
        G0Mode::Zero => Vector::zeros(x0.dim()),
        G0Mode::Gradient => src.eval(x0),
    };
    if !g_prev.is_finite() {
        return Err(rec.diverged(0, src.evals, stage));
    }
    let g0_is_true = exact && g0_mode == G0Mode::Gradient;
    rec.push(
        0,
        x0,
        Some(&z),
        Some(&g_prev),
        g0_is_true.then_some(&g_prev),
        0.0,
        iterations == 0,
    );

    let mut x_prev = x0.clone();
    let mut x_sum = Vector::zeros(x0.dim());
    for t in 1..=iterations {
        let x = z.plus_scaled(-eta, &g_prev);
        if !x.is_finite() {
            return Err(rec.diverged(t, src.evals, stage));
        }
        let g = src.eval(&x);
        if !g.is_finite() {
            return Err(rec.diverged(t, src.evals, stage));
        }
        z.axpy(-eta, &g);
        if !z.is_finite() {
            return Err(rec.diverged(t, src.evals, stage));
        }
        let step = x.dist_sq(&x_prev);
        let reached = |n: f64| target_grad_norm.is_some_and(|target| n <= target);
        let last = t == iterations;
        let grad_norm = rec.push(t, &x, Some(&z), Some(&g), exact.then_some(&g), step, last);
        x_sum.axpy(1.0, &x);
        if reached(grad_norm) && !last {
            // re-store the stopping iterate if decimation skipped it
            if rec.traj.records.last().map(|r| r.t) != Some(t) {
                rec.traj.records.push(IterRecord {
                    t,
                    x: x.clone(),
                    z: Some(z.clone()),
                    g: Some(g.clone()),
                    f: base.value(&x),
                    grad_norm,
                    running_min_grad_norm: rec.traj.min_grad_norm,
                    step_diff_sq: rec.pending_step,
                });
                rec.pending_step = 0.0;
            }
            break;
        }
        x_prev = x;
        g_prev = g;
    }
    let evals = src.evals;
    Ok(LoopOutput {
        traj: rec.finish(evals),
        x_sum,
    })
}

/// Deterministic gradient descent.
pub fn run_gd(spec: &ObjectiveSpec, x0: &Vector, cfg: &GdConfig) -> Result<Trajectory> {
    check_step(cfg.eta)?;
    check_start(spec, x0)?;
    Ok(descent_loop(GradSource::exact(spec), x0, cfg.eta, cfg.iterations, cfg.record_every, None)?.traj)
}

/// Mini-batch stochastic gradient descent with `cfg.batch_m` samples per step.
pub fn run_sgd(
    oracle: &StochasticOracle,
    x0: &Vector,
    cfg: &GdConfig,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    check_step(cfg.eta)?;
    check_start(&oracle.base, x0)?;
    if cfg.batch_m == 0 {
        return Err(Error::arg("batch size must be at least 1"));
    }
    let src = GradSource::sampled(oracle, cfg.batch_m, rng);
    Ok(descent_loop(src, x0, cfg.eta, cfg.iterations, cfg.record_every, None)?.traj)
}

/// Gradient descent with extrapolation, one gradient per iteration.
pub fn run_gde(spec: &ObjectiveSpec, x0: &Vector, cfg: &GdeConfig) -> Result<Trajectory> {
    check_step(cfg.eta)?;
    check_start(spec, x0)?;
    let out = extrapolation_loop(
        GradSource::exact(spec),
        x0,
        cfg.eta,
        cfg.iterations,
        cfg.g0_mode,
        cfg.record_every,
        cfg.target_grad_norm,
        None,
    )?;
    Ok(out.traj)
}

/// Mini-batch SGDE. Recorded gradient norms are true ‖∇f(x_t)‖ taken from
/// the diagnostic oracle.
pub fn run_minibatch_sgde(
    oracle: &StochasticOracle,
    x0: &Vector,
    cfg: &SgdeConfig,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    check_step(cfg.eta)?;
    check_start(&oracle.base, x0)?;
    if cfg.batch_m == 0 {
        return Err(Error::arg("batch size must be at least 1"));
    }
    let src = GradSource::sampled(oracle, cfg.batch_m, rng);
    let out = extrapolation_loop(
        src,
        x0,
        cfg.eta,
        cfg.iterations,
        cfg.g0_mode,
        cfg.record_every,
        None,
        None,
    )?;
    Ok(out.traj)
}

#[derive(Clone, Debug)]
pub struct AveragedRun {
    /// (1/T) Σ_{t=1}^{T} x_t.
    pub avg: Vector,
    pub trajectory: Trajectory,
}

/// Optional proximal shift (center, γ) turning f into f + ‖x − center‖²/(2γ).
#[derive(Clone, Copy, Debug)]
pub struct Prox<'a> {
    pub center: &'a Vector,
    pub gamma: f64,
}

fn check_prox(prox: Option<Prox<'_>>, dim: usize) -> Result<()> {
    if let Some(p) = prox {
        if !(p.gamma > 0.0) || !p.gamma.is_finite() {
            return Err(Error::arg(format!("prox gamma must be positive, got {}", p.gamma)));
        }
        check_dims(dim, p.center.dim())?;
    }
    Ok(())
}

fn average(sum: &Vector, count: usize) -> Vector {
    Vector::from_raw(sum.iter().map(|v| v / count as f64).collect())
}

/// Single-sample SGDE returning the uniform average of x₁..x_T. The
/// proximal term is added deterministically to every stochastic gradient;
/// g₀ is a stochastic gradient at x₀.
pub fn run_sgde_avg(
    oracle: &StochasticOracle,
    x0: &Vector,
    eta: f64,
    iterations: usize,
    rng: &mut RngStream,
    prox: Option<Prox<'_>>,
) -> Result<AveragedRun> {
    sgde_avg_stage(oracle, x0, eta, iterations, rng, prox, 1, None)
}

#[allow(clippy::too_many_arguments)]
fn sgde_avg_stage(
    oracle: &StochasticOracle,
    x0: &Vector,
    eta: f64,
    iterations: usize,
    rng: &mut RngStream,
    prox: Option<Prox<'_>>,
    record_every: usize,
    stage: Option<usize>,
) -> Result<AveragedRun> {
    check_step(eta)?;
    check_start(&oracle.base, x0)?;
    check_prox(prox, x0.dim())?;
    if iterations == 0 {
        return Err(Error::arg("averaged SGDE needs at least one iteration"));
    }
    let mut src = GradSource::sampled(oracle, 1, rng);
    if let Some(p) = prox {
        src = src.with_prox(p.center, p.gamma);
    }
    let out = extrapolation_loop(
        src,
        x0,
        eta,
        iterations,
        G0Mode::Gradient,
        record_every,
        None,
        stage,
    )?;
    Ok(AveragedRun {
        avg: average(&out.x_sum, iterations),
        trajectory: out.traj,
    })
}

fn sgd_avg_stage(
    oracle: &StochasticOracle,
    x0: &Vector,
    eta: f64,
    iterations: usize,
    rng: &mut RngStream,
    prox: Prox<'_>,
    record_every: usize,
    stage: Option<usize>,
) -> Result<AveragedRun> {
    let src = GradSource::sampled(oracle, 1, rng).with_prox(prox.center, prox.gamma);
    let out = descent_loop(src, x0, eta, iterations, record_every, stage)?;
    Ok(AveragedRun {
        avg: average(&out.x_sum, iterations),
        trajectory: out.traj,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub s: usize,
    pub eta_s: f64,
    pub iterations: usize,
    pub weight: f64,
    pub x_end: Vector,
    /// (1/(16 T_s η_s)) Σ_{t=1}^{T_s} ‖x_t − x_{t−1}‖² of the stage's inner run.
    pub d_ts: f64,
}

#[derive(Clone, Debug)]
pub struct StagewiseRun {
    pub selected: Vector,
    /// 1-based index of the returned stage.
    pub tau: usize,
    pub stages: Vec<StageRecord>,
    pub inner: Vec<Trajectory>,
}

impl StagewiseRun {
    pub fn grad_evals(&self) -> u64 {
        self.inner.iter().map(|t| t.grad_evals).sum()
    }

    pub fn diagnostic_evals(&self) -> u64 {
        self.inner.iter().map(|t| t.diagnostic_evals).sum()
    }
}

pub fn d_statistic(sum_step_diff_sq: f64, iterations: usize, eta: f64) -> f64 {
    sum_step_diff_sq / (16.0 * iterations as f64 * eta)
}

/// Stagewise driver: stage s approximately minimizes
/// f(x) + ‖x − x^{s−1}‖²/(2γ) from x^{s−1}, and the returned point is x^τ
/// with τ drawn proportionally to s^α.
pub fn run_stagewise(
    oracle: &StochasticOracle,
    x0: &Vector,
    cfg: &StagewiseConfig,
    rng: &mut RngStream,
) -> Result<StagewiseRun> {
    cfg.validate(oracle.base.lipschitz_l)?;
    check_start(&oracle.base, x0)?;
    let mut center = x0.clone();
    let mut stages = Vec::with_capacity(cfg.stages);
    let mut inner = Vec::with_capacity(cfg.stages);
    for s in 1..=cfg.stages {
        let eta_s = cfg.stage_eta(s);
        let iterations = cfg.stage_iterations(s);
        let prox = Prox {
            center: &center,
            gamma: cfg.gamma,
        };
        let run = match cfg.inner {
            InnerSolver::Sgde => sgde_avg_stage(
                oracle,
                &center,
                eta_s,
                iterations,
                rng,
                Some(prox),
                cfg.record_every,
                Some(s),
            )?,
            InnerSolver::Sgd => sgd_avg_stage(
                oracle,
                &center,
                eta_s,
                iterations,
                rng,
                prox,
                cfg.record_every,
                Some(s),
            )?,
        };
        if !run.avg.is_finite() {
            return Err(Error::Divergence {
                stage: Some(s),
                iteration: iterations,
                partial: Box::new(run.trajectory),
            });
        }
        stages.push(StageRecord {
            s,
            eta_s,
            iterations,
            weight: cfg.stage_weight(s),
            x_end: run.avg.clone(),
            d_ts: d_statistic(run.trajectory.sum_step_diff_sq, iterations, eta_s),
        });
        inner.push(run.trajectory);
        center = run.avg;
    }
    let tau = sample_stage_index(cfg.alpha, cfg.stages, rng)?;
    Ok(StagewiseRun {
        selected: stages[tau - 1].x_end.clone(),
        tau,
        stages,
        inner,
    })
}

/// p_τ = τ^α / Σ_{s=1}^{S} s^α for τ = 1..S.
pub fn stage_probabilities(alpha: f64, stages: usize) -> Result<Vec<f64>> {
    if stages == 0 {
        return Err(Error::arg("number of stages must be at least 1"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::arg(format!("alpha must be positive, got {alpha}")));
    }
    let weights: Vec<f64> = (1..=stages).map(|s| (s as f64).powf(alpha)).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Categorical draw of τ ∈ {1..S} with p_τ ∝ τ^α; consumes one uniform.
pub fn sample_stage_index(alpha: f64, stages: usize, rng: &mut RngStream) -> Result<usize> {
    let probs = stage_probabilities(alpha, stages)?;
    let u = rng.uniform();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i + 1);
        }
    }
    Ok(stages)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityReport {
    /// Rows checked (t ≥ 1 with both neighbours stored).
    pub checked: usize,
    /// Every x_t equals fl(z_{t−1} − η g_{t−1}) and every z_t equals
    /// fl(z_{t−1} − η g_t), bit for bit.
    pub bitwise: bool,
    /// Largest |(x_t − z_{t−1}) + η g_{t−1}| or |(z_t − z_{t−1}) + η g_t|
    /// over all coordinates, relative to max(1, |z_{t−1}|).
    pub max_rel_deviation: f64,
}

/// Audits the two update identities along a fully stored extrapolation
/// trajectory.
pub fn verify_extrapolation_identities(traj: &Trajectory) -> Result<IdentityReport> {
    let eta = traj.eta;
    let mut checked = 0;
    let mut bitwise = true;
    let mut worst: f64 = 0.0;
    for pair in traj.records.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        if cur.t != prev.t + 1 {
            return Err(Error::arg("identity audit needs every iterate stored (record_every = 1)"));
        }
        let (Some(z_prev), Some(g_prev), Some(z), Some(g)) =
            (&prev.z, &prev.g, &cur.z, &cur.g)
        else {
            return Err(Error::arg("trajectory has no anchor sequence"));
        };
        bitwise &= cur.x == z_prev.plus_scaled(-eta, g_prev);
        bitwise &= *z == z_prev.plus_scaled(-eta, g);
        for i in 0..z.dim() {
            let scale = z_prev[i].abs().max(1.0);
            worst = worst.max(((cur.x[i] - z_prev[i]) + eta * g_prev[i]).abs() / scale);
            worst = worst.max(((z[i] - z_prev[i]) + eta * g[i]).abs() / scale);
        }
        checked += 1;
    }
    Ok(IdentityReport {
        checked,
        bitwise,
        max_rel_deviation: worst,
    })
}
