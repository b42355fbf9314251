//! Numerical checks of the analytical apparatus: the Moreau envelope and
//! proximal map, the Euclidean mirror-prox inequality, and the convergence
//! bounds for GDE, mini-batch SGDE and stagewise SGDE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{bregman_euclid, check_dims, project_ball, RngStream, Vector};
use crate::optimizers::{step_admissible, StageRecord};
use crate::problems::ObjectiveSpec;

/// Absolute slack for the deterministic bound and the lemma inequality.
pub const DETERMINISTIC_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct MoreauConfig {
    pub gamma: f64,
    /// Inner gradient-norm tolerance; `None` means 1e-10·(1 + ‖x‖).
    pub inner_tol: Option<f64>,
    pub max_inner: usize,
}

impl MoreauConfig {
    pub fn new(gamma: f64) -> Self {
        MoreauConfig {
            gamma,
            inner_tol: None,
            max_inner: 1_000_000,
        }
    }

    pub fn tolerance_at(&self, x: &Vector) -> f64 {
        self.inner_tol.unwrap_or(1e-10 * (1.0 + x.norm()))
    }

    fn validate(&self, spec: &ObjectiveSpec) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::arg(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !spec.convex && !(self.gamma * spec.lipschitz_l < 1.0) {
            return Err(Error::Precondition(format!(
                "gamma = {} must be below 1/L = {} on a non-convex objective",
                self.gamma,
                1.0 / spec.lipschitz_l
            )));
        }
        if let Some(tol) = self.inner_tol {
            if !(tol > 0.0) {
                return Err(Error::arg("inner_tol must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MoreauPoint {
    pub x_hat: Vector,
    pub f_gamma: f64,
    pub grad_f_gamma: Vector,
    pub inner_iterations: usize,
    /// ‖∇f(x̂) + (x̂ − x)/γ‖ at exit.
    pub residual: f64,
}

/// Proximal map and Moreau envelope at x, solved by gradient descent on
/// f(y) + ‖y − x‖²/(2γ) with step 1/(L + 1/γ) from y = x.
pub fn prox_moreau(spec: &ObjectiveSpec, x: &Vector, cfg: &MoreauConfig) -> Result<MoreauPoint> {
    cfg.validate(spec)?;
    check_dims(spec.dim, x.dim())?;
    let tol = cfg.tolerance_at(x);
    let inv_gamma = 1.0 / cfg.gamma;
    let step = 1.0 / (spec.lipschitz_l + inv_gamma);
    let mut y = x.clone();
    let mut iterations = 0;
    let residual = loop {
        let r = spec.gradient(&y).plus_scaled(inv_gamma, &y.sub(x));
        let norm = r.norm();
        if !norm.is_finite() {
            return Err(Error::Evaluation {
                coordinate: r.first_non_finite(),
                message: "inner proximal gradient is not finite".into(),
            });
        }
        if norm <= tol {
            break norm;
        }
        if iterations == cfg.max_inner {
            return Err(Error::Convergence {
                iterations,
                residual: norm,
                tolerance: tol,
            });
        }
        y.axpy(-step, &r);
        iterations += 1;
    };
    let f_gamma = spec.value(&y) + 0.5 * inv_gamma * y.dist_sq(x);
    let grad_f_gamma = x.sub(&y).scaled(inv_gamma);
    Ok(MoreauPoint {
        x_hat: y,
        f_gamma,
        grad_f_gamma,
        inner_iterations: iterations,
        residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoreauReport {
    pub points: usize,
    /// max of f(x̂) − f(x) − slack.
    pub descent_excess: f64,
    /// max of |‖x − x̂‖ − γ‖∇f_γ(x)‖| − 1e-12·(1 + ‖x − x̂‖).
    pub identity_excess: f64,
    /// max of ‖∇f(x̂)‖ − ‖∇f_γ(x)‖ − slack.
    pub gradient_excess: f64,
    pub pass: bool,
}

/// Checks f(x̂) ≤ f(x), ‖x − x̂‖ = γ‖∇f_γ(x)‖ and ‖∇f(x̂)‖ ≤ ‖∇f_γ(x)‖ at
/// every point, with slack 2·inner_tol on the two inequalities.
pub fn check_moreau_relations(
    spec: &ObjectiveSpec,
    points: &[Vector],
    cfg: &MoreauConfig,
) -> Result<MoreauReport> {
    let mut report = MoreauReport {
        points: points.len(),
        descent_excess: f64::NEG_INFINITY,
        identity_excess: f64::NEG_INFINITY,
        gradient_excess: f64::NEG_INFINITY,
        pass: true,
    };
    for x in points {
        let p = prox_moreau(spec, x, cfg)?;
        let slack = 2.0 * cfg.tolerance_at(x);
        let dist = x.sub(&p.x_hat).norm();
        let envelope_grad = p.grad_f_gamma.norm();
        report.descent_excess = report
            .descent_excess
            .max(spec.value(&p.x_hat) - spec.value(x) - slack);
        report.identity_excess = report
            .identity_excess
            .max((dist - cfg.gamma * envelope_grad).abs() - 1e-12 * (1.0 + dist));
        report.gradient_excess = report
            .gradient_excess
            .max(spec.gradient(&p.x_hat).norm() - envelope_grad - slack);
    }
    report.pass =
        report.descent_excess <= 0.0 && report.identity_excess <= 0.0 && report.gradient_excess <= 0.0;
    Ok(report)
}

/// One instance of the Euclidean mirror-prox inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaInstance {
    pub x: Vector,
    pub z_plus: Vector,
    /// γ ζᵀ(x − u).
    pub lhs: f64,
    /// D(u, z) − D(u, z₊) + γ²‖ξ − ζ‖² − ½(‖x − z‖² + ‖x − z₊‖²).
    pub rhs: f64,
}

/// With ω = ½‖·‖² on the ball U of `radius` around the origin, the two
/// prox steps are x = Π_U(z − γξ) and z₊ = Π_U(z − γζ).
pub fn lemma31_instance(
    z: &Vector,
    xi: &Vector,
    zeta: &Vector,
    u: &Vector,
    gamma: f64,
    radius: f64,
) -> Result<LemmaInstance> {
    if !(gamma > 0.0) {
        return Err(Error::arg(format!("gamma must be positive, got {gamma}")));
    }
    let d = z.dim();
    for v in [xi, zeta, u] {
        check_dims(d, v.dim())?;
    }
    let origin = Vector::zeros(d);
    let x = project_ball(&z.plus_scaled(-gamma, xi), &origin, radius)?;
    let z_plus = project_ball(&z.plus_scaled(-gamma, zeta), &origin, radius)?;
    let lhs = gamma * zeta.dot(&x.sub(u));
    let rhs = bregman_euclid(u, z)? - bregman_euclid(u, &z_plus)? + gamma * gamma * xi.dist_sq(zeta)
        - 0.5 * (x.dist_sq(z) + x.dist_sq(&z_plus));
    Ok(LemmaInstance { x, z_plus, lhs, rhs })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub dim: usize,
    pub radius: f64,
    pub gamma: f64,
    pub trials: usize,
    /// min over trials of rhs − lhs.
    pub worst_slack: f64,
    pub pass: bool,
}

/// Randomized check of the inequality over `n_trials` seeded instances.
///
/// z and u are uniform in the ball; ξ is Gaussian at a log-uniform scale
/// around radius/γ so both interior and clipped projections occur; ζ is
/// either independent or a small perturbation of ξ; and in half of the
/// trials u is placed at x or z₊, where the inequality is tightest.
pub fn check_lemma31(
    dim: usize,
    radius: f64,
    gamma: f64,
    n_trials: usize,
    rng: &mut RngStream,
) -> Result<LemmaReport> {
    if dim == 0 || n_trials == 0 {
        return Err(Error::arg("lemma check needs dim >= 1 and n_trials >= 1"));
    }
    if !(radius > 0.0) || !(gamma > 0.0) {
        return Err(Error::arg("radius and gamma must be positive"));
    }
    let origin = Vector::zeros(dim);
    let mut worst = f64::INFINITY;
    for _ in 0..n_trials {
        let z = rng.uniform_in_ball(&origin, radius);
        let scale = radius / gamma * 10f64.powf(rng.uniform_range(-2.0, 1.0));
        let xi = rng.normal_vector(dim, scale);
        let zeta = if rng.uniform() < 0.5 {
            rng.normal_vector(dim, scale)
        } else {
            let jitter = scale * 10f64.powf(rng.uniform_range(-4.0, 0.0));
            xi.add(&rng.normal_vector(dim, jitter))
        };
        let pick = rng.uniform();
        let u = if pick < 0.5 {
            rng.uniform_in_ball(&origin, radius)
        } else {
            let probe = lemma31_instance(&z, &xi, &zeta, &origin, gamma, radius)?;
            if pick < 0.75 {
                probe.x
            } else {
                probe.z_plus
            }
        };
        let inst = lemma31_instance(&z, &xi, &zeta, &u, gamma, radius)?;
        worst = worst.min(inst.rhs - inst.lhs);
    }
    Ok(LemmaReport {
        dim,
        radius,
        gamma,
        trials: n_trials,
        worst_slack: worst,
        pass: worst >= -DETERMINISTIC_TOLERANCE,
    })
}

/// Constants a bound was evaluated with.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub lipschitz_l: Option<f64>,
    pub eta: Option<f64>,
    pub iterations: Option<usize>,
    pub batch_m: Option<u64>,
    pub g2: Option<f64>,
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub alpha: Option<f64>,
    pub stages: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theorem_id: u8,
    pub rhs: f64,
    pub lhs: f64,
    /// Magnitude of the subtracted step-length term.
    pub negative_term: f64,
    /// rhs − lhs.
    pub slack: f64,
    /// pass ⇔ slack ≥ −tolerance.
    pub tolerance: f64,
    pub pass: bool,
    pub inputs: BoundInputs,
    /// Stagewise only: the same bound on the envelope gradient ‖∇f_γ‖²
    /// with constants (8, 192, 24/γ).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope_rhs: Option<f64>,
    /// Stagewise only: envelope_rhs · (1 + Lγ)² = (5/2)² · envelope_rhs,
    /// a valid bound on ‖∇f‖² since ‖∇f(x)‖ ≤ (1 + Lγ)‖∇f_γ(x)‖.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converted_rhs: Option<f64>,
    /// Stagewise only: "alpha>=1" or "0<alpha<1".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_branch: Option<String>,
}

impl BoundReport {
    fn new(theorem_id: u8, rhs: f64, lhs: f64, negative_term: f64, tolerance: f64, inputs: BoundInputs) -> Self {
        let slack = rhs - lhs;
        BoundReport {
            theorem_id,
            rhs,
            lhs,
            negative_term,
            slack,
            tolerance,
            pass: slack >= -tolerance,
            inputs,
            envelope_rhs: None,
            converted_rhs: None,
            alpha_branch: None,
        }
    }
}

fn check_common(delta: f64, eta: f64, iterations: usize, lipschitz_l: f64, sum: f64) -> Result<()> {
    if !(lipschitz_l > 0.0) {
        return Err(Error::Precondition(format!("L must be positive, got {lipschitz_l}")));
    }
    if !(eta > 0.0) {
        return Err(Error::Precondition(format!("eta must be positive, got {eta}")));
    }
    if !step_admissible(eta, lipschitz_l) {
        return Err(Error::Precondition(format!(
            "eta = {eta} exceeds 1/(12L) = {}",
            1.0 / (12.0 * lipschitz_l)
        )));
    }
    if iterations == 0 {
        return Err(Error::Precondition("T must be at least 1".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::Precondition(format!("initial gap must be non-negative, got {delta}")));
    }
    if !(sum >= 0.0) {
        return Err(Error::Precondition("step-length sum must be non-negative".into()));
    }
    Ok(())
}

/// Deterministic GDE bound:
/// min_t ‖∇f(x_t)‖² ≤ 8Δ₀/(ηT) − Σ‖x_{t+1} − x_t‖²/(η²T).
pub fn bound_thm1(
    delta0: f64,
    eta: f64,
    iterations: usize,
    lipschitz_l: f64,
    sum_step_diff_sq: f64,
    observed_min_grad_sq: f64,
) -> Result<BoundReport> {
    check_common(delta0, eta, iterations, lipschitz_l, sum_step_diff_sq)?;
    let t = iterations as f64;
    let negative = sum_step_diff_sq / (eta * eta * t);
    let rhs = 8.0 * delta0 / (eta * t) - negative;
    Ok(BoundReport::new(
        1,
        rhs,
        observed_min_grad_sq,
        negative,
        DETERMINISTIC_TOLERANCE,
        BoundInputs {
            lipschitz_l: Some(lipschitz_l),
            eta: Some(eta),
            iterations: Some(iterations),
            delta: Some(delta0),
            ..Default::default()
        },
    ))
}

/// Mini-batch SGDE bound in expectation:
/// 3LηG²/(2T) + 8Δ₀/(ηT) + 72G²/m − E[Σ‖x_{t+1} − x_t‖²]/(η²T).
/// Observations are seed means; `statistical_slack` (typically three
/// standard errors) is the pass tolerance.
#[allow(clippy::too_many_arguments)]
pub fn bound_thm2(
    delta0: f64,
    eta: f64,
    iterations: usize,
    lipschitz_l: f64,
    g2: f64,
    batch_m: u64,
    sum_step_diff_sq_mean: f64,
    observed_mean_min_grad_sq: f64,
    statistical_slack: f64,
) -> Result<BoundReport> {
    check_common(delta0, eta, iterations, lipschitz_l, sum_step_diff_sq_mean)?;
    if batch_m == 0 {
        return Err(Error::Precondition("m must be at least 1".into()));
    }
    if !(g2 >= 0.0) || !(statistical_slack >= 0.0) {
        return Err(Error::Precondition("G² and the statistical slack must be non-negative".into()));
    }
    let t = iterations as f64;
    let negative = sum_step_diff_sq_mean / (eta * eta * t);
    let rhs = 3.0 * lipschitz_l * eta * g2 / (2.0 * t) + 8.0 * delta0 / (eta * t)
        + 72.0 * g2 / batch_m as f64
        - negative;
    Ok(BoundReport::new(
        2,
        rhs,
        observed_mean_min_grad_sq,
        negative,
        statistical_slack,
        BoundInputs {
            lipschitz_l: Some(lipschitz_l),
            eta: Some(eta),
            iterations: Some(iterations),
            batch_m: Some(batch_m),
            g2: Some(g2),
            delta: Some(delta0),
            ..Default::default()
        },
    ))
}

/// Stagewise SGDE bound in expectation on ‖∇f(x^τ)‖².
///
/// For α ≥ 1: 20Δ(α+1)/(γ(S+1)) + 480G²c(α+1)/(S+1) − 60 Σ w_s D_{T_s} / (γ Σ w_s);
/// for 0 < α < 1 the G² term is further divided by α. Weighted sums run
/// over the S recorded stages. The report also carries the envelope-level
/// form and its (5/2)² conversion.
#[allow(clippy::too_many_arguments)]
pub fn bound_thm3(
    delta: f64,
    gamma: f64,
    c: f64,
    alpha: f64,
    stages: usize,
    g2: f64,
    stage_records: &[StageRecord],
    observed_mean_grad_sq_at_tau: f64,
    statistical_slack: f64,
) -> Result<BoundReport> {
    if !(gamma > 0.0) || !(c > 0.0 && c <= 1.0) || !(alpha > 0.0) || stages == 0 {
        return Err(Error::Precondition(format!(
            "schedule needs gamma > 0, c in (0, 1], alpha > 0, S >= 1 (got {gamma}, {c}, {alpha}, {stages})"
        )));
    }
    if stage_records.len() != stages {
        return Err(Error::Precondition(format!(
            "expected {stages} stage records, got {}",
            stage_records.len()
        )));
    }
    if let Some((i, r)) = stage_records.iter().enumerate().find(|(i, r)| r.s != i + 1) {
        return Err(Error::Precondition(format!("stage record {i} has index {}", r.s)));
    }
    if !(delta >= 0.0) || !(g2 >= 0.0) || !(statistical_slack >= 0.0) {
        return Err(Error::Precondition("Δ, G² and the slack must be non-negative".into()));
    }
    let (mut weighted_d, mut weight_total) = (0.0, 0.0);
    for r in stage_records {
        if !(r.d_ts >= 0.0) {
            return Err(Error::Precondition(format!("D_T at stage {} is negative", r.s)));
        }
        let w = (r.s as f64).powf(alpha);
        weighted_d += w * r.d_ts;
        weight_total += w;
    }
    let s1 = stages as f64 + 1.0;
    let branch_div = if alpha >= 1.0 { 1.0 } else { alpha };
    let weighted_mean_d = weighted_d / weight_total;

    let negative = 60.0 * weighted_mean_d / gamma;
    let rhs = 20.0 * delta * (alpha + 1.0) / (gamma * s1) + 480.0 * g2 * c * (alpha + 1.0) / (branch_div * s1)
        - negative;
    let envelope = 8.0 * delta * (alpha + 1.0) / (gamma * s1)
        + 192.0 * g2 * c * (alpha + 1.0) / (branch_div * s1)
        - 24.0 * weighted_mean_d / gamma;

    let mut report = BoundReport::new(
        3,
        rhs,
        observed_mean_grad_sq_at_tau,
        negative,
        statistical_slack,
        BoundInputs {
            g2: Some(g2),
            delta: Some(delta),
            gamma: Some(gamma),
            c: Some(c),
            alpha: Some(alpha),
            stages: Some(stages),
            ..Default::default()
        },
    );
    report.envelope_rhs = Some(envelope);
    report.converted_rhs = Some(6.25 * envelope);
    report.alpha_branch = Some(if alpha >= 1.0 { "alpha>=1" } else { "0<alpha<1" }.into());
    Ok(report)
}

/// T = ⌈8Δ₀/(ηε²)⌉, enough iterations for min_t ‖∇f(x_t)‖ ≤ ε.
pub fn thm1_iterations_for(delta0: f64, eta: f64, epsilon: f64) -> f64 {
    (8.0 * delta0 / (eta * epsilon * epsilon)).ceil()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::build_problem;
    use serde_json::json;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn prox_of_half_square() {
        let q = build_problem("quadratic", &json!({"dim": 1})).unwrap();
        let p = prox_moreau(&q, &v(&[1.0]), &MoreauConfig::new(1.0)).unwrap();
        assert!((p.x_hat[0] - 0.5).abs() < 1e-10);
        assert!((p.f_gamma - 0.25).abs() < 1e-10);
        assert!((p.grad_f_gamma[0] - 0.5).abs() < 1e-10);
        let p = prox_moreau(&q, &v(&[2.0]), &MoreauConfig::new(0.25)).unwrap();
        assert!((p.x_hat[0] - 1.6).abs() < 1e-10);
    }

    #[test]
    fn prox_at_minimizer_is_fixed() {
        let r = build_problem("rosenbrock", &json!({})).unwrap();
        let cfg = MoreauConfig::new(0.25 / r.lipschitz_l);
        let p = prox_moreau(&r, &v(&[1.0, 1.0]), &cfg).unwrap();
        assert_eq!(p.x_hat, v(&[1.0, 1.0]));
        assert_eq!(p.grad_f_gamma.norm(), 0.0);
        let rep = check_moreau_relations(&r, &[v(&[1.0, 1.0])], &cfg).unwrap();
        assert!(rep.pass);
    }

    #[test]
    fn prox_rejects_large_gamma_on_nonconvex() {
        let s = build_problem("saddle_quadratic", &json!({})).unwrap();
        assert!(matches!(
            prox_moreau(&s, &v(&[1.0, 1.0]), &MoreauConfig::new(1.0)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn prox_reports_non_convergence() {
        let r = build_problem("rosenbrock", &json!({})).unwrap();
        let mut cfg = MoreauConfig::new(0.25 / r.lipschitz_l);
        cfg.max_inner = 2;
        cfg.inner_tol = Some(1e-14);
        match prox_moreau(&r, &v(&[-1.5, 1.7]), &cfg) {
            Err(Error::Convergence { iterations, residual, .. }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lemma_equality_instances() {
        let inst = lemma31_instance(&v(&[0.0]), &v(&[0.5]), &v(&[0.3]), &v(&[0.0]), 1.0, 10.0).unwrap();
        assert!((inst.lhs + 0.15).abs() < 1e-12);
        assert!((inst.rhs + 0.15).abs() < 1e-12);

        let z = v(&[0.0]);
        let one = v(&[1.0]);
        let probe = lemma31_instance(&z, &one, &one, &z, 1.0, 10.0).unwrap();
        let inst = lemma31_instance(&z, &one, &one, &probe.x, 1.0, 10.0).unwrap();
        assert_eq!(inst.x, inst.z_plus);
        assert!(inst.lhs.abs() < 1e-12 && inst.rhs.abs() < 1e-12);
    }

    #[test]
    fn lemma_random_small() {
        let mut rng = RngStream::new(1, 31);
        let rep = check_lemma31(3, 2.0, 0.5, 2000, &mut rng).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(check_lemma31(0, 1.0, 1.0, 1, &mut rng).is_err());
    }

    #[test]
    fn thm1_arithmetic() {
        let r = bound_thm1(0.5, 1.0 / 12.0, 100, 1.0, 0.1, 0.0).unwrap();
        assert!((r.rhs - 0.336).abs() < 1e-12);
        assert!((r.negative_term - 0.144).abs() < 1e-12);
        let r = bound_thm1(0.5, 1.0 / 12.0, 100, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(r.rhs, 8.0 * 0.5 / ((1.0 / 12.0) * 100.0));
        assert_eq!(r.negative_term, 0.0);
        assert!(matches!(
            bound_thm1(0.5, 1.0 / 6.0, 100, 1.0, 0.0, 0.0),
            Err(Error::Precondition(_))
        ));
        let r = bound_thm1(0.5, 1.0 / 12.0, 100, 1.0, 0.0, 0.49).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn thm2_arithmetic() {
        let r = bound_thm2(0.5, 1.0 / 12.0, 100, 1.0, 1.0, 100, 0.0, 0.0, 0.0).unwrap();
        assert!((r.rhs - 1.20125).abs() < 1e-12, "{}", r.rhs);
        // noiseless with m = 1 collapses to the deterministic bound
        let r2 = bound_thm2(0.5, 1.0 / 12.0, 100, 1.0, 0.0, 1, 0.1, 0.0, 0.0).unwrap();
        let r1 = bound_thm1(0.5, 1.0 / 12.0, 100, 1.0, 0.1, 0.0).unwrap();
        assert_eq!(r2.rhs, r1.rhs);
        // large m leaves only the 3LηG²/(2T) excess
        let big = bound_thm2(0.5, 1.0 / 12.0, 100, 1.0, 1.0, u64::MAX, 0.1, 0.0, 0.0).unwrap();
        let excess = 3.0 * (1.0 / 12.0) / 200.0;
        assert!((big.rhs - (r1.rhs + excess)).abs() < 1e-12);
    }

    fn records(stages: usize, d: f64) -> Vec<StageRecord> {
        (1..=stages)
            .map(|s| StageRecord {
                s,
                eta_s: 0.25 / (3.0 * s as f64),
                iterations: 36 * s,
                weight: s as f64,
                x_end: Vector::zeros(1),
                d_ts: d,
            })
            .collect()
    }

    #[test]
    fn thm3_arithmetic() {
        let r = bound_thm3(1.0, 0.25, 1.0, 1.0, 99, 1.0, &records(99, 0.0), 0.0, 0.0).unwrap();
        assert!((r.rhs - 11.2).abs() < 1e-12, "{}", r.rhs);
        assert_eq!(r.negative_term, 0.0);
        assert_eq!(r.alpha_branch.as_deref(), Some("alpha>=1"));
        assert!((r.converted_rhs.unwrap() - 6.25 * r.envelope_rhs.unwrap()).abs() < 1e-12);

        let half = bound_thm3(1.0, 0.25, 1.0, 0.5, 99, 1.0, &records(99, 0.0), 0.0, 0.0).unwrap();
        assert_eq!(half.alpha_branch.as_deref(), Some("0<alpha<1"));
        let expected = 20.0 * 1.5 / (0.25 * 100.0) + 480.0 * 1.5 / (0.5 * 100.0);
        assert!((half.rhs - expected).abs() < 1e-12);

        // a constant D subtracts exactly 60 D / γ
        let d = bound_thm3(1.0, 0.25, 1.0, 2.0, 10, 1.0, &records(10, 0.01), 0.0, 0.0).unwrap();
        assert!((d.negative_term - 60.0 * 0.01 / 0.25).abs() < 1e-12);

        assert!(bound_thm3(1.0, 0.25, 1.0, 2.0, 10, 1.0, &records(9, 0.0), 0.0, 0.0).is_err());
        assert!(bound_thm3(1.0, 0.25, 1.5, 2.0, 10, 1.0, &records(10, 0.0), 0.0, 0.0).is_err());
    }

    #[test]
    fn bounds_are_pure() {
        let a = bound_thm2(3.3, 0.01, 777, 7.0, 0.9, 10, 0.123, 0.5, 0.1).unwrap();
        let b = bound_thm2(3.3, 0.01, 777, 7.0, 0.9, 10, 0.123, 0.5, 0.1).unwrap();
        assert_eq!(a.rhs.to_bits(), b.rhs.to_bits());
    }
}
