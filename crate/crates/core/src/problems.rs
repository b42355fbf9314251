//! Smooth test objectives with analytic gradients and certified constants,
//! plus stochastic gradient oracles built on top of them.
//!
//! Every objective carries a test box `[-box, box]^d`. Constants that cannot
//! be certified globally (Rosenbrock's smoothness constant, the gap bound Δ
//! of unbounded objectives) are certified on that box only.

use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::numkit::{check_dims, default_fd_step, finite_diff_grad, RngStream, Vector};

/// Problem families accepted by [`build_problem`].
pub const PROBLEM_NAMES: [&str; 4] = ["quadratic", "rosenbrock", "saddle_quadratic", "sigmoid_loss"];

pub const DEFAULT_BOX: f64 = 2.0;

/// max over u of |d²/du² 1/(1+eᵘ)|, attained where s(1−s) peaks against 1−2s.
const SIGMOID_CURVATURE_MAX: f64 = 0.096_225_044_864_937_63;

/// Stream id reserved for synthetic dataset generation ("SIGM").
const DATASET_STREAM: u64 = 0x5349_474d;
/// Stream id reserved for build-time sampling of constants ("CERT").
const CERTIFY_STREAM: u64 = 0x4345_5254;

#[derive(Clone, Debug)]
pub enum ProblemKind {
    /// ½xᵀAx − bᵀx with symmetric A stored row-major.
    Quadratic { a: Vec<f64>, b: Vector },
    Rosenbrock,
    /// ½xᵀ diag(d) x with mixed-sign d.
    SaddleQuadratic { diag: Vec<f64> },
    /// (1/n) Σᵢ 1/(1 + exp(yᵢ wᵀaᵢ)).
    SigmoidLoss { features: Vec<Vector>, labels: Vec<f64> },
    /// Uniform average of component objectives.
    FiniteSum { components: Vec<ObjectiveSpec> },
}

#[derive(Clone, Debug)]
pub struct ObjectiveSpec {
    pub name: String,
    pub dim: usize,
    pub kind: ProblemKind,
    pub lipschitz_l: f64,
    pub f_opt: Option<f64>,
    /// Upper bound on f(x) − f_opt over the test box (or globally, when the
    /// objective is bounded).
    pub gap_bound: Option<f64>,
    /// Half-width of the test box `[-box, box]^dim`.
    pub test_box: f64,
    /// Known convexity; relaxes the γ < 1/L requirement of the Moreau solver.
    pub convex: bool,
}

fn sigmoid(u: f64) -> f64 {
    // 1 / (1 + e^u), stable for both signs
    if u > 0.0 {
        let e = (-u).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + u.exp())
    }
}

impl ObjectiveSpec {
    pub fn quadratic(matrix: Vec<Vec<f64>>, b: Vector) -> Result<Self> {
        let dim = b.dim();
        if dim == 0 {
            return Err(Error::arg("quadratic needs dim >= 1"));
        }
        if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) {
            return Err(Error::arg(format!("quadratic matrix must be {dim}x{dim}")));
        }
        let mut a = Vec::with_capacity(dim * dim);
        for (i, row) in matrix.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::arg(format!("matrix[{i}][{j}] is not finite")));
                }
                if (v - matrix[j][i]).abs() > 1e-12 * (1.0 + v.abs()) {
                    return Err(Error::arg(format!("matrix is not symmetric at ({i},{j})")));
                }
                a.push(v);
            }
        }
        let m = DMatrix::from_row_slice(dim, dim, &a);
        let eig = m.clone().symmetric_eigen();
        let lmin = eig.eigenvalues.min();
        let lmax = eig.eigenvalues.max();
        let lipschitz_l = lmax.abs().max(lmin.abs());
        if !(lipschitz_l > 0.0) {
            return Err(Error::arg("quadratic matrix is zero"));
        }
        let convex = lmin >= 0.0;
        let f_opt = if lmin > 1e-12 * lmax {
            let bb = DVector::from_column_slice(b.as_slice());
            m.cholesky().map(|c| -0.5 * bb.dot(&c.solve(&bb)))
        } else if convex && b.norm() == 0.0 {
            Some(0.0)
        } else {
            None
        };
        let mut spec = ObjectiveSpec {
            name: "quadratic".into(),
            dim,
            kind: ProblemKind::Quadratic { a, b },
            lipschitz_l,
            f_opt,
            gap_bound: None,
            test_box: DEFAULT_BOX,
            convex,
        };
        spec.gap_bound = spec.certify_gap();
        Ok(spec)
    }

    pub fn quadratic_diag(diag: &[f64], b: Vector) -> Result<Self> {
        let n = diag.len();
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { diag[i] } else { 0.0 }).collect())
            .collect();
        Self::quadratic(matrix, b)
    }

    /// Chained Rosenbrock in `dim` variables, minimum 0 at (1, …, 1).
    pub fn rosenbrock(dim: usize, test_box: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::arg("rosenbrock needs dim >= 2"));
        }
        check_box(test_box)?;
        let mut spec = ObjectiveSpec {
            name: "rosenbrock".into(),
            dim,
            kind: ProblemKind::Rosenbrock,
            lipschitz_l: f64::NAN,
            f_opt: Some(0.0),
            gap_bound: None,
            test_box,
            convex: false,
        };
        spec.lipschitz_l = rosenbrock_box_lipschitz(dim, test_box);
        spec.gap_bound = spec.certify_gap();
        Ok(spec)
    }

    pub fn saddle_quadratic(diag: Vec<f64>) -> Result<Self> {
        if diag.iter().any(|d| !d.is_finite()) {
            return Err(Error::arg("saddle_quadratic diagonal must be finite"));
        }
        if !(diag.iter().any(|&d| d > 0.0) && diag.iter().any(|&d| d < 0.0)) {
            return Err(Error::arg(
                "saddle_quadratic diagonal needs both positive and negative entries",
            ));
        }
        let lipschitz_l = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        Ok(ObjectiveSpec {
            name: "saddle_quadratic".into(),
            dim: diag.len(),
            kind: ProblemKind::SaddleQuadratic { diag },
            lipschitz_l,
            f_opt: None,
            gap_bound: None,
            test_box: DEFAULT_BOX,
            convex: false,
        })
    }

    /// Sigmoid loss over a synthetic dataset.
    ///
    /// Recipe: a planted direction w* ~ N(0, I) is drawn first, then for each
    /// sample a feature vector aᵢ ~ N(0, I) and label yᵢ = sign(w*ᵀaᵢ) (zero
    /// maps to +1), flipped with probability `flip_prob`. All draws come from
    /// one stream `(seed, DATASET_STREAM)` in that order.
    pub fn sigmoid_loss(dim: usize, n_samples: usize, seed: u64, flip_prob: f64) -> Result<Self> {
        if dim == 0 || n_samples == 0 {
            return Err(Error::arg("sigmoid_loss needs dim >= 1 and n_samples >= 1"));
        }
        if !(0.0..=1.0).contains(&flip_prob) {
            return Err(Error::arg("flip_prob must lie in [0, 1]"));
        }
        let mut rng = RngStream::new(seed, DATASET_STREAM);
        let planted = rng.normal_vector(dim, 1.0);
        let mut features = Vec::with_capacity(n_samples);
        let mut labels = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let a = rng.normal_vector(dim, 1.0);
            let mut y = if planted.dot(&a) >= 0.0 { 1.0 } else { -1.0 };
            if rng.uniform() < flip_prob {
                y = -y;
            }
            features.push(a);
            labels.push(y);
        }
        // Hessian = (1/n) Σ s''(uᵢ) aᵢaᵢᵀ, so L ≤ max|s''| · λmax((1/n) Σ aᵢaᵢᵀ)
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        for a in &features {
            let v = DVector::from_column_slice(a.as_slice());
            cov += &v * v.transpose();
        }
        cov /= n_samples as f64;
        let lmax = cov.symmetric_eigen().eigenvalues.max();
        Ok(ObjectiveSpec {
            name: "sigmoid_loss".into(),
            dim,
            kind: ProblemKind::SigmoidLoss { features, labels },
            lipschitz_l: SIGMOID_CURVATURE_MAX * lmax,
            f_opt: None,
            // values lie in (0, 1), so the gap is below 1 everywhere
            gap_bound: Some(1.0),
            test_box: DEFAULT_BOX,
            convex: false,
        })
    }

    /// Uniform average of `components`; L is bounded by the mean of the
    /// component constants.
    pub fn finite_sum(name: impl Into<String>, components: Vec<ObjectiveSpec>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::arg("finite_sum needs at least one component"))?;
        let dim = first.dim;
        if components.iter().any(|c| c.dim != dim) {
            return Err(Error::arg("finite_sum components must share a dimension"));
        }
        let n = components.len() as f64;
        let lipschitz_l = components.iter().map(|c| c.lipschitz_l).sum::<f64>() / n;
        let test_box = components.iter().map(|c| c.test_box).fold(f64::INFINITY, f64::min);
        let convex = components.iter().all(|c| c.convex);
        Ok(ObjectiveSpec {
            name: name.into(),
            dim,
            kind: ProblemKind::FiniteSum { components },
            lipschitz_l,
            f_opt: None,
            gap_bound: None,
            test_box,
            convex,
        })
    }

    pub fn with_test_box(mut self, test_box: f64) -> Result<Self> {
        check_box(test_box)?;
        self.test_box = test_box;
        if let ProblemKind::Rosenbrock = self.kind {
            self.lipschitz_l = rosenbrock_box_lipschitz(self.dim, test_box);
        }
        if !matches!(self.kind, ProblemKind::SigmoidLoss { .. }) {
            self.gap_bound = self.certify_gap();
        }
        Ok(self)
    }

    pub fn eval_f(&self, x: &Vector) -> Result<f64> {
        check_dims(self.dim, x.dim())?;
        let v = self.value(x);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                coordinate: None,
                message: format!("{}(x) = {v}", self.name),
            });
        }
        Ok(v)
    }

    pub fn eval_grad(&self, x: &Vector) -> Result<Vector> {
        check_dims(self.dim, x.dim())?;
        let g = self.gradient(x);
        if let Some(i) = g.first_non_finite() {
            return Err(Error::Evaluation {
                coordinate: Some(i),
                message: format!("gradient of {} is {}", self.name, g[i]),
            });
        }
        Ok(g)
    }

    /// Objective value without dimension or finiteness checks.
    pub(crate) fn value(&self, x: &Vector) -> f64 {
        let x = x.as_slice();
        match &self.kind {
            ProblemKind::Quadratic { a, b } => {
                let n = self.dim;
                let mut quad = 0.0;
                for i in 0..n {
                    let row = &a[i * n..(i + 1) * n];
                    let ax: f64 = row.iter().zip(x).map(|(r, v)| r * v).sum();
                    quad += x[i] * ax;
                }
                let bx: f64 = b.iter().zip(x).map(|(b, v)| b * v).sum();
                0.5 * quad - bx
            }
            ProblemKind::Rosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
            ProblemKind::SaddleQuadratic { diag } => {
                0.5 * diag.iter().zip(x).map(|(d, v)| d * v * v).sum::<f64>()
            }
            ProblemKind::SigmoidLoss { features, labels } => {
                let total: f64 = features
                    .iter()
                    .zip(labels)
                    .map(|(a, y)| sigmoid(y * dot(a.as_slice(), x)))
                    .sum();
                total / features.len() as f64
            }
            ProblemKind::FiniteSum { components } => {
                let xv = Vector::from_raw(x.to_vec());
                components.iter().map(|c| c.value(&xv)).sum::<f64>() / components.len() as f64
            }
        }
    }

    /// Analytic gradient without dimension or finiteness checks.
    pub(crate) fn gradient(&self, x: &Vector) -> Vector {
        let xs = x.as_slice();
        let n = self.dim;
        match &self.kind {
            ProblemKind::Quadratic { a, b } => Vector::from_raw(
                (0..n)
                    .map(|i| dot(&a[i * n..(i + 1) * n], xs) - b[i])
                    .collect(),
            ),
            ProblemKind::Rosenbrock => {
                let mut g = vec![0.0; n];
                for i in 0..n - 1 {
                    let r = xs[i + 1] - xs[i] * xs[i];
                    g[i] += -400.0 * xs[i] * r - 2.0 * (1.0 - xs[i]);
                    g[i + 1] += 200.0 * r;
                }
                Vector::from_raw(g)
            }
            ProblemKind::SaddleQuadratic { diag } => {
                Vector::from_raw(diag.iter().zip(xs).map(|(d, v)| d * v).collect())
            }
            ProblemKind::SigmoidLoss { .. } | ProblemKind::FiniteSum { .. } => {
                let count = self.component_count().unwrap_or(1);
                let mut g = Vector::zeros(n);
                for i in 0..count {
                    g.axpy(1.0, &self.component_gradient(i, x));
                }
                g.scaled(1.0 / count as f64)
            }
        }
    }

    /// Number of components when the objective is a finite sum.
    pub fn component_count(&self) -> Option<usize> {
        match &self.kind {
            ProblemKind::SigmoidLoss { features, .. } => Some(features.len()),
            ProblemKind::FiniteSum { components } => Some(components.len()),
            _ => None,
        }
    }

    pub(crate) fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
        match &self.kind {
            ProblemKind::SigmoidLoss { features, labels } => {
                let a = &features[i];
                let y = labels[i];
                let s = sigmoid(y * a.dot(x));
                // d/du 1/(1+eᵘ) = −s(1−s)
                a.scaled(-s * (1.0 - s) * y)
            }
            ProblemKind::FiniteSum { components } => components[i].gradient(x),
            _ => self.gradient(x),
        }
    }

    /// f(x0) − f_opt, the Δ₀ of the deterministic and mini-batch bounds.
    pub fn initial_gap(&self, x0: &Vector) -> Option<f64> {
        let f_opt = self.f_opt?;
        self.eval_f(x0).ok().map(|f| f - f_opt)
    }

    /// Upper bound on f(x) − f_opt over the test box.
    fn certify_gap(&self) -> Option<f64> {
        let f_opt = self.f_opt?;
        let b = self.test_box;
        match &self.kind {
            // convex: the box maximum sits at a vertex
            ProblemKind::Quadratic { .. } if self.convex && self.dim <= 16 => {
                let n = self.dim;
                let mut best = f64::NEG_INFINITY;
                for mask in 0u32..(1u32 << n) {
                    let v: Vec<f64> = (0..n)
                        .map(|i| if mask >> i & 1 == 1 { b } else { -b })
                        .collect();
                    best = best.max(self.value(&Vector::from_raw(v)));
                }
                Some(best - f_opt)
            }
            ProblemKind::Quadratic { a, b: lin } => {
                let abs_quad: f64 = a.iter().map(|v| v.abs()).sum::<f64>() * b * b;
                let abs_lin: f64 = lin.iter().map(|v| v.abs()).sum::<f64>() * b;
                Some(0.5 * abs_quad + abs_lin - f_opt)
            }
            ProblemKind::Rosenbrock => {
                let term = 100.0 * (b + b * b).powi(2) + (1.0 + b).powi(2);
                Some(term * (self.dim - 1) as f64 - f_opt)
            }
            _ => None,
        }
    }

    /// Largest ‖∇f(x) − ∇f(y)‖ / ‖x − y‖ over `pairs` seeded pairs in the
    /// test box, paired with L.
    pub fn sampled_lipschitz_ratio(&self, pairs: usize, rng: &mut RngStream) -> f64 {
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let x = rng.uniform_in_box(self.dim, -self.test_box, self.test_box);
            let y = rng.uniform_in_box(self.dim, -self.test_box, self.test_box);
            let d = x.sub(&y).norm();
            if d > 0.0 {
                worst = worst.max(self.gradient(&x).sub(&self.gradient(&y)).norm() / d);
            }
        }
        worst
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_box(test_box: f64) -> Result<()> {
    if !(test_box > 0.0) || !test_box.is_finite() {
        return Err(Error::arg(format!("test box half-width must be positive, got {test_box}")));
    }
    Ok(())
}

fn rosenbrock_hessian(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        h[(i, i)] += 1200.0 * x[i] * x[i] - 400.0 * x[i + 1] + 2.0;
        h[(i + 1, i + 1)] += 200.0;
        h[(i, i + 1)] = -400.0 * x[i];
        h[(i + 1, i)] = -400.0 * x[i];
    }
    h
}

fn spectral_norm(h: DMatrix<f64>) -> f64 {
    let e = h.symmetric_eigen().eigenvalues;
    e.max().abs().max(e.min().abs())
}

/// Sup of the Hessian spectral norm over `[-box, box]^n`, estimated by
/// dense sampling: a uniform grid for n ≤ 3, every vertex for n ≤ 12, and
/// seeded vertex/interior draws otherwise.
fn rosenbrock_box_lipschitz(n: usize, test_box: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut visit = |x: &[f64]| worst = worst.max(spectral_norm(rosenbrock_hessian(x)));
    if n <= 3 {
        let k = 41usize;
        let grid: Vec<f64> = (0..k)
            .map(|i| -test_box + 2.0 * test_box * i as f64 / (k - 1) as f64)
            .collect();
        let total = k.pow(n as u32);
        let mut x = vec![0.0; n];
        for mut idx in 0..total {
            for xi in x.iter_mut() {
                *xi = grid[idx % k];
                idx /= k;
            }
            visit(&x);
        }
    } else {
        if n <= 12 {
            for mask in 0u32..(1u32 << n) {
                let x: Vec<f64> = (0..n)
                    .map(|i| if mask >> i & 1 == 1 { test_box } else { -test_box })
                    .collect();
                visit(&x);
            }
        }
        let mut rng = RngStream::new(n as u64, CERTIFY_STREAM);
        for k in 0..4096 {
            let x: Vec<f64> = if k % 2 == 0 {
                (0..n)
                    .map(|_| if rng.uniform() < 0.5 { -test_box } else { test_box })
                    .collect()
            } else {
                (0..n).map(|_| rng.uniform_range(-test_box, test_box)).collect()
            };
            visit(&x);
        }
    }
    worst
}

fn param_f64(params: &Map<String, Value>, key: &str) -> Result<Option<f64>> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| Error::arg(format!("param `{key}` must be a number"))),
    }
}

fn param_usize(params: &Map<String, Value>, key: &str) -> Result<Option<usize>> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|u| Some(u as usize))
            .ok_or_else(|| Error::arg(format!("param `{key}` must be a non-negative integer"))),
    }
}

fn param_vec(params: &Map<String, Value>, key: &str) -> Result<Option<Vec<f64>>> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| Error::arg(format!("param `{key}` must hold numbers")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some),
        Some(_) => Err(Error::arg(format!("param `{key}` must be an array"))),
    }
}

fn param_matrix(params: &Map<String, Value>, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Array(rows)) => rows
            .iter()
            .map(|row| match row {
                Value::Array(cells) => cells
                    .iter()
                    .map(|c| {
                        c.as_f64()
                            .ok_or_else(|| Error::arg(format!("param `{key}` must hold numbers")))
                    })
                    .collect(),
                _ => Err(Error::arg(format!("param `{key}` must be an array of rows"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some),
        Some(_) => Err(Error::arg(format!("param `{key}` must be an array of rows"))),
    }
}

fn reject_unknown(params: &Map<String, Value>, allowed: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::arg(format!("unknown param `{key}`")));
        }
    }
    Ok(())
}

/// Instantiates a registered problem family from a key-value map.
///
/// | name | params |
/// |---|---|
/// | `quadratic` | `dim` (identity A), or `diag`, or `matrix`; optional `b`, `box` |
/// | `rosenbrock` | `dim` (default 2), `box` |
/// | `saddle_quadratic` | `diag` (default `[1, -1]`), `box` |
/// | `sigmoid_loss` | `dim` (default 5), `n_samples` (default 200), `seed` (default 0), `flip_prob` (default 0.1), `box` |
pub fn build_problem(name: &str, params: &Value) -> Result<ObjectiveSpec> {
    let empty = Map::new();
    let params = match params {
        Value::Object(m) => m,
        Value::Null => &empty,
        _ => return Err(Error::arg("problem params must be an object")),
    };
    let test_box = param_f64(params, "box")?.unwrap_or(DEFAULT_BOX);
    check_box(test_box)?;
    let spec = match name {
        "quadratic" => {
            reject_unknown(params, &["dim", "diag", "matrix", "b", "box"])?;
            let diag = param_vec(params, "diag")?;
            let matrix = param_matrix(params, "matrix")?;
            let dim_param = param_usize(params, "dim")?;
            let matrix = match (diag, matrix) {
                (Some(_), Some(_)) => {
                    return Err(Error::arg("quadratic takes either `diag` or `matrix`, not both"))
                }
                (Some(d), None) => diag_matrix(&d),
                (None, Some(m)) => m,
                (None, None) => {
                    let n = dim_param.ok_or_else(|| {
                        Error::arg("quadratic needs one of `dim`, `diag`, `matrix`")
                    })?;
                    diag_matrix(&vec![1.0; n])
                }
            };
            let n = matrix.len();
            if let Some(d) = dim_param {
                if d != n {
                    return Err(Error::arg(format!("`dim` = {d} disagrees with A ({n}x{n})")));
                }
            }
            let b = match param_vec(params, "b")? {
                Some(b) => Vector::new(b)?,
                None => Vector::zeros(n),
            };
            if b.dim() != n {
                return Err(Error::arg(format!("`b` has length {}, expected {n}", b.dim())));
            }
            ObjectiveSpec::quadratic(matrix, b)?
        }
        "rosenbrock" => {
            reject_unknown(params, &["dim", "box"])?;
            ObjectiveSpec::rosenbrock(param_usize(params, "dim")?.unwrap_or(2), test_box)?
        }
        "saddle_quadratic" => {
            reject_unknown(params, &["diag", "box"])?;
            ObjectiveSpec::saddle_quadratic(param_vec(params, "diag")?.unwrap_or(vec![1.0, -1.0]))?
        }
        "sigmoid_loss" => {
            reject_unknown(params, &["dim", "n_samples", "seed", "flip_prob", "box"])?;
            ObjectiveSpec::sigmoid_loss(
                param_usize(params, "dim")?.unwrap_or(5),
                param_usize(params, "n_samples")?.unwrap_or(200),
                params.get("seed").and_then(Value::as_u64).unwrap_or(0),
                param_f64(params, "flip_prob")?.unwrap_or(0.1),
            )?
        }
        other => {
            return Err(Error::arg(format!(
                "unknown problem `{other}` (expected one of {PROBLEM_NAMES:?})"
            )))
        }
    };
    if test_box != spec.test_box {
        spec.with_test_box(test_box)
    } else {
        Ok(spec)
    }
}

fn diag_matrix(d: &[f64]) -> Vec<Vec<f64>> {
    let n = d.len();
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { d[i] } else { 0.0 }).collect())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub pass: bool,
}

/// Compares the analytic gradient against central differences. The error
/// on coordinate i is |gᵢ − g̃ᵢ| / max(|gᵢ|, |g̃ᵢ|, 1): relative for large
/// components, absolute near zero.
pub fn check_grad(spec: &ObjectiveSpec, x: &Vector, h: f64, rel_tol: f64) -> Result<GradCheck> {
    if !(rel_tol >= 0.0) {
        return Err(Error::arg("rel_tol must be non-negative"));
    }
    let analytic = spec.eval_grad(x)?;
    let numeric = finite_diff_grad(|p| spec.value(p), x, h)?;
    let max_rel_err = analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1.0))
        .fold(0.0, f64::max);
    Ok(GradCheck {
        max_rel_err,
        pass: max_rel_err <= rel_tol,
    })
}

/// [`check_grad`] with the default step `1e-6 (1 + ‖x‖∞)`.
pub fn check_grad_default(spec: &ObjectiveSpec, x: &Vector, rel_tol: f64) -> Result<GradCheck> {
    check_grad(spec, x, default_fd_step(x), rel_tol)
}

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    None,
    /// ∇f(x; ξ) = ∇f(x) + σ·ξ with ξ ~ N(0, I).
    AdditiveGaussian { sigma: f64 },
    /// ∇f(x; i) = ∇fᵢ(x) with i uniform over the base's components.
    FiniteSum,
}

#[derive(Clone, Debug)]
pub struct StochasticOracle {
    pub base: ObjectiveSpec,
    pub noise: NoiseModel,
    /// Declared bound G² on E‖∇f(x; ξ) − ∇f(x)‖².
    pub variance_bound_g2: f64,
}

impl StochasticOracle {
    pub fn exact(base: ObjectiveSpec) -> Self {
        StochasticOracle {
            base,
            noise: NoiseModel::None,
            variance_bound_g2: 0.0,
        }
    }

    /// G² = dim · σ².
    pub fn additive_gaussian(base: ObjectiveSpec, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::arg(format!("sigma must be a finite non-negative number, got {sigma}")));
        }
        let g2 = base.dim as f64 * sigma * sigma;
        Ok(StochasticOracle {
            base,
            noise: NoiseModel::AdditiveGaussian { sigma },
            variance_bound_g2: g2,
        })
    }

    /// Component sampling over a finite-sum base. G² is 1.5× the largest
    /// exact component variance found at `probe_points` seeded points of the
    /// test box.
    pub fn finite_sum(base: ObjectiveSpec, probe_points: usize, seed: u64) -> Result<Self> {
        let n = base
            .component_count()
            .ok_or_else(|| Error::arg(format!("`{}` is not a finite sum", base.name)))?;
        let mut rng = RngStream::new(seed, CERTIFY_STREAM);
        let mut worst: f64 = 0.0;
        for _ in 0..probe_points.max(1) {
            let x = rng.uniform_in_box(base.dim, -base.test_box, base.test_box);
            let full = base.gradient(&x);
            let var = (0..n)
                .map(|i| base.component_gradient(i, &x).dist_sq(&full))
                .sum::<f64>()
                / n as f64;
            worst = worst.max(var);
        }
        Ok(StochasticOracle {
            base,
            noise: NoiseModel::FiniteSum,
            variance_bound_g2: 1.5 * worst,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.dim
    }

    /// Average of `batch_m` independent stochastic gradients at x.
    pub fn stoch_grad(&self, x: &Vector, batch_m: usize, rng: &mut RngStream) -> Result<Vector> {
        if batch_m == 0 {
            return Err(Error::arg("batch size must be at least 1"));
        }
        check_dims(self.base.dim, x.dim())?;
        Ok(self.sample(x, batch_m, rng))
    }

    pub(crate) fn sample(&self, x: &Vector, batch_m: usize, rng: &mut RngStream) -> Vector {
        match self.noise {
            NoiseModel::None => self.base.gradient(x),
            NoiseModel::AdditiveGaussian { sigma } => {
                let mut noise = Vector::zeros(self.base.dim);
                for _ in 0..batch_m {
                    for v in noise.as_mut_slice() {
                        *v += rng.standard_normal();
                    }
                }
                self.base.gradient(x).plus_scaled(sigma / batch_m as f64, &noise)
            }
            NoiseModel::FiniteSum => {
                let n = self.base.component_count().unwrap_or(1);
                if batch_m == 1 {
                    return self.base.component_gradient(rng.index(n), x);
                }
                let mut acc = Vector::zeros(self.base.dim);
                for _ in 0..batch_m {
                    acc.axpy(1.0, &self.base.component_gradient(rng.index(n), x));
                }
                acc.scaled(1.0 / batch_m as f64)
            }
        }
    }
}
