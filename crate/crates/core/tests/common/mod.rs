#![allow(dead_code)]

use extragrad::{build_problem, ObjectiveSpec, RngStream, Vector};
use serde_json::json;

pub fn v(xs: &[f64]) -> Vector {
    Vector::new(xs.to_vec()).unwrap()
}

/// Symmetric A = Q diag(eigs) Qᵀ with Q from Gram-Schmidt on a seeded
/// Gaussian matrix.
pub fn rotated_matrix(eigs: &[f64], seed: u64) -> Vec<Vec<f64>> {
    let n = eigs.len();
    let mut rng = RngStream::new(seed, 77);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    while q.len() < n {
        let mut c = rng.normal_vector(n, 1.0).into_inner();
        for b in &q {
            let d: f64 = c.iter().zip(b).map(|(x, y)| x * y).sum();
            for (ci, bi) in c.iter_mut().zip(b) {
                *ci -= d * bi;
            }
        }
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            q.push(c.into_iter().map(|x| x / norm).collect());
        }
    }
    let mut a = vec![vec![0.0; n]; n];
    for (k, lam) in eigs.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                a[i][j] += lam * q[k][i] * q[k][j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = s;
            a[j][i] = s;
        }
    }
    a
}

/// One instance of every registered family, plus a dense quadratic.
pub fn zoo() -> Vec<ObjectiveSpec> {
    let eigs: Vec<f64> = (0..10).map(|i| 10f64.powf(-2.0 + 2.0 * i as f64 / 9.0)).collect();
    vec![
        build_problem("quadratic", &json!({"dim": 10})).unwrap(),
        build_problem("quadratic", &json!({"matrix": rotated_matrix(&eigs, 5), "b": vec![0.5; 10]})).unwrap(),
        build_problem("rosenbrock", &json!({"dim": 2})).unwrap(),
        build_problem("rosenbrock", &json!({"dim": 5})).unwrap(),
        build_problem("saddle_quadratic", &json!({"diag": [2.0, -1.0, 0.5]})).unwrap(),
        build_problem("sigmoid_loss", &json!({"dim": 5, "n_samples": 100, "seed": 3})).unwrap(),
    ]
}

pub fn box_point(spec: &ObjectiveSpec, rng: &mut RngStream) -> Vector {
    rng.uniform_in_box(spec.dim, -spec.test_box, spec.test_box)
}
