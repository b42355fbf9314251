//! Dense vectors, the Euclidean Bregman distance, ball projection, central
//! finite differences and seeded random streams.

use std::fmt;
use std::ops::Index;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense real vector whose components are finite when built through
/// [`Vector::new`]. Arithmetic helpers do not re-check finiteness; the
/// optimizers check every iterate and report divergence instead.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if let Some(i) = components.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                coordinate: Some(i),
                message: format!("vector component is {}", components[i]),
            });
        }
        Ok(Vector(components))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Vector(vec![value; dim])
    }

    /// Builds without the finiteness check. Callers are expected to run
    /// [`Vector::is_finite`] before handing the value out.
    pub(crate) fn from_raw(components: Vec<f64>) -> Self {
        Vector(components)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.0.iter().position(|v| !v.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dot: dimension mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// ‖self − other‖².
    pub fn dist_sq(&self, other: &Vector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dist_sq: dimension mismatch");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "sub: dimension mismatch");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "add: dimension mismatch");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scaled(&self, a: f64) -> Vector {
        Vector(self.0.iter().map(|v| a * v).collect())
    }

    /// `self + a * x`, evaluated per coordinate as `s + (a * x)`.
    pub fn plus_scaled(&self, a: f64, x: &Vector) -> Vector {
        assert_eq!(self.dim(), x.dim(), "plus_scaled: dimension mismatch");
        Vector(self.0.iter().zip(&x.0).map(|(s, v)| s + a * v).collect())
    }

    /// In-place `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &Vector) {
        assert_eq!(self.dim(), x.dim(), "axpy: dimension mismatch");
        for (s, v) in self.0.iter_mut().zip(&x.0) {
            *s += a * v;
        }
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Bregman distance of ω(z) = ½‖z‖², i.e. ½‖x − z‖².
pub fn bregman_euclid(x: &Vector, z: &Vector) -> Result<f64> {
    check_dims(x.dim(), z.dim())?;
    Ok(0.5 * x.dist_sq(z))
}

/// Euclidean projection onto the closed ball of `radius` around `center`.
pub fn project_ball(x: &Vector, center: &Vector, radius: f64) -> Result<Vector> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::arg(format!("ball radius must be positive, got {radius}")));
    }
    check_dims(center.dim(), x.dim())?;
    let offset = x.sub(center);
    let dist = offset.norm();
    if dist <= radius {
        return Ok(x.clone());
    }
    Ok(center.plus_scaled(radius / dist, &offset))
}

/// Default central-difference step, `1e-6 * (1 + ‖x‖∞)`.
pub fn default_fd_step(x: &Vector) -> f64 {
    1e-6 * (1.0 + x.norm_inf())
}

/// Central differences `(f(x + h eᵢ) − f(x − h eᵢ)) / 2h` per coordinate.
pub fn finite_diff_grad<F>(f: F, x: &Vector, h: f64) -> Result<Vector>
where
    F: Fn(&Vector) -> f64,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::arg(format!("finite-difference step must be positive, got {h}")));
    }
    let mut probe = x.clone();
    let mut out = Vec::with_capacity(x.dim());
    for i in 0..x.dim() {
        let xi = x[i];
        probe.as_mut_slice()[i] = xi + h;
        let fp = f(&probe);
        probe.as_mut_slice()[i] = xi - h;
        let fm = f(&probe);
        probe.as_mut_slice()[i] = xi;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Evaluation {
                coordinate: Some(i),
                message: format!("f(x ± h e_{i}) = ({fp}, {fm})"),
            });
        }
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(Vector(out))
}

/// Sample mean with the unbiased standard deviation and the standard error
/// std/√n. A single sample has zero spread.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
}

impl SampleStats {
    pub fn from_slice(xs: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n == 0 {
            return None;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(SampleStats {
            n,
            mean,
            std,
            stderr: std / (n as f64).sqrt(),
        })
    }
}

/// A seeded random stream backed by ChaCha20.
///
/// The generator is seeded from `seed` through `SeedableRng::seed_from_u64`
/// and `stream_id` selects the ChaCha stream (nonce). Identical
/// `(seed, stream_id)` pairs give identical sequences on every platform;
/// different stream ids give independent keystreams under the same key.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn normal_vector(&mut self, dim: usize, std: f64) -> Vector {
        Vector((0..dim).map(|_| std * self.standard_normal()).collect())
    }

    pub fn uniform_in_box(&mut self, dim: usize, low: f64, high: f64) -> Vector {
        Vector((0..dim).map(|_| self.uniform_range(low, high)).collect())
    }

    /// Uniform draw from the closed Euclidean ball.
    pub fn uniform_in_ball(&mut self, center: &Vector, radius: f64) -> Vector {
        let dim = center.dim();
        let dir = loop {
            let v = self.normal_vector(dim, 1.0);
            let n = v.norm();
            if n > 0.0 {
                break v.scaled(1.0 / n);
            }
        };
        let r = radius * self.uniform().powf(1.0 / dim as f64);
        center.plus_scaled(r, &dir)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
