//! Shared helpers for the integration suites: independent oracles (series
//! exponential, Rodrigues form, Joseph update) and seeded random state
//! generators. The oracles deliberately avoid the closed forms used by the
//! library so that agreement is evidence, not tautology.
#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use se23nav::lie::{exp_so3, Matrix5};
use se23nav::{ExtendedPose, Rotation};

/// Truncated matrix exponential Σ_{k<terms} Mᵏ/k!. With 30 terms the
/// truncation error for ‖M‖ ≲ 5 is far below f64 resolution.
pub fn series_exp(m: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..terms {
        term = (&term * m) / k as f64;
        sum += &term;
    }
    sum
}

pub fn series_exp3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let d = series_exp(&DMatrix::from_fn(3, 3, |i, j| m[(i, j)]), 30);
    Matrix3::from_fn(|i, j| d[(i, j)])
}

pub fn series_exp5(m: &Matrix5) -> Matrix5 {
    let d = series_exp(&DMatrix::from_fn(5, 5, |i, j| m[(i, j)]), 30);
    Matrix5::from_fn(|i, j| d[(i, j)])
}

/// Rodrigues rotation formula, evaluated directly in terms of sin/cos.
pub fn rodrigues(theta: &Vector3<f64>) -> Matrix3<f64> {
    let angle = theta.norm();
    if angle == 0.0 {
        return Matrix3::identity();
    }
    let axis = theta / angle;
    let k = se23nav::lie::hat3(&axis);
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

/// Joseph-form covariance update (I−KC)P(I−KC)ᵀ + KNKᵀ.
pub fn joseph_update(
    p: &DMatrix<f64>,
    c: &DMatrix<f64>,
    k: &DMatrix<f64>,
    n: &DMatrix<f64>,
) -> DMatrix<f64> {
    let ikc = DMatrix::identity(p.nrows(), p.ncols()) - k * c;
    &ikc * p * ikc.transpose() + k * n * k.transpose()
}

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn random_vec3(r: &mut ChaCha12Rng, scale: f64) -> Vector3<f64> {
    Vector3::new(
        scale * r.sample::<f64, _>(StandardNormal),
        scale * r.sample::<f64, _>(StandardNormal),
        scale * r.sample::<f64, _>(StandardNormal),
    )
}

/// Uniform random axis, angle uniform in (0, max_angle).
pub fn random_axis_angle(r: &mut ChaCha12Rng, max_angle: f64) -> Vector3<f64> {
    let mut axis = random_vec3(r, 1.0);
    while axis.norm() < 1e-6 {
        axis = random_vec3(r, 1.0);
    }
    axis.normalize() * (r.random_range(1e-8..max_angle))
}

pub fn random_rotation(r: &mut ChaCha12Rng) -> Rotation {
    exp_so3(&random_axis_angle(r, 3.0))
}

pub fn random_pose(r: &mut ChaCha12Rng) -> ExtendedPose {
    ExtendedPose::new(random_rotation(r), random_vec3(r, 2.0), random_vec3(r, 5.0))
}

pub fn max_abs3(m: &Matrix3<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

pub fn max_abs5(m: &Matrix5) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}
