//! Riccati machinery shared by the Kalman-style filters and the
//! variable-gain observers: continuous Riccati flows integrated with RK4,
//! the discrete measurement update, positive-definiteness checks and
//! observability Gramians.
//!
//! Everything here works on dynamically sized matrices because state and
//! measurement dimensions vary across callers (6 for the translation
//! observers, 9 for the full filters, 3·m for m stacked landmark rows).
//! After every algebraic step the result is re-symmetrized; asymmetry beyond
//! roundoff is a caller bug, not something to hide.

use nalgebra::{Cholesky, DMatrix, Dyn};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RiccatiError {
    #[error("matrix is not positive definite (pivot failed at minimum eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),
    #[error("innovation covariance is singular; measurement update impossible")]
    SingularInnovation,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Replaces `m` with ½(m + mᵀ).
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.is_square() && Cholesky::<f64, Dyn>::new(m.clone()).is_some()
}

/// Checks that `p` is a valid covariance: square, symmetric to `tol`
/// (relative to its norm) and positive definite.
pub fn assert_covariance(p: &DMatrix<f64>, tol: f64) -> Result<(), RiccatiError> {
    if !p.is_square() {
        return Err(RiccatiError::DimensionMismatch(format!(
            "covariance must be square, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    let scale = p.norm().max(1.0);
    if (p - p.transpose()).norm() > tol * scale {
        return Err(RiccatiError::DimensionMismatch("covariance is not symmetric".into()));
    }
    if !is_positive_definite(p) {
        return Err(RiccatiError::NotPositiveDefinite(min_eigenvalue(p)));
    }
    Ok(())
}

/// Right-hand side of the continuous Riccati flow
/// Ṗ = A P + P Aᵀ + V − P S P, where `s` (if present) is the quadratic
/// information weight Cᵀ Q C.
pub fn riccati_rate(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    v: &DMatrix<f64>,
    s: Option<&DMatrix<f64>>,
) -> DMatrix<f64> {
    let mut rate = a * p + p * a.transpose() + v;
    if let Some(s) = s {
        rate -= p * s * p;
    }
    symmetrize(&mut rate);
    rate
}

/// One RK4 step of the Riccati flow with `a`, `v`, `s` frozen over the step.
pub fn riccati_rk4_step(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    v: &DMatrix<f64>,
    s: Option<&DMatrix<f64>>,
    dt: f64,
) -> Result<DMatrix<f64>, RiccatiError> {
    let n = p.nrows();
    for (m, what) in [(a, "A"), (v, "V")] {
        if m.nrows() != n || m.ncols() != n {
            return Err(RiccatiError::DimensionMismatch(format!(
                "{} is {}x{}, state dimension is {}",
                what,
                m.nrows(),
                m.ncols(),
                n
            )));
        }
    }
    let k1 = riccati_rate(p, a, v, s);
    let k2 = riccati_rate(&(p + &k1 * (0.5 * dt)), a, v, s);
    let k3 = riccati_rate(&(p + &k2 * (0.5 * dt)), a, v, s);
    let k4 = riccati_rate(&(p + &k3 * dt), a, v, s);
    let mut next = p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    symmetrize(&mut next);
    if !is_positive_definite(&next) {
        // Divergence or a too-coarse step (e.g. a stiff quadratic term);
        // surfacing it beats handing back a broken covariance.
        return Err(RiccatiError::NotPositiveDefinite(min_eigenvalue(&next)));
    }
    Ok(next)
}

/// Discrete measurement update for innovation model z = C x + n,
/// cov(n) = `n_cov`:
///
/// ```text
/// S = C P Cᵀ + N,   K = P Cᵀ S⁻¹,   P⁺ = (I − K C) P.
/// ```
///
/// Returns (K, P⁺). The innovation covariance is factored by Cholesky; a
/// failed factorization reports [`RiccatiError::SingularInnovation`].
pub fn measurement_update(
    p: &DMatrix<f64>,
    c: &DMatrix<f64>,
    n_cov: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>), RiccatiError> {
    let n = p.nrows();
    let m = c.nrows();
    if c.ncols() != n {
        return Err(RiccatiError::DimensionMismatch(format!(
            "C is {}x{}, state dimension is {}",
            m,
            c.ncols(),
            n
        )));
    }
    if n_cov.nrows() != m || n_cov.ncols() != m {
        return Err(RiccatiError::DimensionMismatch(format!(
            "measurement covariance is {}x{}, measurement dimension is {}",
            n_cov.nrows(),
            n_cov.ncols(),
            m
        )));
    }
    let mut s = c * p * c.transpose() + n_cov;
    symmetrize(&mut s);
    let chol = Cholesky::<f64, Dyn>::new(s).ok_or(RiccatiError::SingularInnovation)?;
    // K = P Cᵀ S⁻¹  ⇔  Kᵀ = S⁻¹ C P  (S symmetric).
    let k = chol.solve(&(c * p)).transpose();
    let mut next = (DMatrix::identity(n, n) - &k * c) * p;
    symmetrize(&mut next);
    if !is_positive_definite(&next) {
        return Err(RiccatiError::NotPositiveDefinite(min_eigenvalue(&next)));
    }
    Ok((k, next))
}

/// Observability Gramian W(t0, t1) = ∫ Φ(τ)ᵀ C(τ)ᵀ C(τ) Φ(τ) dτ with
/// Φ̇ = A(τ) Φ, Φ(t0) = I, computed by co-integrating Φ and W with RK4 over
/// `steps` uniform sub-intervals.
pub fn observability_gramian(
    dim: usize,
    t0: f64,
    t1: f64,
    steps: usize,
    a_of_t: impl Fn(f64) -> DMatrix<f64>,
    c_of_t: impl Fn(f64) -> DMatrix<f64>,
) -> DMatrix<f64> {
    assert!(steps > 0, "need at least one integration step");
    let dt = (t1 - t0) / steps as f64;
    let mut phi = DMatrix::<f64>::identity(dim, dim);
    let mut w = DMatrix::<f64>::zeros(dim, dim);
    let rate = |t: f64, phi: &DMatrix<f64>| {
        let c = c_of_t(t);
        let cphi = &c * phi;
        (a_of_t(t) * phi, cphi.transpose() * cphi)
    };
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let (dp1, dw1) = rate(t, &phi);
        let (dp2, dw2) = rate(t + 0.5 * dt, &(&phi + &dp1 * (0.5 * dt)));
        let (dp3, dw3) = rate(t + 0.5 * dt, &(&phi + &dp2 * (0.5 * dt)));
        let (dp4, dw4) = rate(t + dt, &(&phi + &dp3 * dt));
        phi += (dp1 + dp2 * 2.0 + dp3 * 2.0 + dp4) * (dt / 6.0);
        w += (dw1 + dw2 * 2.0 + dw3 * 2.0 + dw4) * (dt / 6.0);
    }
    symmetrize(&mut w);
    w
}
