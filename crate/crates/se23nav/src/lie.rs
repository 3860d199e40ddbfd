//! Matrix Lie-group kernel for SO(3) and the extended pose group SE₂(3).
//!
//! Conventions used throughout the crate:
//!
//! * Rotations are 3×3 matrices mapping body coordinates to inertial
//!   coordinates.
//! * An extended pose 𝒯(R, v, p) embeds as the 5×5 matrix
//!   `[R v p; 0 1 0; 0 0 1]` — column 3 carries the velocity, column 4 the
//!   position (0-indexed).
//! * A tangent vector ξ = (ω, α, ν) embeds as `[ω^× α ν; 0 0 0; 0 0 0]`,
//!   i.e. the same column layout as the group: α sits in the velocity slot
//!   and ν in the position slot.
//!
//! The exponential maps use closed Rodrigues-type forms with Taylor fallbacks
//! below `SMALL_ANGLE`; the logarithm switches to an eigenvector-style axis
//! extraction within `NEAR_PI` of a half turn, where the skew part of R loses
//! the axis.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use thiserror::Error;

/// 5×5 real matrix, the embedding space of SE₂(3).
pub type Matrix5 = SMatrix<f64, 5, 5>;
/// Stacked tangent coordinates (ω, α, ν).
pub type Vector9 = SVector<f64, 9>;

/// Angle below which exponentials/logarithms use truncated series.
pub const SMALL_ANGLE: f64 = 1e-4;
/// Distance from π below which `log_so3` extracts the axis from (R+I)/2.
pub const NEAR_PI: f64 = 1e-6;
/// Allowed asymmetry in `vee3` inputs.
pub const SKEW_TOL: f64 = 1e-9;
/// Allowed deviation from orthonormality in `Rotation::from_matrix`.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    /// `vee3` input has a symmetric part above `SKEW_TOL`.
    #[error("matrix is not skew-symmetric (asymmetry {0:.3e})")]
    NotSkew(f64),
    /// `Rotation::from_matrix` input is not orthonormal with det +1.
    #[error("matrix is not a rotation (orthonormality defect {0:.3e})")]
    NotRotation(f64),
    /// Gain validation failure.
    #[error("invalid gain: {0}")]
    InvalidGain(String),
}

/// Rotation matrix in SO(3).
///
/// Orthonormality is maintained by construction: the only public ways in are
/// the checked [`Rotation::from_matrix`], the exponential/Cayley maps, and
/// [`Rotation::from_nearest`] (polar projection). Continuous integrators that
/// update the raw matrix re-project with [`Rotation::from_nearest`] after
/// every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Checked constructor; rejects matrices further than `ORTHONORMAL_TOL`
    /// from SO(3).
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, LieError> {
        let defect = (m.transpose() * m - Matrix3::identity()).norm();
        if defect > ORTHONORMAL_TOL || m.determinant() < 0.0 {
            return Err(LieError::NotRotation(defect));
        }
        Ok(Rotation(m))
    }

    /// Closest rotation to an arbitrary 3×3 matrix (polar decomposition via
    /// SVD, with the usual determinant correction).
    pub fn from_nearest(m: &Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd requested u");
        let v_t = svd.v_t.expect("svd requested v_t");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut flip = u;
            flip.column_mut(2).neg_mut();
            r = flip * v_t;
        }
        Rotation(r)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    /// Inverse rotation (= transpose).
    pub fn inverse(&self) -> Self {
        self.transpose()
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;
    fn mul(self, v: Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }
}

/// Extended pose (R, v, p) ∈ SE₂(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedPose {
    pub rot: Rotation,
    pub vel: Vector3<f64>,
    pub pos: Vector3<f64>,
}

impl ExtendedPose {
    pub fn new(rot: Rotation, vel: Vector3<f64>, pos: Vector3<f64>) -> Self {
        ExtendedPose { rot, vel, pos }
    }

    pub fn identity() -> Self {
        ExtendedPose::new(Rotation::identity(), Vector3::zeros(), Vector3::zeros())
    }

    /// 5×5 homogeneous embedding `[R v p; 0 I₂]`.
    pub fn embed(&self) -> Matrix5 {
        let mut m = Matrix5::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rot.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.vel);
        m.fixed_view_mut::<3, 1>(0, 4).copy_from(&self.pos);
        m
    }

    /// Group inverse 𝒯(Rᵀ, −Rᵀv, −Rᵀp).
    pub fn inverse(&self) -> Self {
        let rt = self.rot.transpose();
        ExtendedPose::new(rt, -(rt * self.vel), -(rt * self.pos))
    }
}

impl std::ops::Mul for ExtendedPose {
    type Output = ExtendedPose;
    fn mul(self, rhs: ExtendedPose) -> ExtendedPose {
        ExtendedPose::new(
            self.rot * rhs.rot,
            self.rot * rhs.vel + self.vel,
            self.rot * rhs.pos + self.pos,
        )
    }
}

/// Tangent coordinates (ω, α, ν) of se₂(3); α is the velocity-slot column,
/// ν the position-slot column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangent9 {
    pub rot: Vector3<f64>,
    pub vel: Vector3<f64>,
    pub pos: Vector3<f64>,
}

impl Tangent9 {
    pub fn new(rot: Vector3<f64>, vel: Vector3<f64>, pos: Vector3<f64>) -> Self {
        Tangent9 { rot, vel, pos }
    }

    pub fn zero() -> Self {
        Tangent9::new(Vector3::zeros(), Vector3::zeros(), Vector3::zeros())
    }

    /// Stacked coordinates in the order (ω, α, ν).
    pub fn from_vector(x: &Vector9) -> Self {
        Tangent9::new(
            Vector3::new(x[0], x[1], x[2]),
            Vector3::new(x[3], x[4], x[5]),
            Vector3::new(x[6], x[7], x[8]),
        )
    }

    pub fn as_vector(&self) -> Vector9 {
        let mut x = Vector9::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.rot);
        x.fixed_rows_mut::<3>(3).copy_from(&self.vel);
        x.fixed_rows_mut::<3>(6).copy_from(&self.pos);
        x
    }

    /// 5×5 embedding `[ω^× α ν; 0 0 0; 0 0 0]`.
    pub fn embed(&self) -> Matrix5 {
        let mut m = Matrix5::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&self.rot));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.vel);
        m.fixed_view_mut::<3, 1>(0, 4).copy_from(&self.pos);
        m
    }
}

/// Observer gain bundle: scalar attitude gain k_R and 3×3 translational gain
/// matrices K_p, K_v.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSet {
    pub kr: f64,
    pub kp: Matrix3<f64>,
    pub kv: Matrix3<f64>,
}

impl GainSet {
    pub fn new(kr: f64, kp: Matrix3<f64>, kv: Matrix3<f64>) -> Result<Self, LieError> {
        if !(kr.is_finite() && kr > 0.0) {
            return Err(LieError::InvalidGain(format!(
                "attitude gain must be finite and positive, got {kr}"
            )));
        }
        Ok(GainSet { kr, kp, kv })
    }

    /// Scalar gains k_p·I₃, k_v·I₃.
    pub fn isotropic(kr: f64, kp: f64, kv: f64) -> Result<Self, LieError> {
        GainSet::new(
            kr,
            Matrix3::identity() * kp,
            Matrix3::identity() * kv,
        )
    }
}

/// Skew-symmetric matrix of ω: hat3(ω)·x = ω × x.
pub fn hat3(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -w[2], w[1], //
        w[2], 0.0, -w[0], //
        -w[1], w[0], 0.0,
    )
}

/// Inverse of [`hat3`]; rejects inputs whose symmetric part exceeds
/// [`SKEW_TOL`].
pub fn vee3(m: &Matrix3<f64>) -> Result<Vector3<f64>, LieError> {
    let asym = (m + m.transpose()).norm();
    if asym > SKEW_TOL {
        return Err(LieError::NotSkew(asym));
    }
    Ok(Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]))
}

/// Antisymmetric projection ℙ_a(A) = (A − Aᵀ)/2.
pub fn proj_antisym(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m - m.transpose()) * 0.5
}

/// ψ(A) = vee(ℙ_a(A)): the axis vector of the antisymmetric part.
pub fn psi(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    ) * 0.5
}

// Rodrigues coefficients sin(a)/a and (1-cos(a))/a², with truncated series
// below SMALL_ANGLE.
fn rodrigues_coeffs(angle: f64) -> (f64, f64) {
    if angle < SMALL_ANGLE {
        let a2 = angle * angle;
        (1.0 - a2 / 6.0, 0.5 - a2 / 24.0)
    } else {
        let a2 = angle * angle;
        (angle.sin() / angle, (1.0 - angle.cos()) / a2)
    }
}

/// SO(3) exponential (Rodrigues formula).
pub fn exp_so3(theta: &Vector3<f64>) -> Rotation {
    let angle = theta.norm();
    let (s, c) = rodrigues_coeffs(angle);
    let th = hat3(theta);
    Rotation(Matrix3::identity() + th * s + th * th * c)
}

/// SO(3) logarithm. Returns θ with ‖θ‖ ≤ π.
///
/// Within [`NEAR_PI`] of a half turn the skew part of R no longer determines
/// the axis; there the axis is taken from the dominant column of (R + I)/2,
/// which tends to the rank-one projector onto the rotation axis.
pub fn log_so3(r: &Rotation) -> Vector3<f64> {
    let m = r.matrix();
    let w = Vector3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    );
    let sin_angle = w.norm() * 0.5;
    let cos_angle = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    // atan2 of (sin, cos) keeps the angle accurate to round-off at both ends
    // of [0, π]; acos of the trace alone loses half the digits near either.
    let angle = sin_angle.atan2(cos_angle);
    if angle < SMALL_ANGLE {
        let a2 = angle * angle;
        return w * (0.5 + a2 / 12.0 + a2 * a2 * 7.0 / 720.0);
    }
    if std::f64::consts::PI - angle < NEAR_PI {
        // The skew part no longer pins down the axis; take it from the
        // dominant column of the symmetrized (R + I)/2, which tends to the
        // rank-one projector onto the axis (symmetrizing drops the sin θ
        // skew term, so the column error is quadratic in the residual),
        // with the sign settled by w.
        let b = ((m + m.transpose()) * 0.5 + Matrix3::identity()) * 0.5;
        let j = (0..3)
            .max_by(|&a, &c| b[(a, a)].partial_cmp(&b[(c, c)]).unwrap())
            .unwrap();
        let mut axis = b.column(j).into_owned();
        axis /= axis.norm();
        if w.dot(&axis) < 0.0 {
            axis = -axis;
        }
        return axis * angle;
    }
    w * (angle / (2.0 * sin_angle))
}

/// Left Jacobian of SO(3): J_l(θ) = ∑ (θ^×)ⁿ / (n+1)!.
pub fn left_jacobian(theta: &Vector3<f64>) -> Matrix3<f64> {
    let angle = theta.norm();
    let th = hat3(theta);
    let (b, c) = if angle < SMALL_ANGLE {
        let a2 = angle * angle;
        (0.5 - a2 / 24.0, 1.0 / 6.0 - a2 / 120.0)
    } else {
        let a2 = angle * angle;
        (
            (1.0 - angle.cos()) / a2,
            (angle - angle.sin()) / (a2 * angle),
        )
    };
    Matrix3::identity() + th * b + th * th * c
}

/// SE₂(3) exponential in closed form: exp(ξ^) = 𝒯(exp(ω^×), J_l(ω)α, J_l(ω)ν).
pub fn exp_se23(xi: &Tangent9) -> ExtendedPose {
    let jl = left_jacobian(&xi.rot);
    ExtendedPose::new(exp_so3(&xi.rot), jl * xi.vel, jl * xi.pos)
}

/// Adjoint action Ad_X(U) = X U X⁻¹ on 5×5 matrices.
pub fn adjoint(x: &ExtendedPose, u: &Matrix5) -> Matrix5 {
    x.embed() * u * x.inverse().embed()
}

/// Gain projection onto se₂(3): the 3×3 corner is antisymmetrized and scaled
/// by k_R, the velocity column is mapped through K_v and the position column
/// through K_p; all other entries are dropped.
pub fn proj_gain(gains: &GainSet, m: &Matrix5) -> Matrix5 {
    let a1 = m.fixed_view::<3, 3>(0, 0).into_owned();
    let a2 = m.fixed_view::<3, 1>(0, 3).into_owned();
    let a3 = m.fixed_view::<3, 1>(0, 4).into_owned();
    let mut out = Matrix5::zeros();
    out.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(proj_antisym(&a1) * gains.kr));
    out.fixed_view_mut::<3, 1>(0, 3).copy_from(&(gains.kv * a2));
    out.fixed_view_mut::<3, 1>(0, 4).copy_from(&(gains.kp * a3));
    out
}

/// Cayley-style unit map: rotation about σ by the angle 2·atan(‖σ‖).
///
/// R_σ = ((1 − ‖σ‖²) I + 2σσᵀ + 2σ^×) / (1 + ‖σ‖²); well conditioned for
/// arbitrarily large ‖σ‖ (approaches a half turn as ‖σ‖ → ∞).
pub fn cayley(sigma: &Vector3<f64>) -> Rotation {
    let s2 = sigma.norm_squared();
    let m = (Matrix3::identity() * (1.0 - s2)
        + sigma * sigma.transpose() * 2.0
        + hat3(sigma) * 2.0)
        / (1.0 + s2);
    Rotation(m)
}
