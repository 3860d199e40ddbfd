//! Kalman-style baselines: a multiplicative EKF with body-frame attitude
//! error, and an invariant EKF whose error lives in the group itself.
//!
//! Both filters share the measurement model y_i = Rᵀ(p_i − p) + n_i and the
//! midpoint geometric propagation of the pose estimate; they differ in the
//! error parametrization, hence in the linearized matrices and in how the
//! correction re-enters the estimate:
//!
//! * [`Mekf`]: error x̃ = (θ̃, p̃, ṽ) with the multiplicative attitude error
//!   R R̂ᵀ ≈ I + θ̃^× and additive translation errors. The linearization
//!   depends on the current estimate through both A and C.
//! * [`Iekf`]: right-invariant error η = X X̂⁻¹ ≈ exp(ξ), ξ = (θ, ν_v, ν_p).
//!   A is state-independent (and nilpotent, so its exponential is an exact
//!   three-term polynomial); the estimate dependence moves into the noise
//!   injection and the correction X̂⁺ = exp(K z) X̂.

use crate::lie::{exp_se23, exp_so3, hat3, ExtendedPose, Tangent9};
use crate::riccati::{assert_covariance, measurement_update, symmetrize, RiccatiError};
use crate::world::{propagate_pose, LandmarkSet, NoiseSpec};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KalmanError {
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
    #[error("observation/landmark mismatch: {0}")]
    Mismatch(String),
}

fn set_block(m: &mut DMatrix<f64>, row: usize, col: usize, block: &Matrix3<f64>) {
    m.view_mut((row, col), (3, 3)).copy_from(block);
}

/// Φ ≈ exp(A dt) truncated after the quadratic term. Exact when A³ = 0,
/// second-order accurate otherwise.
fn phi_from(a: &DMatrix<f64>, dt: f64) -> DMatrix<f64> {
    DMatrix::identity(9, 9) + a * dt + a * a * (0.5 * dt * dt)
}

fn stacked_noise(block: &Matrix3<f64>, count: usize) -> DMatrix<f64> {
    let mut n = DMatrix::zeros(3 * count, 3 * count);
    for i in 0..count {
        n.view_mut((3 * i, 3 * i), (3, 3)).copy_from(block);
    }
    n
}

fn check_obs(obs: &[Vector3<f64>], landmarks: &LandmarkSet) -> Result<(), KalmanError> {
    if obs.len() != landmarks.len() {
        return Err(KalmanError::Mismatch(format!(
            "{} observations for {} landmarks",
            obs.len(),
            landmarks.len()
        )));
    }
    Ok(())
}

/// Multiplicative EKF. Covariance order (θ̃, p̃, ṽ) with R R̂ᵀ ≈ I + θ̃^×,
/// p̃ = p − p̂, ṽ = v − v̂.
#[derive(Debug, Clone)]
pub struct Mekf {
    pose: ExtendedPose,
    cov: DMatrix<f64>,
    noise: NoiseSpec,
    gravity: Vector3<f64>,
}

impl Mekf {
    /// `p0` is the initial 9×9 covariance in (θ̃, p̃, ṽ) order.
    pub fn new(
        initial: ExtendedPose,
        p0: DMatrix<f64>,
        noise: NoiseSpec,
        gravity: Vector3<f64>,
    ) -> Result<Self, KalmanError> {
        assert_covariance(&p0, 1e-9)?;
        Ok(Mekf { pose: initial, cov: p0, noise, gravity })
    }

    /// Diagonal initial covariance from per-axis standard deviations
    /// (attitude in radians, position in meters, velocity in m/s).
    pub fn from_stds(
        initial: ExtendedPose,
        att_std: f64,
        pos_std: f64,
        vel_std: f64,
        noise: NoiseSpec,
        gravity: Vector3<f64>,
    ) -> Result<Self, KalmanError> {
        let mut p0 = DMatrix::zeros(9, 9);
        for i in 0..3 {
            p0[(i, i)] = att_std * att_std;
            p0[(3 + i, 3 + i)] = pos_std * pos_std;
            p0[(6 + i, 6 + i)] = vel_std * vel_std;
        }
        Mekf::new(initial, p0, noise, gravity)
    }

    pub fn pose(&self) -> &ExtendedPose {
        &self.pose
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Linearized error dynamics for the current estimate and the measured
    /// specific force; depends on both. θ̃ is the inertial-frame error angle,
    /// so its own drift term vanishes.
    pub fn state_matrix(&self, accel: &Vector3<f64>) -> DMatrix<f64> {
        let rhat = self.pose.rot.matrix();
        let mut a = DMatrix::zeros(9, 9);
        set_block(&mut a, 3, 6, &Matrix3::identity());
        set_block(&mut a, 6, 0, &(-hat3(&(rhat * accel))));
        a
    }

    /// Stacked measurement matrix for one landmark epoch; depends on the
    /// current estimate.
    pub fn measurement_matrix(&self, landmarks: &LandmarkSet) -> DMatrix<f64> {
        let rhat_t = self.pose.rot.transpose();
        let mut c = DMatrix::zeros(3 * landmarks.len(), 9);
        for (i, p_i) in landmarks.positions().iter().enumerate() {
            c.view_mut((3 * i, 0), (3, 3))
                .copy_from(&(rhat_t.matrix() * hat3(&(p_i - self.pose.pos))));
            c.view_mut((3 * i, 3), (3, 3)).copy_from(&(-rhat_t.matrix()));
        }
        c
    }

    /// Propagates estimate and covariance through one IMU interval with
    /// measured inputs held constant.
    pub fn predict(&mut self, omega: &Vector3<f64>, accel: &Vector3<f64>, dt: f64) {
        let rhat = self.pose.rot.matrix();
        // Body-frame IMU noise enters conjugated by R̂.
        let a = self.state_matrix(accel);
        let phi = phi_from(&a, dt);

        let mut q = DMatrix::zeros(9, 9);
        set_block(&mut q, 0, 0, &(rhat * self.noise.gyro_cov * rhat.transpose() * dt));
        set_block(&mut q, 6, 6, &(rhat * self.noise.accel_cov * rhat.transpose() * dt));

        self.cov = &phi * &self.cov * phi.transpose() + q;
        symmetrize(&mut self.cov);
        self.pose = propagate_pose(&self.pose, omega, accel, &self.gravity, dt);
    }

    /// Absorbs one epoch of landmark observations (ordered like the set).
    pub fn update(&mut self, obs: &[Vector3<f64>], landmarks: &LandmarkSet) -> Result<(), KalmanError> {
        check_obs(obs, landmarks)?;
        let m = obs.len();
        let rhat_t = self.pose.rot.transpose();
        let c = self.measurement_matrix(landmarks);
        let mut z = DVector::zeros(3 * m);
        for (i, (y, p_i)) in obs.iter().zip(landmarks.positions()).enumerate() {
            z.rows_mut(3 * i, 3).copy_from(&(y - rhat_t * (p_i - self.pose.pos)));
        }
        let n = stacked_noise(&self.noise.landmark_cov, m);
        let (k, cov) = measurement_update(&self.cov, &c, &n)?;
        self.cov = cov;
        let delta = k * z;
        self.pose = ExtendedPose::new(
            exp_so3(&Vector3::new(delta[0], delta[1], delta[2])) * self.pose.rot,
            self.pose.vel + Vector3::new(delta[6], delta[7], delta[8]),
            self.pose.pos + Vector3::new(delta[3], delta[4], delta[5]),
        );
        Ok(())
    }
}

/// Invariant EKF. Covariance order (θ, ν_v, ν_p) for the right-invariant
/// error exp(ξ) ≈ X X̂⁻¹, i.e. to first order
/// R R̂ᵀ ≈ I + θ^×, v − v̂ ≈ θ^× v̂ + ν_v, p − p̂ ≈ θ^× p̂ + ν_p.
#[derive(Debug, Clone)]
pub struct Iekf {
    pose: ExtendedPose,
    cov: DMatrix<f64>,
    noise: NoiseSpec,
    gravity: Vector3<f64>,
}

impl Iekf {
    /// `p0` is the initial 9×9 covariance in (θ, ν_v, ν_p) order.
    pub fn new(
        initial: ExtendedPose,
        p0: DMatrix<f64>,
        noise: NoiseSpec,
        gravity: Vector3<f64>,
    ) -> Result<Self, KalmanError> {
        assert_covariance(&p0, 1e-9)?;
        Ok(Iekf { pose: initial, cov: p0, noise, gravity })
    }

    /// Diagonal initial covariance from per-axis standard deviations.
    pub fn from_stds(
        initial: ExtendedPose,
        att_std: f64,
        vel_std: f64,
        pos_std: f64,
        noise: NoiseSpec,
        gravity: Vector3<f64>,
    ) -> Result<Self, KalmanError> {
        let mut p0 = DMatrix::zeros(9, 9);
        for i in 0..3 {
            p0[(i, i)] = att_std * att_std;
            p0[(3 + i, 3 + i)] = vel_std * vel_std;
            p0[(6 + i, 6 + i)] = pos_std * pos_std;
        }
        Iekf::new(initial, p0, noise, gravity)
    }

    pub fn pose(&self) -> &ExtendedPose {
        &self.pose
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// State matrix of the right-invariant error: constant, independent of
    /// the estimate and of the inputs.
    pub fn state_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(9, 9);
        set_block(&mut a, 3, 0, &hat3(&self.gravity));
        set_block(&mut a, 6, 3, &Matrix3::identity());
        a
    }

    /// Stacked measurement matrix of the invariant innovation: depends on the
    /// landmark positions only, never on the estimate.
    pub fn measurement_matrix(&self, landmarks: &LandmarkSet) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(3 * landmarks.len(), 9);
        for (i, p_i) in landmarks.positions().iter().enumerate() {
            c.view_mut((3 * i, 0), (3, 3)).copy_from(&hat3(p_i));
            c.view_mut((3 * i, 6), (3, 3)).copy_from(&(-Matrix3::identity()));
        }
        c
    }

    pub fn predict(&mut self, omega: &Vector3<f64>, accel: &Vector3<f64>, dt: f64) {
        let a = self.state_matrix();
        // A is nilpotent (A³ = 0), so the quadratic truncation is exp(A dt)
        // exactly.
        let phi = phi_from(&a, dt);

        // Body-frame IMU noise enters the invariant error through the
        // estimate's adjoint: rows (R̂; v̂^×R̂; p̂^×R̂) for the gyro channel
        // and (0; R̂; 0) for the accelerometer channel.
        let rhat = *self.pose.rot.matrix();
        let mut n = DMatrix::zeros(9, 6);
        n.view_mut((0, 0), (3, 3)).copy_from(&rhat);
        n.view_mut((3, 0), (3, 3)).copy_from(&(hat3(&self.pose.vel) * rhat));
        n.view_mut((6, 0), (3, 3)).copy_from(&(hat3(&self.pose.pos) * rhat));
        n.view_mut((3, 3), (3, 3)).copy_from(&rhat);
        let mut q_in = DMatrix::zeros(6, 6);
        q_in.view_mut((0, 0), (3, 3)).copy_from(&self.noise.gyro_cov);
        q_in.view_mut((3, 3), (3, 3)).copy_from(&self.noise.accel_cov);
        let q = &n * q_in * n.transpose() * dt;

        self.cov = &phi * &self.cov * phi.transpose() + q;
        symmetrize(&mut self.cov);
        self.pose = propagate_pose(&self.pose, omega, accel, &self.gravity, dt);
    }

    pub fn update(&mut self, obs: &[Vector3<f64>], landmarks: &LandmarkSet) -> Result<(), KalmanError> {
        check_obs(obs, landmarks)?;
        let m = obs.len();
        let rhat = *self.pose.rot.matrix();
        let c = self.measurement_matrix(landmarks);
        let mut z = DVector::zeros(3 * m);
        for (i, (y, p_i)) in obs.iter().zip(landmarks.positions()).enumerate() {
            z.rows_mut(3 * i, 3).copy_from(&(rhat * y + self.pose.pos - p_i));
        }
        // Body-frame measurement noise, rotated into the inertial frame
        // where the invariant innovation lives.
        let n = stacked_noise(&(rhat * self.noise.landmark_cov * rhat.transpose()), m);
        let (k, cov) = measurement_update(&self.cov, &c, &n)?;
        self.cov = cov;
        let delta = k * z;
        let xi = Tangent9::new(
            Vector3::new(delta[0], delta[1], delta[2]),
            Vector3::new(delta[3], delta[4], delta[5]),
            Vector3::new(delta[6], delta[7], delta[8]),
        );
        self.pose = exp_se23(&xi) * self.pose;
        Ok(())
    }
}
