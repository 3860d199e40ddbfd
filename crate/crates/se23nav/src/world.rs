//! Rigid-body kinematics, sensor models and landmark constellations.
//!
//! The vehicle state is an extended pose (R, v, p) evolving as
//!
//! ```text
//! Ṙ = R ω^×,   ṗ = v,   v̇ = g + R a,
//! ```
//!
//! where ω is the body angular velocity and a the body-frame specific force
//! (apparent acceleration). The IMU measures ω and a in additive white noise;
//! gyro/accelerometer biases are assumed compensated upstream and are not
//! modeled. Landmarks at known inertial positions p_i are measured in the
//! body frame as y_i = Rᵀ(p_i − p) + n_i.

use crate::lie::{exp_so3, hat3, ExtendedPose};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Standard gravity, inertial frame, z up: (0, 0, −9.81) m/s².
pub const DEFAULT_GRAVITY: Vector3<f64> = Vector3::new(0.0, 0.0, -9.81);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("invalid landmark set: {0}")]
    BadLandmarks(String),
    #[error("invalid noise specification: {0}")]
    BadNoise(String),
}

/// Ground-truth state at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueState {
    pub t: f64,
    pub pose: ExtendedPose,
}

/// One IMU reading: body angular velocity and specific force, possibly noisy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub gyro: Vector3<f64>,
    pub accel: Vector3<f64>,
}

/// Body-frame landmark measurements taken at one epoch, ordered like the
/// landmark set they were generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkObservation {
    pub t: f64,
    pub body: Vec<Vector3<f64>>,
}

/// Time derivative of the rigid-body state: (Ṙ, ṗ, v̇).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub rot: Matrix3<f64>,
    pub pos: Vector3<f64>,
    pub vel: Vector3<f64>,
}

/// Exact kinematics Ṙ = R ω^×, ṗ = v, v̇ = g + R a.
pub fn derivative(
    pose: &ExtendedPose,
    omega: &Vector3<f64>,
    accel: &Vector3<f64>,
    gravity: &Vector3<f64>,
) -> StateDerivative {
    StateDerivative {
        rot: pose.rot.matrix() * hat3(omega),
        pos: pose.vel,
        vel: gravity + pose.rot * *accel,
    }
}

/// Midpoint geometric step for the kinematics with constant body inputs
/// (ω, a) over the step:
///
/// ```text
/// R⁺ = R exp(ω^× dt),   R̄ = R exp(ω^× dt/2),
/// v⁺ = v + (g + R̄ a) dt,   p⁺ = p + v dt + ½ (g + R̄ a) dt².
/// ```
///
/// The attitude update is exact for constant ω; the translational update is
/// the exact polynomial response to the midpoint-rotated specific force
/// (second-order accurate overall, and exact when ω = 0).
pub fn propagate_pose(
    pose: &ExtendedPose,
    omega: &Vector3<f64>,
    accel: &Vector3<f64>,
    gravity: &Vector3<f64>,
    dt: f64,
) -> ExtendedPose {
    let r_mid = pose.rot * exp_so3(&(omega * (0.5 * dt)));
    let acc = gravity + r_mid * *accel;
    ExtendedPose::new(
        pose.rot * exp_so3(&(omega * dt)),
        pose.vel + acc * dt,
        pose.pos + pose.vel * dt + acc * (0.5 * dt * dt),
    )
}

/// Weighted landmark constellation. Weights are strictly positive and sum to
/// one (enforced at construction to 1e−12).
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    positions: Vec<Vector3<f64>>,
    weights: Vec<f64>,
}

/// Derived constellation geometry: weighted centroid p_c, second moment
/// M = Σ k_i (p_i − p_c)(p_i − p_c)ᵀ, its complement M̄ = ½(tr(M) I − M), and
/// the eigenvalues of M in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationStats {
    pub centroid: Vector3<f64>,
    pub second_moment: Matrix3<f64>,
    pub complement: Matrix3<f64>,
    pub eigenvalues: [f64; 3],
}

/// Structural observability summary for a constellation; see
/// [`check_observability_conditions`].
#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityReport {
    /// At least three landmarks spanning more than a line.
    pub non_collinear: bool,
    /// The three eigenvalues of M are pairwise distinct.
    pub distinct_eigenvalues: bool,
    /// M̄ = ½(tr(M) I − M) is positive definite.
    pub complement_positive_definite: bool,
    /// tr(M) − λ_min(M); the discrete attitude-update gain must satisfy
    /// k_R · (tr(M) − λ_min(M)) < 1.
    pub kr_bound: f64,
    /// λ_min(M̄)/λ_max(M̄) ∈ [0, 1]; estimates the attitude basin radius of
    /// the continuous-attitude hybrid.
    pub basin_ratio: f64,
    pub eigenvalues: [f64; 3],
}

impl LandmarkSet {
    pub fn new(positions: Vec<Vector3<f64>>, weights: Vec<f64>) -> Result<Self, WorldError> {
        if positions.is_empty() {
            return Err(WorldError::BadLandmarks("no landmarks given".into()));
        }
        if positions.len() != weights.len() {
            return Err(WorldError::BadLandmarks(format!(
                "{} positions but {} weights",
                positions.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(WorldError::BadLandmarks(format!(
                "weights must be finite and positive, got {w}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(WorldError::BadLandmarks(format!(
                "weights must sum to 1 (got {total:.15})"
            )));
        }
        Ok(LandmarkSet { positions, weights })
    }

    /// Equal weights 1/N.
    pub fn with_equal_weights(positions: Vec<Vector3<f64>>) -> Result<Self, WorldError> {
        let n = positions.len();
        if n == 0 {
            return Err(WorldError::BadLandmarks("no landmarks given".into()));
        }
        LandmarkSet::new(positions, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.positions
            .iter()
            .zip(&self.weights)
            .map(|(p, k)| p * *k)
            .sum()
    }
}

/// Weighted centroid, second moment and eigenstructure of a constellation.
pub fn constellation_stats(set: &LandmarkSet) -> ConstellationStats {
    let centroid = set.centroid();
    let mut m = Matrix3::zeros();
    for (p, k) in set.positions().iter().zip(set.weights()) {
        let d = p - centroid;
        m += d * d.transpose() * *k;
    }
    let complement = (Matrix3::identity() * m.trace() - m) * 0.5;
    let mut eig: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ConstellationStats {
        centroid,
        second_moment: m,
        complement,
        eigenvalues: [eig[0], eig[1], eig[2]],
    }
}

/// Evaluates the geometric conditions the observers rely on: (a) at least
/// three non-collinear landmarks, (b) pairwise-distinct eigenvalues of M,
/// (c) positive-definite M̄, and the quantities entering the attitude-gain
/// bound and basin estimate.
pub fn check_observability_conditions(set: &LandmarkSet) -> ObservabilityReport {
    let stats = constellation_stats(set);
    let [l0, l1, l2] = stats.eigenvalues;
    let scale = l2.max(1e-30);
    let tol = 1e-9 * scale.max(1.0);
    // Collinear constellations have rank-one M (λ0 = λ1 = 0).
    let non_collinear = set.len() >= 3 && l1 > tol;
    let distinct_eigenvalues = (l1 - l0) > tol && (l2 - l1) > tol;
    let mut cbar: Vec<f64> = stats
        .complement
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    cbar.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let complement_positive_definite = cbar[0] > tol;
    let kr_bound = stats.second_moment.trace() - l0;
    let basin_ratio = if cbar[2] > 0.0 { (cbar[0] / cbar[2]).max(0.0) } else { 0.0 };
    ObservabilityReport {
        non_collinear,
        distinct_eigenvalues,
        complement_positive_definite,
        kr_bound,
        basin_ratio,
        eigenvalues: stats.eigenvalues,
    }
}

/// Sensor noise covariances (all 3×3, positive semidefinite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub gyro_cov: Matrix3<f64>,
    pub accel_cov: Matrix3<f64>,
    pub landmark_cov: Matrix3<f64>,
}

impl NoiseSpec {
    pub fn new(
        gyro_cov: Matrix3<f64>,
        accel_cov: Matrix3<f64>,
        landmark_cov: Matrix3<f64>,
    ) -> Result<Self, WorldError> {
        for (name, m) in [
            ("gyro", &gyro_cov),
            ("accel", &accel_cov),
            ("landmark", &landmark_cov),
        ] {
            if (m - m.transpose()).norm() > 1e-12 {
                return Err(WorldError::BadNoise(format!("{name} covariance not symmetric")));
            }
            let min = m
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if min < -1e-12 {
                return Err(WorldError::BadNoise(format!(
                    "{name} covariance has negative eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(NoiseSpec { gyro_cov, accel_cov, landmark_cov })
    }

    /// Isotropic noise from per-axis standard deviations.
    pub fn isotropic(gyro_std: f64, accel_std: f64, landmark_std: f64) -> Result<Self, WorldError> {
        for (name, s) in [("gyro", gyro_std), ("accel", accel_std), ("landmark", landmark_std)] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(WorldError::BadNoise(format!(
                    "{name} standard deviation must be finite and non-negative, got {s}"
                )));
            }
        }
        Ok(NoiseSpec {
            gyro_cov: Matrix3::identity() * gyro_std * gyro_std,
            accel_cov: Matrix3::identity() * accel_std * accel_std,
            landmark_cov: Matrix3::identity() * landmark_std * landmark_std,
        })
    }

    pub fn noise_free() -> Self {
        NoiseSpec {
            gyro_cov: Matrix3::zeros(),
            accel_cov: Matrix3::zeros(),
            landmark_cov: Matrix3::zeros(),
        }
    }
}

// Factor L with L Lᵀ = cov. Cholesky when the matrix is definite; a
// symmetric-eigenvalue square root otherwise (covers the semidefinite case,
// e.g. exactly zero covariance).
fn psd_factor(cov: &Matrix3<f64>) -> Matrix3<f64> {
    if let Some(chol) = cov.cholesky() {
        return chol.l();
    }
    let eig = cov.symmetric_eigen();
    let mut scaled = eig.eigenvectors;
    for j in 0..3 {
        let s = eig.eigenvalues[j].max(0.0).sqrt();
        scaled.column_mut(j).scale_mut(s);
    }
    scaled
}

/// Draws correlated Gaussian vectors for the three sensor channels. The draw
/// order (gyro, accel, landmarks in index order) is part of the determinism
/// contract: identical seeds reproduce identical streams bit for bit.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    gyro_factor: Matrix3<f64>,
    accel_factor: Matrix3<f64>,
    landmark_factor: Matrix3<f64>,
}

impl NoiseSampler {
    pub fn new(spec: &NoiseSpec) -> Self {
        NoiseSampler {
            gyro_factor: psd_factor(&spec.gyro_cov),
            accel_factor: psd_factor(&spec.accel_cov),
            landmark_factor: psd_factor(&spec.landmark_cov),
        }
    }

    fn draw<R: Rng>(factor: &Matrix3<f64>, rng: &mut R) -> Vector3<f64> {
        let z = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        factor * z
    }
}

/// Samples the IMU at time `t` given the true body rates.
pub fn measure_imu<R: Rng>(
    t: f64,
    omega: &Vector3<f64>,
    accel: &Vector3<f64>,
    sampler: &NoiseSampler,
    rng: &mut R,
) -> ImuSample {
    ImuSample {
        t,
        gyro: omega + NoiseSampler::draw(&sampler.gyro_factor, rng),
        accel: accel + NoiseSampler::draw(&sampler.accel_factor, rng),
    }
}

/// Samples body-frame landmark measurements y_i = Rᵀ(p_i − p) + n_i at time
/// `t`, one per landmark in set order.
pub fn measure_landmarks<R: Rng>(
    t: f64,
    pose: &ExtendedPose,
    set: &LandmarkSet,
    sampler: &NoiseSampler,
    rng: &mut R,
) -> LandmarkObservation {
    let rt = pose.rot.transpose();
    let body = set
        .positions()
        .iter()
        .map(|p| rt * (p - pose.pos) + NoiseSampler::draw(&sampler.landmark_factor, rng))
        .collect();
    LandmarkObservation { t, body }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::exp_so3;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn pose(theta: Vector3<f64>, vel: Vector3<f64>, pos: Vector3<f64>) -> ExtendedPose {
        ExtendedPose::new(exp_so3(&theta), vel, pos)
    }

    #[test]
    fn derivative_matches_kinematics() {
        let x = pose(
            Vector3::new(0.1, -0.4, 0.9),
            Vector3::new(1.0, 0.0, -2.0),
            Vector3::new(5.0, 5.0, 0.0),
        );
        let omega = Vector3::new(0.0, 0.2, -0.1);
        let accel = Vector3::new(0.3, 0.0, 9.0);
        let d = derivative(&x, &omega, &accel, &DEFAULT_GRAVITY);
        assert_abs_diff_eq!(d.pos, x.vel, epsilon = 0.0);
        assert_abs_diff_eq!(d.vel, DEFAULT_GRAVITY + x.rot * accel, epsilon = 0.0);
        assert_abs_diff_eq!(d.rot, x.rot.matrix() * crate::lie::hat3(&omega), epsilon = 0.0);
    }

    #[test]
    fn hover_has_zero_velocity_derivative_under_exact_thrust() {
        let x = pose(Vector3::zeros(), Vector3::zeros(), Vector3::new(0.0, 0.0, 10.0));
        let accel = Vector3::new(0.0, 0.0, 9.81);
        let d = derivative(&x, &Vector3::zeros(), &accel, &DEFAULT_GRAVITY);
        assert_abs_diff_eq!(d.vel, Vector3::zeros(), epsilon = 1e-15);
        assert_eq!(d.rot, Matrix3::zeros());
    }

    #[test]
    fn zero_covariance_measurements_are_exact() {
        let sampler = NoiseSampler::new(&NoiseSpec::noise_free());
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let omega = Vector3::new(0.1, 0.2, 0.3);
        let accel = Vector3::new(-1.0, 0.0, 9.81);
        let imu = measure_imu(0.5, &omega, &accel, &sampler, &mut rng);
        assert_eq!(imu.gyro, omega);
        assert_eq!(imu.accel, accel);

        let x = pose(
            Vector3::new(0.3, 0.0, -0.2),
            Vector3::zeros(),
            Vector3::new(1.0, 2.0, 3.0),
        );
        let set = LandmarkSet::with_equal_weights(vec![
            Vector3::new(10.0, 0.0, 0.0),
            Vector3::new(0.0, 10.0, 0.0),
            Vector3::new(0.0, 0.0, 10.0),
        ])
        .unwrap();
        let obs = measure_landmarks(0.5, &x, &set, &sampler, &mut rng);
        for (y, p) in obs.body.iter().zip(set.positions()) {
            assert_abs_diff_eq!(*y, x.rot.transpose() * (p - x.pos), epsilon = 0.0);
        }
    }

    #[test]
    fn identical_seeds_reproduce_measurements_bitwise() {
        let spec = NoiseSpec::isotropic(0.01, 0.1, 0.05).unwrap();
        let sampler = NoiseSampler::new(&spec);
        let x = pose(
            Vector3::new(0.0, 0.4, 0.1),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::zeros(),
        );
        let set = LandmarkSet::with_equal_weights(vec![
            Vector3::new(3.0, 0.0, 1.0),
            Vector3::new(-3.0, 2.0, 0.0),
        ])
        .unwrap();
        let run = |seed: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let imu = measure_imu(0.0, &Vector3::zeros(), &Vector3::zeros(), &sampler, &mut rng);
            let obs = measure_landmarks(0.0, &x, &set, &sampler, &mut rng);
            (imu, obs)
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42).0, run(43).0);
    }

    #[test]
    fn landmark_set_validation() {
        assert!(LandmarkSet::with_equal_weights(vec![]).is_err());
        assert!(LandmarkSet::new(vec![Vector3::zeros()], vec![0.5, 0.5]).is_err());
        assert!(LandmarkSet::new(vec![Vector3::zeros(), Vector3::x()], vec![0.7, 0.4]).is_err());
        assert!(LandmarkSet::new(vec![Vector3::zeros(), Vector3::x()], vec![1.0, -0.0]).is_err());
        assert!(LandmarkSet::new(vec![Vector3::zeros(), Vector3::x()], vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn unit_simplex_constellation_stats() {
        let set = LandmarkSet::with_equal_weights(vec![Vector3::x(), Vector3::y(), Vector3::z()])
            .unwrap();
        let stats = constellation_stats(&set);
        assert_abs_diff_eq!(stats.centroid, Vector3::new(1.0, 1.0, 1.0) / 3.0, epsilon = 1e-15);
        let ones = Matrix3::from_element(1.0);
        let expect = (Matrix3::identity() - ones / 3.0) / 3.0;
        assert_abs_diff_eq!(stats.second_moment, expect, epsilon = 1e-15);
        assert_abs_diff_eq!(stats.eigenvalues[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(stats.eigenvalues[1], 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(stats.eigenvalues[2], 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn collinear_landmarks_fail_observability() {
        let set = LandmarkSet::with_equal_weights(vec![
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(2.0, 0.0, 0.0),
            Vector3::new(5.0, 0.0, 0.0),
        ])
        .unwrap();
        let report = check_observability_conditions(&set);
        assert!(!report.non_collinear);
        assert!(!report.complement_positive_definite);
    }

    #[test]
    fn simplex_landmarks_are_non_collinear_but_degenerate() {
        let set = LandmarkSet::with_equal_weights(vec![Vector3::x(), Vector3::y(), Vector3::z()])
            .unwrap();
        let report = check_observability_conditions(&set);
        assert!(report.non_collinear);
        assert!(!report.distinct_eigenvalues);
        assert!(report.complement_positive_definite);
        assert_abs_diff_eq!(report.kr_bound, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn spread_constellation_has_distinct_eigenvalues() {
        let set = LandmarkSet::with_equal_weights(vec![
            Vector3::new(4.0, 0.0, 0.1),
            Vector3::new(-3.0, 2.0, 0.0),
            Vector3::new(0.0, -5.0, 1.0),
            Vector3::new(1.0, 1.0, 6.0),
        ])
        .unwrap();
        let report = check_observability_conditions(&set);
        assert!(report.non_collinear);
        assert!(report.distinct_eigenvalues);
        assert!(report.complement_positive_definite);
        assert!(report.basin_ratio > 0.0 && report.basin_ratio <= 1.0);
    }

    #[test]
    fn noise_spec_validation() {
        assert!(NoiseSpec::isotropic(-0.1, 0.0, 0.0).is_err());
        let mut bad = Matrix3::identity();
        bad[(0, 1)] = 0.5; // asymmetric
        assert!(NoiseSpec::new(bad, Matrix3::zeros(), Matrix3::zeros()).is_err());
        let indefinite = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
        assert!(NoiseSpec::new(indefinite, Matrix3::zeros(), Matrix3::zeros()).is_err());
    }
}
