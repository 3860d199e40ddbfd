//! Geometric observers on SE₂(3): the continuous landmark-feedback observer
//! and two hybrid observers for intermittently available landmarks, each
//! usable with fixed gains or Riccati-scheduled gains, plus the fixed-gain
//! certification machinery.
//!
//! All three observers share the innovation pair built from body-frame
//! landmark measurements y_i of known inertial points p_i with weights k_i
//! summing to one and weighted centroid p_c:
//!
//! ```text
//! e_i = p_i − p̂ − R̂ y_i,   y = Σ k_i e_i,
//! σ_R = ½ Σ k_i (p_i − p_c)^× e_i.
//! ```
//!
//! In terms of the geometric errors R̃ = R R̂ᵀ, p̃ = p − R̃ p̂ − (I − R̃) p_c,
//! these satisfy σ_R = ψ(M R̃) and y = R̃ᵀ p̃ (noise-free), which is what
//! decouples the attitude error dynamics from the translation errors and
//! makes the stability analysis tractable. Tests assert those identities
//! directly.
//!
//! Gain conventions (deliberately mirroring the defining equations):
//! * the continuous observer applies K_p, K_v directly in the inertial
//!   frame (`ṗ̂ = … + K_p y`);
//! * the hybrid jumps sandwich the gain as `R̂ K_p R̂ᵀ y`. With isotropic
//!   gains the two coincide.

use crate::lie::{
    cayley, hat3, proj_gain, ExtendedPose, GainSet, LieError, Matrix5, Rotation,
};
use crate::riccati::{
    assert_covariance, measurement_update, riccati_rk4_step, symmetrize, RiccatiError,
};
use crate::world::{LandmarkSet, NoiseSpec};
use nalgebra::{DMatrix, Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometricError {
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
    #[error("observation/landmark mismatch: {0}")]
    Mismatch(String),
    #[error("invalid observer configuration: {0}")]
    BadConfig(String),
}

/// Innovation pair (σ_R, y) shared by every observer in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Innovations {
    pub sigma_r: Vector3<f64>,
    pub y: Vector3<f64>,
}

fn innovations_raw(
    rot: &Matrix3<f64>,
    pos: &Vector3<f64>,
    obs: &[Vector3<f64>],
    landmarks: &LandmarkSet,
) -> Innovations {
    let p_c = landmarks.centroid();
    let mut sigma_r = Vector3::zeros();
    let mut y = Vector3::zeros();
    for ((p_i, k_i), y_i) in landmarks.positions().iter().zip(landmarks.weights()).zip(obs) {
        let e_i = p_i - pos - rot * y_i;
        y += e_i * *k_i;
        sigma_r += (p_i - p_c).cross(&e_i) * (0.5 * k_i);
    }
    Innovations { sigma_r, y }
}

/// Computes (σ_R, y) from one epoch of landmark observations (ordered like
/// the set).
pub fn innovations(
    est: &ExtendedPose,
    obs: &[Vector3<f64>],
    landmarks: &LandmarkSet,
) -> Result<Innovations, GeometricError> {
    if obs.len() != landmarks.len() {
        return Err(GeometricError::Mismatch(format!(
            "{} observations for {} landmarks",
            obs.len(),
            landmarks.len()
        )));
    }
    Ok(innovations_raw(est.rot.matrix(), &est.pos, obs, landmarks))
}

// ---------------------------------------------------------------------------
// Riccati gain scheduling shared by the observers.
// ---------------------------------------------------------------------------

/// Time-varying-gain state: the 6×6 covariance of the rotated translation
/// errors x = (Rᵀp̃, Rᵀṽ) plus the noise model that shapes V_t and Q_t.
#[derive(Debug, Clone)]
pub struct RiccatiGains {
    p: DMatrix<f64>,
    model: NoiseSpec,
    eps_scale: f64,
}

impl RiccatiGains {
    /// `p0` is the initial 6×6 covariance; `model` supplies V̄ (gyro/accel
    /// blocks) and Q̄ (landmark block, required positive definite);
    /// `eps_scale` sets the V_t regularizer ε = eps_scale·‖V̄‖.
    pub fn new(p0: DMatrix<f64>, model: NoiseSpec, eps_scale: f64) -> Result<Self, GeometricError> {
        if p0.nrows() != 6 || p0.ncols() != 6 {
            return Err(GeometricError::BadConfig(format!(
                "Riccati state must be 6x6, got {}x{}",
                p0.nrows(),
                p0.ncols()
            )));
        }
        assert_covariance(&p0, 1e-9)?;
        let q = DMatrix::from_iterator(3, 3, model.landmark_cov.iter().copied());
        if !crate::riccati::is_positive_definite(&q) {
            return Err(GeometricError::BadConfig(
                "Riccati gain scheduling needs a positive definite landmark noise model".into(),
            ));
        }
        if !(eps_scale.is_finite() && eps_scale >= 0.0) {
            return Err(GeometricError::BadConfig(format!(
                "eps_scale must be finite and non-negative, got {eps_scale}"
            )));
        }
        Ok(RiccatiGains { p: p0, model, eps_scale })
    }

    /// Identity initial covariance and the default regularizer scale 1e−6.
    pub fn with_defaults(model: NoiseSpec) -> Result<Self, GeometricError> {
        RiccatiGains::new(DMatrix::identity(6, 6), model, 1e-6)
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.p
    }

    fn v_bar_norm(&self) -> f64 {
        (self.model.gyro_cov.norm_squared() + self.model.accel_cov.norm_squared()).sqrt()
    }

    fn epsilon(&self) -> f64 {
        // ε = eps_scale·‖V̄‖ keeps V_t uniformly positive definite; the
        // absolute floor covers the degenerate noise-free model where the
        // relative rule would collapse to zero.
        (self.eps_scale * self.v_bar_norm()).max(1e-12)
    }

    fn v_t(&self, est: &ExtendedPose, p_c: &Vector3<f64>) -> DMatrix<f64> {
        let g_t = g_t_matrix(est, p_c);
        let mut v_bar = DMatrix::zeros(6, 6);
        v_bar.view_mut((0, 0), (3, 3)).copy_from(&self.model.gyro_cov);
        v_bar.view_mut((3, 3), (3, 3)).copy_from(&self.model.accel_cov);
        let mut v = &g_t * v_bar * g_t.transpose() + DMatrix::identity(6, 6) * self.epsilon();
        symmetrize(&mut v);
        v
    }

    fn q_t_cov(&self, est: &ExtendedPose, landmarks: &LandmarkSet) -> Matrix3<f64> {
        q_t_matrix(est, landmarks, &self.model)
    }
}

/// A_t = [[−ω^×, I], [0, −ω^×]]: drift of x = (Rᵀp̃, Rᵀṽ) under continuous
/// correction.
pub fn a_t_matrix(omega: &Vector3<f64>) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(6, 6);
    let w = -hat3(omega);
    a.view_mut((0, 0), (3, 3)).copy_from(&w);
    a.view_mut((0, 3), (3, 3)).copy_from(&Matrix3::identity());
    a.view_mut((3, 3), (3, 3)).copy_from(&w);
    a
}

/// C_t = [I₃ 0₃].
pub fn c_t_matrix() -> DMatrix<f64> {
    let mut c = DMatrix::zeros(3, 6);
    c.view_mut((0, 0), (3, 3)).copy_from(&Matrix3::identity());
    c
}

/// G_t = [[(R̂ᵀ(p̂−p_c))^×, 0], [(R̂ᵀv̂)^×, I]]: injection of body-frame IMU
/// noise (n_ω, n_a) into the x dynamics.
pub fn g_t_matrix(est: &ExtendedPose, p_c: &Vector3<f64>) -> DMatrix<f64> {
    let rt = est.rot.transpose();
    let mut g = DMatrix::zeros(6, 6);
    g.view_mut((0, 0), (3, 3)).copy_from(&hat3(&(rt * (est.pos - p_c))));
    g.view_mut((3, 0), (3, 3)).copy_from(&hat3(&(rt * est.vel)));
    g.view_mut((3, 3), (3, 3)).copy_from(&Matrix3::identity());
    g
}

/// Q_t = Σ k_i² R̂ Q̄ R̂ᵀ: covariance of the aggregated landmark innovation
/// noise.
pub fn q_t_matrix(est: &ExtendedPose, landmarks: &LandmarkSet, model: &NoiseSpec) -> Matrix3<f64> {
    let k2: f64 = landmarks.weights().iter().map(|k| k * k).sum();
    let r = est.rot.matrix();
    (r * model.landmark_cov * r.transpose()) * k2
}

/// Integrates the Riccati flow Ṗ = A P + P Aᵀ + V − P S P over `dt`,
/// internally sub-stepping so the RK4 steps stay well inside the stability
/// region even when the quadratic term is stiff (large S·P).
fn riccati_flow(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    v: &DMatrix<f64>,
    s: Option<&DMatrix<f64>>,
    dt: f64,
) -> Result<DMatrix<f64>, RiccatiError> {
    let scale = a.norm() + s.map_or(0.0, |s| s.norm() * p.norm()) + 1.0;
    let n = ((dt * scale / 0.2).ceil() as usize).clamp(1, 100_000);
    let h = dt / n as f64;
    let mut p = p.clone();
    for _ in 0..n {
        p = riccati_rk4_step(&p, a, v, s, h)?;
    }
    Ok(p)
}

// ---------------------------------------------------------------------------
// Continuous observer.
// ---------------------------------------------------------------------------

/// Continuous landmark-feedback observer:
///
/// ```text
/// R̂̇ = R̂ (ω + k_R R̂ᵀ σ_R)^×
/// p̂̇ = v̂ + k_R σ_R^× (p̂ − p_c) + K_p y
/// v̂̇ = g + R̂ a + k_R σ_R^× v̂ + K_v y
/// ```
///
/// stepped with classical RK4 on the raw state — the innovation signals
/// σ_R, y are evaluated once per step against the step-start estimate and
/// held through the stages — followed by a polar re-orthonormalization of
/// R̂. In Riccati mode K_p, K_v are rebuilt every
/// step from the continuous Riccati equation
/// Ṗ = A_t P + P A_tᵀ − P C_tᵀ Q_t C_t P + V_t with gain K = P C_tᵀ Q_t and
/// physical gains K_p = R̂ K₁ R̂ᵀ, K_v = R̂ K₂ R̂ᵀ. Q_t here is an
/// information-style weight, taken as the inverse of the aggregated
/// landmark noise covariance so that heavier noise lowers the gains.
#[derive(Debug, Clone)]
pub struct ContinuousObserver {
    est: ExtendedPose,
    gains: GainSet,
    riccati: Option<RiccatiGains>,
    gravity: Vector3<f64>,
}

fn rk4_pose<F>(
    rot: &Matrix3<f64>,
    vel: &Vector3<f64>,
    pos: &Vector3<f64>,
    dt: f64,
    rate: F,
) -> (Matrix3<f64>, Vector3<f64>, Vector3<f64>)
where
    F: Fn(&Matrix3<f64>, &Vector3<f64>, &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>, Vector3<f64>),
{
    let (kr1, kv1, kp1) = rate(rot, vel, pos);
    let h = 0.5 * dt;
    let (kr2, kv2, kp2) = rate(&(rot + kr1 * h), &(vel + kv1 * h), &(pos + kp1 * h));
    let (kr3, kv3, kp3) = rate(&(rot + kr2 * h), &(vel + kv2 * h), &(pos + kp2 * h));
    let (kr4, kv4, kp4) = rate(&(rot + kr3 * dt), &(vel + kv3 * dt), &(pos + kp3 * dt));
    let w = dt / 6.0;
    (
        rot + (kr1 + kr2 * 2.0 + kr3 * 2.0 + kr4) * w,
        vel + (kv1 + kv2 * 2.0 + kv3 * 2.0 + kv4) * w,
        pos + (kp1 + kp2 * 2.0 + kp3 * 2.0 + kp4) * w,
    )
}

impl ContinuousObserver {
    pub fn new(initial: ExtendedPose, gains: GainSet, gravity: Vector3<f64>) -> Self {
        ContinuousObserver { est: initial, gains, riccati: None, gravity }
    }

    /// Riccati-scheduled translational gains; `kr` stays constant.
    pub fn with_riccati_gains(
        initial: ExtendedPose,
        kr: f64,
        riccati: RiccatiGains,
        gravity: Vector3<f64>,
    ) -> Result<Self, GeometricError> {
        let gains = GainSet::isotropic(kr, 0.0, 0.0)?;
        Ok(ContinuousObserver { est: initial, gains, riccati: Some(riccati), gravity })
    }

    pub fn est(&self) -> &ExtendedPose {
        &self.est
    }

    pub fn gains(&self) -> &GainSet {
        &self.gains
    }

    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        self.riccati.as_ref().map(|r| r.covariance())
    }

    /// One IMU interval with a fresh landmark observation (the continuous
    /// design assumes landmarks at every epoch).
    pub fn step(
        &mut self,
        omega: &Vector3<f64>,
        accel: &Vector3<f64>,
        obs: &[Vector3<f64>],
        landmarks: &LandmarkSet,
        dt: f64,
    ) -> Result<(), GeometricError> {
        if obs.len() != landmarks.len() {
            return Err(GeometricError::Mismatch(format!(
                "{} observations for {} landmarks",
                obs.len(),
                landmarks.len()
            )));
        }
        let p_c = landmarks.centroid();

        if let Some(r) = &mut self.riccati {
            let a = a_t_matrix(omega);
            let v = r.v_t(&self.est, &p_c);
            let q_cov = DMatrix::from_iterator(3, 3, r.q_t_cov(&self.est, landmarks).iter().copied());
            let q_weight = q_cov
                .clone()
                .cholesky()
                .ok_or(RiccatiError::SingularInnovation)?
                .inverse();
            let c = c_t_matrix();
            let mut s = c.transpose() * &q_weight * &c;
            symmetrize(&mut s);
            r.p = riccati_flow(&r.p, &a, &v, Some(&s), dt)?;
            // K = P C_tᵀ Q_t stacked as (K₁; K₂); physical gains conjugate
            // the blocks back into the inertial frame.
            let k = &r.p * c.transpose() * &q_weight;
            let rhat = self.est.rot.matrix();
            let k1 = Matrix3::from_iterator(k.view((0, 0), (3, 3)).iter().copied());
            let k2 = Matrix3::from_iterator(k.view((3, 0), (3, 3)).iter().copied());
            self.gains.kp = rhat * k1 * rhat.transpose();
            self.gains.kv = rhat * k2 * rhat.transpose();
        }

        // σ_R, y are formed once from the step-start estimate — the only
        // instant at which estimate and observation refer to the same time —
        // and held as inputs through the stages. Re-forming them against the
        // advancing stage state would compare it with a stale observation and
        // bias the equilibrium half an IMU step behind a moving target.
        let inn = innovations_raw(self.est.rot.matrix(), &self.est.pos, obs, landmarks);
        let gains = self.gains;
        let gravity = self.gravity;
        let rate = |r: &Matrix3<f64>, v: &Vector3<f64>, p: &Vector3<f64>| {
            let dr = r * hat3(omega) + gains.kr * hat3(&inn.sigma_r) * r;
            let dv =
                gravity + r * accel + gains.kr * inn.sigma_r.cross(v) + gains.kv * inn.y;
            let dp = v + gains.kr * inn.sigma_r.cross(&(p - p_c)) + gains.kp * inn.y;
            (dr, dv, dp)
        };
        let (r, v, p) =
            rk4_pose(self.est.rot.matrix(), &self.est.vel, &self.est.pos, dt, rate);
        self.est = ExtendedPose::new(Rotation::from_nearest(&r), v, p);
        Ok(())
    }
}

/// One RK4 step of the same observer in its 5×5 matrix form
/// Ẋ̂ = f(X̂, u) − Ad_{X_c}(Δ) X̂ with
/// Δ = −ℙ_K((r̄ − X_c⁻¹ X̂ b) K_N r̄₊ᵀ), used to cross-validate the
/// component form. The weighting matrix r̄₊ carries a one in the velocity
/// slot of each reference vector: with the literal zero of the homogeneous
/// reference vectors the projected innovation would never reach the K_v
/// channel and the matrix form would silently drop the velocity feedback of
/// the component form.
pub fn matrix_form_step(
    est: &ExtendedPose,
    gains: &GainSet,
    omega: &Vector3<f64>,
    accel: &Vector3<f64>,
    obs: &[Vector3<f64>],
    landmarks: &LandmarkSet,
    gravity: &Vector3<f64>,
    dt: f64,
) -> Result<ExtendedPose, GeometricError> {
    if obs.len() != landmarks.len() {
        return Err(GeometricError::Mismatch(format!(
            "{} observations for {} landmarks",
            obs.len(),
            landmarks.len()
        )));
    }
    let p_c = landmarks.centroid();
    let xc = ExtendedPose::new(Rotation::identity(), Vector3::zeros(), p_c);
    let xc_e = xc.embed();
    let xc_inv_e = xc.inverse().embed();
    let x0 = est.embed();

    // E = (r̄ − X_c⁻¹ X̂ b) K_N r̄₊ᵀ, assembled once from the step-start
    // embedding — the same frozen-innovation convention as the component
    // form, which keeps the two forms stagewise identical.
    let mut e = Matrix5::zeros();
    for ((p_i, k_i), y_i) in landmarks.positions().iter().zip(landmarks.weights()).zip(obs) {
        let mut b_i = nalgebra::SVector::<f64, 5>::zeros();
        b_i.fixed_rows_mut::<3>(0).copy_from(y_i);
        b_i[4] = 1.0;
        let mut rbar_i = nalgebra::SVector::<f64, 5>::zeros();
        rbar_i.fixed_rows_mut::<3>(0).copy_from(&(p_i - p_c));
        rbar_i[4] = 1.0;
        let d_i = rbar_i - xc_inv_e * x0 * b_i;
        let mut weight_i = rbar_i;
        weight_i[3] = 1.0;
        e += *k_i * d_i * weight_i.transpose();
    }
    let delta = -proj_gain(gains, &e);
    let correction = xc_e * delta * xc_inv_e;

    let rate = |x: &Matrix5| -> Matrix5 {
        let r = x.fixed_view::<3, 3>(0, 0).into_owned();
        let v = x.fixed_view::<3, 1>(0, 3).into_owned();

        // f(X, u): kinematic drift in the embedding.
        let mut f = Matrix5::zeros();
        f.fixed_view_mut::<3, 3>(0, 0).copy_from(&(r * hat3(omega)));
        f.fixed_view_mut::<3, 1>(0, 3).copy_from(&(gravity + r * accel));
        f.fixed_view_mut::<3, 1>(0, 4).copy_from(&v);

        f - correction * x
    };

    let k1 = rate(&x0);
    let k2 = rate(&(x0 + k1 * (0.5 * dt)));
    let k3 = rate(&(x0 + k2 * (0.5 * dt)));
    let k4 = rate(&(x0 + k3 * dt));
    let x1 = x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);

    let r = x1.fixed_view::<3, 3>(0, 0).into_owned();
    Ok(ExtendedPose::new(
        Rotation::from_nearest(&r),
        x1.fixed_view::<3, 1>(0, 3).into_owned(),
        x1.fixed_view::<3, 1>(0, 4).into_owned(),
    ))
}

// ---------------------------------------------------------------------------
// Hybrid observers.
// ---------------------------------------------------------------------------

fn sandwich(rot: &Rotation, k: &Matrix3<f64>) -> Matrix3<f64> {
    rot.matrix() * k * rot.matrix().transpose()
}

/// Shared Riccati bookkeeping for the hybrids: the covariance flows as
/// Ṗ = A_t P + P A_tᵀ + V_t between epochs (the same drift matrix as the
/// continuous case — the velocity-to-position coupling is what lets position
/// measurements inform the velocity gain), then at each epoch the gain is
/// K = P C_tᵀ (C_t P C_tᵀ + Q_t)⁻¹ with covariance downdate P⁺ = P − K C_t P.
/// Returns the (K_p, K_v) blocks to be applied inside the R̂ (·) R̂ᵀ sandwich
/// of the jump maps.
fn hybrid_riccati_jump(
    r: &mut RiccatiGains,
    est: &ExtendedPose,
    landmarks: &LandmarkSet,
) -> Result<(Matrix3<f64>, Matrix3<f64>), GeometricError> {
    let c = c_t_matrix();
    let q = DMatrix::from_iterator(3, 3, r.q_t_cov(est, landmarks).iter().copied());
    let (k, p_next) = measurement_update(&r.p, &c, &q)?;
    r.p = p_next;
    let kp = Matrix3::from_iterator(k.view((0, 0), (3, 3)).iter().copied());
    let kv = Matrix3::from_iterator(k.view((3, 0), (3, 3)).iter().copied());
    Ok((kp, kv))
}

/// Hybrid observer with discrete attitude updates. Between landmark epochs
/// the estimate integrates the raw kinematics; at an epoch the whole state
/// jumps through the Cayley rotation R_σ with σ = 2 k_R σ_R:
///
/// ```text
/// R̂⁺ = R_σ R̂
/// p̂⁺ = R_σ (p̂ − p_c + R̂ K_p R̂ᵀ y) + p_c
/// v̂⁺ = R_σ (v̂ + R̂ K_v R̂ᵀ y)
/// ```
///
/// The attitude error R̃ = R R̂ᵀ then contracts by I − 4 k_R M̄ to first
/// order, which is stable whenever k_R (tr M − λ_min(M)) < 1.
#[derive(Debug, Clone)]
pub struct DiscreteAttitudeHybrid {
    est: ExtendedPose,
    gains: GainSet,
    riccati: Option<RiccatiGains>,
    gravity: Vector3<f64>,
}

impl DiscreteAttitudeHybrid {
    pub fn new(initial: ExtendedPose, gains: GainSet, gravity: Vector3<f64>) -> Self {
        DiscreteAttitudeHybrid { est: initial, gains, riccati: None, gravity }
    }

    pub fn with_riccati_gains(
        initial: ExtendedPose,
        kr: f64,
        riccati: RiccatiGains,
        gravity: Vector3<f64>,
    ) -> Result<Self, GeometricError> {
        let gains = GainSet::isotropic(kr, 0.0, 0.0)?;
        Ok(DiscreteAttitudeHybrid { est: initial, gains, riccati: Some(riccati), gravity })
    }

    pub fn est(&self) -> &ExtendedPose {
        &self.est
    }

    pub fn gains(&self) -> &GainSet {
        &self.gains
    }

    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        self.riccati.as_ref().map(|r| r.covariance())
    }

    /// IMU-driven flow over one interval (no landmark feedback).
    pub fn flow(
        &mut self,
        omega: &Vector3<f64>,
        accel: &Vector3<f64>,
        landmarks: &LandmarkSet,
        dt: f64,
    ) -> Result<(), GeometricError> {
        if let Some(r) = &mut self.riccati {
            let a = a_t_matrix(omega);
            let v = r.v_t(&self.est, &landmarks.centroid());
            r.p = riccati_flow(&r.p, &a, &v, None, dt)?;
        }
        self.est = crate::world::propagate_pose(&self.est, omega, accel, &self.gravity, dt);
        Ok(())
    }

    /// Landmark-epoch jump.
    pub fn jump(
        &mut self,
        obs: &[Vector3<f64>],
        landmarks: &LandmarkSet,
    ) -> Result<(), GeometricError> {
        let inn = innovations(&self.est, obs, landmarks)?;
        if let Some(r) = &mut self.riccati {
            let (kp, kv) = hybrid_riccati_jump(r, &self.est, landmarks)?;
            self.gains.kp = kp;
            self.gains.kv = kv;
        }
        let p_c = landmarks.centroid();
        let r_sigma = cayley(&(2.0 * self.gains.kr * inn.sigma_r));
        let pos = r_sigma * (self.est.pos - p_c + sandwich(&self.est.rot, &self.gains.kp) * inn.y)
            + p_c;
        let vel = r_sigma * (self.est.vel + sandwich(&self.est.rot, &self.gains.kv) * inn.y);
        self.est = ExtendedPose::new(r_sigma * self.est.rot, vel, pos);
        Ok(())
    }
}

/// Hybrid observer with continuous attitude estimates: the auxiliary
/// variable η (constant between epochs, reset to k_R σ_R at each epoch)
/// steers the attitude continuously, so R̂ never jumps:
///
/// ```text
/// flow:  R̂̇ = R̂ (ω + R̂ᵀ η)^×,  η̇ = 0,
///        p̂̇ = η^× (p̂ − p_c) + v̂,  v̂̇ = η^× v̂ + g + R̂ a
/// jump:  R̂⁺ = R̂,  η⁺ = k_R σ_R,
///        p̂⁺ = p̂ + R̂ K_p R̂ᵀ y,  v̂⁺ = v̂ + R̂ K_v R̂ᵀ y
/// ```
///
/// Note k_R here carries units 1/(m²·s): σ_R is an areal mismatch and η a
/// rate, so gain values are not interchangeable with the discrete-attitude
/// hybrid.
#[derive(Debug, Clone)]
pub struct ContinuousAttitudeHybrid {
    est: ExtendedPose,
    eta: Vector3<f64>,
    gains: GainSet,
    riccati: Option<RiccatiGains>,
    gravity: Vector3<f64>,
}

impl ContinuousAttitudeHybrid {
    pub fn new(
        initial: ExtendedPose,
        eta0: Vector3<f64>,
        gains: GainSet,
        gravity: Vector3<f64>,
    ) -> Self {
        ContinuousAttitudeHybrid { est: initial, eta: eta0, gains, riccati: None, gravity }
    }

    pub fn with_riccati_gains(
        initial: ExtendedPose,
        eta0: Vector3<f64>,
        kr: f64,
        riccati: RiccatiGains,
        gravity: Vector3<f64>,
    ) -> Result<Self, GeometricError> {
        let gains = GainSet::isotropic(kr, 0.0, 0.0)?;
        Ok(ContinuousAttitudeHybrid {
            est: initial,
            eta: eta0,
            gains,
            riccati: Some(riccati),
            gravity,
        })
    }

    pub fn est(&self) -> &ExtendedPose {
        &self.est
    }

    pub fn eta(&self) -> &Vector3<f64> {
        &self.eta
    }

    pub fn gains(&self) -> &GainSet {
        &self.gains
    }

    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        self.riccati.as_ref().map(|r| r.covariance())
    }

    /// IMU-driven flow over one interval; η stays constant.
    pub fn flow(
        &mut self,
        omega: &Vector3<f64>,
        accel: &Vector3<f64>,
        landmarks: &LandmarkSet,
        dt: f64,
    ) -> Result<(), GeometricError> {
        let p_c = landmarks.centroid();
        if let Some(r) = &mut self.riccati {
            let a = a_t_matrix(omega);
            let v = r.v_t(&self.est, &p_c);
            r.p = riccati_flow(&r.p, &a, &v, None, dt)?;
        }
        let eta = self.eta;
        let gravity = self.gravity;
        let rate = |r: &Matrix3<f64>, v: &Vector3<f64>, p: &Vector3<f64>| {
            let dr = r * hat3(omega) + hat3(&eta) * r;
            let dv = eta.cross(v) + gravity + r * accel;
            let dp = eta.cross(&(p - p_c)) + v;
            (dr, dv, dp)
        };
        let (r, v, p) =
            rk4_pose(self.est.rot.matrix(), &self.est.vel, &self.est.pos, dt, rate);
        self.est = ExtendedPose::new(Rotation::from_nearest(&r), v, p);
        Ok(())
    }

    /// Landmark-epoch jump: resets η, corrects p̂ and v̂, leaves R̂ exactly
    /// unchanged.
    pub fn jump(
        &mut self,
        obs: &[Vector3<f64>],
        landmarks: &LandmarkSet,
    ) -> Result<(), GeometricError> {
        let inn = innovations(&self.est, obs, landmarks)?;
        if let Some(r) = &mut self.riccati {
            let (kp, kv) = hybrid_riccati_jump(r, &self.est, landmarks)?;
            self.gains.kp = kp;
            self.gains.kv = kv;
        }
        self.eta = self.gains.kr * inn.sigma_r;
        self.est = ExtendedPose::new(
            self.est.rot,
            self.est.vel + sandwich(&self.est.rot, &self.gains.kv) * inn.y,
            self.est.pos + sandwich(&self.est.rot, &self.gains.kp) * inn.y,
        );
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Fixed-gain certification.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificationVerdict {
    /// The Lyapunov decrease condition holds strictly at every grid point.
    CertifiedOnGrid,
    Failed,
}

/// Result of [`fixed_gain_design`]: the stacked gain K = [k_p I; k_v I], the
/// Lyapunov candidate P (when the midpoint equation was solvable), the
/// per-grid-point decrease margins λ_max(A_d(τ)ᵀ P A_d(τ) − P), and the
/// overall verdict.
#[derive(Debug, Clone)]
pub struct FixedGainCertificate {
    pub k: DMatrix<f64>,
    pub p: Option<DMatrix<f64>>,
    pub verdict: CertificationVerdict,
    /// max over the grid of λ_max(A_dᵀ P A_d − P); certified iff < 0.
    pub margin: f64,
    pub grid: Vec<(f64, f64)>,
}

fn phi_tau(tau: f64) -> DMatrix<f64> {
    let mut phi = DMatrix::identity(6, 6);
    phi.view_mut((0, 3), (3, 3)).copy_from(&(Matrix3::identity() * tau));
    phi
}

/// Certifies fixed gains (k_p, k_v) for the intermittent translation-error
/// jump/flow system x⁺ = (I − KC)x, x(τ) = Φ(τ)x⁺ with unknown gaps
/// τ ∈ [T_m, T_M]:
///
/// 1. solve the discrete Lyapunov equation A_dᵀ P A_d − P = −I at the
///    midpoint gap τ* (a 36×36 linear solve), A_d(τ) = Φ(τ)(I − KC);
/// 2. check P symmetric positive definite;
/// 3. verify λ_max(A_d(τ)ᵀ P A_d(τ) − P) < 0 on a `grid_size`-point grid
///    spanning [T_m, T_M] including both endpoints.
///
/// The verdict is explicitly "on the grid": a dense numerical check, not a
/// proof over the continuum.
pub fn fixed_gain_design(
    kp: f64,
    kv: f64,
    t_m: f64,
    t_mx: f64,
    grid_size: usize,
) -> Result<FixedGainCertificate, GeometricError> {
    if !(kp.is_finite() && kv.is_finite() && kp >= 0.0 && kv >= 0.0) {
        return Err(GeometricError::BadConfig(format!(
            "gains must be finite and non-negative, got k_p = {kp}, k_v = {kv}"
        )));
    }
    if !(t_m.is_finite() && t_mx.is_finite() && t_m > 0.0 && t_m <= t_mx) {
        return Err(GeometricError::BadConfig(format!(
            "need 0 < T_m <= T_M, got [{t_m}, {t_mx}]"
        )));
    }
    if grid_size < 2 {
        return Err(GeometricError::BadConfig(format!(
            "grid needs at least 2 points, got {grid_size}"
        )));
    }

    let mut k = DMatrix::zeros(6, 3);
    k.view_mut((0, 0), (3, 3)).copy_from(&(Matrix3::identity() * kp));
    k.view_mut((3, 0), (3, 3)).copy_from(&(Matrix3::identity() * kv));
    let a_g = DMatrix::identity(6, 6) - &k * c_t_matrix();
    let a_d = |tau: f64| phi_tau(tau) * &a_g;

    let taus: Vec<f64> = (0..grid_size)
        .map(|j| t_m + (t_mx - t_m) * j as f64 / (grid_size - 1) as f64)
        .collect();

    let failed = |k: DMatrix<f64>, p, grid| FixedGainCertificate {
        k,
        p,
        verdict: CertificationVerdict::Failed,
        margin: f64::INFINITY,
        grid,
    };

    // Midpoint Lyapunov solve: vec(A_dᵀ P A_d) = (A_dᵀ ⊗ A_dᵀ) vec(P).
    let tau_star = 0.5 * (t_m + t_mx);
    let ad = a_d(tau_star);
    let adt = ad.transpose();
    let stein = adt.kronecker(&adt) - DMatrix::identity(36, 36);
    let rhs = DMatrix::from_fn(36, 1, |i, _| if i % 7 == 0 { -1.0 } else { 0.0 });
    let Some(sol) = stein.lu().solve(&rhs) else {
        return Ok(failed(k, None, Vec::new()));
    };
    let mut p = DMatrix::from_column_slice(6, 6, sol.as_slice());
    symmetrize(&mut p);
    // Guard against a numerically "solved" singular system.
    let residual = (&adt * &p * &ad - &p + DMatrix::identity(6, 6)).norm();
    if residual > 1e-6 * p.norm().max(1.0) || !crate::riccati::is_positive_definite(&p) {
        return Ok(failed(k, Some(p), Vec::new()));
    }

    let mut grid = Vec::with_capacity(grid_size);
    let mut margin = f64::NEG_INFINITY;
    for &tau in &taus {
        let ad = a_d(tau);
        let mut decrease = ad.transpose() * &p * &ad - &p;
        symmetrize(&mut decrease);
        let lam = decrease.symmetric_eigen().eigenvalues.iter().fold(f64::MIN, |a, &b| a.max(b));
        margin = margin.max(lam);
        grid.push((tau, lam));
    }
    let verdict = if margin < 0.0 {
        CertificationVerdict::CertifiedOnGrid
    } else {
        CertificationVerdict::Failed
    };
    Ok(FixedGainCertificate { k, p: Some(p), verdict, margin, grid })
}

// ---------------------------------------------------------------------------

/// Geometric estimation errors (R̃, ṽ, p̃) with
/// R̃ = R R̂ᵀ, ṽ = v − R̃ v̂, p̃ = p − R̃ p̂ − (I − R̃) p_c.
pub fn geometric_errors(
    truth: &ExtendedPose,
    est: &ExtendedPose,
    p_c: &Vector3<f64>,
) -> (Rotation, Vector3<f64>, Vector3<f64>) {
    let r_tilde = truth.rot * est.rot.transpose();
    let v_tilde = truth.vel - r_tilde * est.vel;
    let p_tilde = truth.pos - r_tilde * est.pos - (p_c - r_tilde * *p_c);
    (r_tilde, v_tilde, p_tilde)
}
