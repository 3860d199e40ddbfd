//! Deterministic scenario simulation: analytic reference trajectories, IMU
//! and landmark measurement streams, and CSV import/export of the resulting
//! logs.
//!
//! Trajectory profiles are defined analytically, so ground truth carries no
//! integration drift: `run_scenario` evaluates the closed-form state at every
//! IMU epoch and derives the exact body rates (ω, a) symbolically. The
//! geometric integrator [`integrate_true`] exists for user-defined profiles
//! and for observer-side propagation of measured inputs.
//!
//! An IMU sample stamped t_j is treated as the zero-order-hold input over
//! [t_j, t_{j+1}). Landmark observations are generated at every IMU epoch;
//! the subset of epochs listed in [`SimLog::scheduled`] is what the
//! intermittent observers consume, while the continuous observer uses the
//! dense stream.

use crate::lie::{exp_so3, ExtendedPose, Rotation};
use crate::world::{
    measure_imu, measure_landmarks, propagate_pose, ImuSample, LandmarkObservation, LandmarkSet,
    NoiseSampler, NoiseSpec, TrueState, WorldError, DEFAULT_GRAVITY,
};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid landmark schedule: {0}")]
    InvalidSchedule(String),
    #[error("unknown trajectory profile `{0}` (expected static, circle or figure8)")]
    UnknownProfile(String),
    #[error("bad trajectory parameters: {0}")]
    BadProfile(String),
    #[error("log validation failed: {0}")]
    BadLog(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Closed-form reference trajectories. All expose the exact state and the
/// exact body-frame inputs (ω, a) at any time.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryProfile {
    /// Hover at a fixed position with identity attitude.
    Static { position: Vector3<f64> },
    /// Horizontal circle of given radius at constant angular rate, constant
    /// altitude, yaw tracking the velocity direction.
    Circle { radius: f64, rate: f64, altitude: f64 },
    /// Lissajous figure-eight x = A sin(Ωt), y = B sin(2Ωt) at constant
    /// altitude, yaw tracking the velocity direction.
    Figure8 { amp_x: f64, amp_y: f64, rate: f64, altitude: f64 },
}

fn yaw_rotation(psi: f64) -> Rotation {
    exp_so3(&Vector3::new(0.0, 0.0, psi))
}

impl TrajectoryProfile {
    /// Builds a profile from a name and a flat parameter map (used by config
    /// parsing). Unknown names and unknown or degenerate parameters are
    /// rejected.
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self, ScenarioError> {
        let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        let allow = |allowed: &[&str]| -> Result<(), ScenarioError> {
            for key in params.keys() {
                if !allowed.contains(&key.as_str()) {
                    return Err(ScenarioError::BadProfile(format!(
                        "unknown parameter `{key}` for profile `{name}`"
                    )));
                }
            }
            Ok(())
        };
        let profile = match name {
            "static" => {
                allow(&["x", "y", "z"])?;
                TrajectoryProfile::Static {
                    position: Vector3::new(get("x", 0.0), get("y", 0.0), get("z", 0.0)),
                }
            }
            "circle" => {
                allow(&["radius", "rate", "altitude"])?;
                TrajectoryProfile::Circle {
                    radius: get("radius", 5.0),
                    rate: get("rate", 0.2),
                    altitude: get("altitude", 0.0),
                }
            }
            "figure8" => {
                allow(&["amp_x", "amp_y", "rate", "altitude"])?;
                TrajectoryProfile::Figure8 {
                    amp_x: get("amp_x", 6.0),
                    amp_y: get("amp_y", 3.0),
                    rate: get("rate", 0.2),
                    altitude: get("altitude", 0.0),
                }
            }
            other => return Err(ScenarioError::UnknownProfile(other.to_string())),
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        match self {
            TrajectoryProfile::Static { .. } => Ok(()),
            TrajectoryProfile::Circle { radius, .. } => {
                if *radius < 0.0 || !radius.is_finite() {
                    return Err(ScenarioError::BadProfile(format!(
                        "circle radius must be finite and non-negative, got {radius}"
                    )));
                }
                Ok(())
            }
            TrajectoryProfile::Figure8 { amp_x, amp_y, rate, .. } => {
                // Yaw tracks the velocity direction, so the planar speed must
                // never vanish; that requires both amplitudes and the rate to
                // be nonzero.
                if !(*amp_x > 0.0 && *amp_y > 0.0 && *rate > 0.0) {
                    return Err(ScenarioError::BadProfile(format!(
                        "figure8 needs amp_x > 0, amp_y > 0 and rate > 0 (got {amp_x}, {amp_y}, {rate})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Exact state at time `t`.
    pub fn state_at(&self, t: f64) -> ExtendedPose {
        match *self {
            TrajectoryProfile::Static { position } => {
                ExtendedPose::new(Rotation::identity(), Vector3::zeros(), position)
            }
            TrajectoryProfile::Circle { radius, rate, altitude } => {
                let (s, c) = (rate * t).sin_cos();
                let pos = Vector3::new(radius * c, radius * s, altitude);
                let vel = Vector3::new(-radius * rate * s, radius * rate * c, 0.0);
                let rot = yaw_rotation(rate * t + std::f64::consts::FRAC_PI_2);
                ExtendedPose::new(rot, vel, pos)
            }
            TrajectoryProfile::Figure8 { amp_x, amp_y, rate, altitude } => {
                let (s1, c1) = (rate * t).sin_cos();
                let (s2, c2) = (2.0 * rate * t).sin_cos();
                let pos = Vector3::new(amp_x * s1, amp_y * s2, altitude);
                let vel = Vector3::new(amp_x * rate * c1, 2.0 * amp_y * rate * c2, 0.0);
                let rot = yaw_rotation(vel.y.atan2(vel.x));
                ExtendedPose::new(rot, vel, pos)
            }
        }
    }

    /// Exact body-frame inputs (ω, a) at time `t`: ω = (RᵀṘ)∨ and
    /// a = Rᵀ(v̇ − g), both derived symbolically from the profile.
    pub fn inputs_at(&self, t: f64, gravity: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
        match *self {
            TrajectoryProfile::Static { .. } => {
                let rot = Rotation::identity();
                (Vector3::zeros(), rot.transpose() * -gravity)
            }
            TrajectoryProfile::Circle { radius, rate, altitude: _ } => {
                let (s, c) = (rate * t).sin_cos();
                let acc = Vector3::new(-radius * rate * rate * c, -radius * rate * rate * s, 0.0);
                let rot = yaw_rotation(rate * t + std::f64::consts::FRAC_PI_2);
                (Vector3::new(0.0, 0.0, rate), rot.transpose() * (acc - gravity))
            }
            TrajectoryProfile::Figure8 { amp_x, amp_y, rate, altitude: _ } => {
                let (s1, c1) = (rate * t).sin_cos();
                let (s2, c2) = (2.0 * rate * t).sin_cos();
                let vel = Vector3::new(amp_x * rate * c1, 2.0 * amp_y * rate * c2, 0.0);
                let acc =
                    Vector3::new(-amp_x * rate * rate * s1, -4.0 * amp_y * rate * rate * s2, 0.0);
                let speed2 = vel.x * vel.x + vel.y * vel.y;
                let yaw_rate = (vel.x * acc.y - vel.y * acc.x) / speed2;
                let rot = yaw_rotation(vel.y.atan2(vel.x));
                (Vector3::new(0.0, 0.0, yaw_rate), rot.transpose() * (acc - gravity))
            }
        }
    }
}

/// Landmark measurement cadence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LandmarkSchedule {
    /// Regular epochs at the given rate.
    FixedRate { rate: f64 },
    /// Epoch gaps drawn uniformly (in whole IMU steps) from
    /// [min_gap, max_gap].
    Jittered { min_gap: f64, max_gap: f64 },
}

impl LandmarkSchedule {
    /// Guaranteed gap bounds (T_m, T_M) in seconds.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            LandmarkSchedule::FixedRate { rate } => (1.0 / rate, 1.0 / rate),
            LandmarkSchedule::Jittered { min_gap, max_gap } => (min_gap, max_gap),
        }
    }

    // Gap bounds in whole IMU steps.
    fn step_bounds(&self, imu_rate: f64) -> Result<(usize, usize), ScenarioError> {
        let (t_m, t_mx) = self.bounds();
        if !(t_m.is_finite() && t_mx.is_finite() && t_m > 0.0 && t_m <= t_mx) {
            return Err(ScenarioError::InvalidSchedule(format!(
                "need 0 < T_m <= T_M, got T_m = {t_m}, T_M = {t_mx}"
            )));
        }
        if imu_rate * t_m < 2.0 {
            return Err(ScenarioError::InvalidSchedule(format!(
                "IMU must tick at least twice per minimum gap (imu_rate*T_m = {})",
                imu_rate * t_m
            )));
        }
        let lo = (t_m * imu_rate - 1e-9).ceil() as usize;
        let hi = (t_mx * imu_rate + 1e-9).floor() as usize;
        if lo > hi {
            return Err(ScenarioError::InvalidSchedule(format!(
                "no whole IMU step count lies in [{t_m}, {t_mx}] s at {imu_rate} Hz"
            )));
        }
        Ok((lo.max(1), hi))
    }
}

/// Full simulation recipe. `seed` drives every random draw (schedule jitter
/// and measurement noise) through independent, documented ChaCha streams, so
/// equal scenarios reproduce equal logs bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub duration: f64,
    pub imu_rate: f64,
    pub trajectory: TrajectoryProfile,
    pub schedule: LandmarkSchedule,
    pub landmarks: LandmarkSet,
    pub noise: NoiseSpec,
    pub gravity: Vector3<f64>,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(ScenarioError::InvalidScenario(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.imu_rate.is_finite() && self.imu_rate > 0.0) {
            return Err(ScenarioError::InvalidScenario(format!(
                "imu_rate must be positive, got {}",
                self.imu_rate
            )));
        }
        self.trajectory.validate()?;
        self.schedule.step_bounds(self.imu_rate)?;
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.imu_rate
    }

    /// Regular tetrahedron of edge 10 m centered at the origin.
    pub fn default_landmarks() -> LandmarkSet {
        let s = 10.0 / (2.0 * 2.0_f64.sqrt());
        LandmarkSet::with_equal_weights(vec![
            Vector3::new(s, s, s),
            Vector3::new(s, -s, -s),
            Vector3::new(-s, s, -s),
            Vector3::new(-s, -s, s),
        ])
        .expect("tetrahedron landmarks are valid")
    }

    /// Benchmark default: 5 m circle at 0.2 rad/s, 200 Hz IMU, 10 Hz
    /// landmarks on the default tetrahedron, noise-free.
    pub fn default_circle(seed: u64) -> Scenario {
        Scenario {
            duration: 30.0,
            imu_rate: 200.0,
            trajectory: TrajectoryProfile::Circle { radius: 5.0, rate: 0.2, altitude: 0.0 },
            schedule: LandmarkSchedule::FixedRate { rate: 10.0 },
            landmarks: Scenario::default_landmarks(),
            noise: NoiseSpec::noise_free(),
            gravity: DEFAULT_GRAVITY,
            seed,
        }
    }
}

/// Simulated data: ground truth, IMU stream and landmark observations at
/// every IMU epoch, plus the scheduled subset of epochs the intermittent
/// observers consume.
#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub truth: Vec<TrueState>,
    pub imu: Vec<ImuSample>,
    pub observations: Vec<LandmarkObservation>,
    pub scheduled: Vec<usize>,
}

impl SimLog {
    pub fn epochs(&self) -> usize {
        self.truth.len()
    }

    /// Structural checks: matching stream lengths, strictly increasing
    /// timestamps, scheduled indices sorted/distinct/in range, and scheduled
    /// gaps within the scenario bounds when a scenario is given.
    pub fn validate(&self, scenario: Option<&Scenario>) -> Result<(), ScenarioError> {
        let n = self.truth.len();
        if self.imu.len() != n || self.observations.len() != n {
            return Err(ScenarioError::BadLog(format!(
                "stream lengths differ: truth {}, imu {}, observations {}",
                n,
                self.imu.len(),
                self.observations.len()
            )));
        }
        for w in self.truth.windows(2) {
            if w[1].t <= w[0].t {
                return Err(ScenarioError::BadLog(format!(
                    "timestamps not strictly increasing at t = {}",
                    w[1].t
                )));
            }
        }
        for w in self.scheduled.windows(2) {
            if w[1] <= w[0] {
                return Err(ScenarioError::BadLog("scheduled epochs not strictly increasing".into()));
            }
        }
        if let Some(&last) = self.scheduled.last() {
            if last >= n {
                return Err(ScenarioError::BadLog(format!(
                    "scheduled epoch {last} out of range ({n} epochs)"
                )));
            }
        }
        if let Some(sc) = scenario {
            let (lo, hi) = sc.schedule.step_bounds(sc.imu_rate)?;
            let mut prev = 0usize;
            for &k in &self.scheduled {
                let gap = k - prev;
                if gap < lo || gap > hi {
                    return Err(ScenarioError::BadLog(format!(
                        "scheduled gap of {gap} IMU steps outside [{lo}, {hi}]"
                    )));
                }
                prev = k;
            }
        }
        Ok(())
    }
}

/// One step of the midpoint geometric integrator ([`propagate_pose`]) with
/// the timestamp advanced alongside the state. Useful for user-defined
/// profiles where no closed-form state is available.
pub fn integrate_true(
    state: &TrueState,
    omega: &Vector3<f64>,
    accel: &Vector3<f64>,
    gravity: &Vector3<f64>,
    dt: f64,
) -> TrueState {
    TrueState { t: state.t + dt, pose: propagate_pose(&state.pose, omega, accel, gravity, dt) }
}

/// Simulates the scenario: truth, IMU and landmark streams at every IMU
/// epoch (inclusive endpoints) plus the scheduled landmark epochs.
pub fn run_scenario(scenario: &Scenario) -> Result<SimLog, ScenarioError> {
    scenario.validate()?;
    let dt = scenario.dt();
    let n = (scenario.duration * scenario.imu_rate).round() as usize;

    let stream_rng = |stream: u64| {
        let mut rng = ChaCha12Rng::seed_from_u64(scenario.seed);
        rng.set_stream(stream);
        rng
    };
    let mut r_sched = stream_rng(1);
    let mut r_imu = stream_rng(2);
    let mut r_lm = stream_rng(3);

    let (lo, hi) = scenario.schedule.step_bounds(scenario.imu_rate)?;
    let mut scheduled = Vec::new();
    let mut idx = 0usize;
    loop {
        let gap = if lo == hi { lo } else { r_sched.random_range(lo..=hi) };
        idx += gap;
        if idx > n {
            break;
        }
        scheduled.push(idx);
    }

    let sampler = NoiseSampler::new(&scenario.noise);
    let mut truth = Vec::with_capacity(n + 1);
    let mut imu = Vec::with_capacity(n + 1);
    let mut observations = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let t = j as f64 * dt;
        let pose = scenario.trajectory.state_at(t);
        let (omega, accel) = scenario.trajectory.inputs_at(t, &scenario.gravity);
        truth.push(TrueState { t, pose });
        imu.push(measure_imu(t, &omega, &accel, &sampler, &mut r_imu));
        observations.push(measure_landmarks(t, &pose, &scenario.landmarks, &sampler, &mut r_lm));
    }

    let log = SimLog { truth, imu, observations, scheduled };
    log.validate(Some(scenario))?;
    Ok(log)
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Writes the truth + IMU stream (one row per epoch: t, R row-major, v, p,
/// ω_m, a_m) and the landmark stream (one row per epoch and landmark:
/// epoch, t, landmark, scheduled flag, y) as RFC-4180 CSV.
pub fn export_simlog(
    log: &SimLog,
    truth_imu_path: &Path,
    landmarks_path: &Path,
) -> Result<(), ScenarioError> {
    log.validate(None)?;
    let mut w = csv::Writer::from_path(truth_imu_path)?;
    w.write_record([
        "t", "r00", "r01", "r02", "r10", "r11", "r12", "r20", "r21", "r22", "vx", "vy", "vz",
        "px", "py", "pz", "wx", "wy", "wz", "ax", "ay", "az",
    ])?;
    for (state, sample) in log.truth.iter().zip(&log.imu) {
        let r = state.pose.rot.matrix();
        let mut rec = vec![fmt(state.t)];
        for i in 0..3 {
            for j in 0..3 {
                rec.push(fmt(r[(i, j)]));
            }
        }
        for v in [&state.pose.vel, &state.pose.pos, &sample.gyro, &sample.accel] {
            rec.extend(v.iter().map(|x| fmt(*x)));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(landmarks_path)?;
    w.write_record(["epoch", "t", "landmark", "scheduled", "yx", "yy", "yz"])?;
    let mut sched = log.scheduled.iter().peekable();
    for (k, obs) in log.observations.iter().enumerate() {
        let is_sched = match sched.peek() {
            Some(&&s) if s == k => {
                sched.next();
                true
            }
            _ => false,
        };
        for (i, y) in obs.body.iter().enumerate() {
            w.write_record([
                k.to_string(),
                fmt(obs.t),
                i.to_string(),
                (is_sched as u8).to_string(),
                fmt(y.x),
                fmt(y.y),
                fmt(y.z),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(field: &str, what: &str) -> Result<f64, ScenarioError> {
    field
        .parse::<f64>()
        .map_err(|_| ScenarioError::BadLog(format!("cannot parse {what} from `{field}`")))
}

/// Reads back a log written by [`export_simlog`].
pub fn import_simlog(truth_imu_path: &Path, landmarks_path: &Path) -> Result<SimLog, ScenarioError> {
    let mut truth = Vec::new();
    let mut imu = Vec::new();
    let mut reader = csv::Reader::from_path(truth_imu_path)?;
    for row in reader.records() {
        let row = row?;
        if row.len() != 22 {
            return Err(ScenarioError::BadLog(format!(
                "truth/IMU row has {} fields, expected 22",
                row.len()
            )));
        }
        let g = |i: usize| parse_f64(&row[i], "truth/IMU field");
        let t = g(0)?;
        let mut m = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = g(1 + 3 * i + j)?;
            }
        }
        let rot = Rotation::from_matrix(m)
            .map_err(|e| ScenarioError::BadLog(format!("bad rotation at t = {t}: {e}")))?;
        let vel = Vector3::new(g(10)?, g(11)?, g(12)?);
        let pos = Vector3::new(g(13)?, g(14)?, g(15)?);
        truth.push(TrueState { t, pose: ExtendedPose::new(rot, vel, pos) });
        imu.push(ImuSample {
            t,
            gyro: Vector3::new(g(16)?, g(17)?, g(18)?),
            accel: Vector3::new(g(19)?, g(20)?, g(21)?),
        });
    }

    let mut observations: Vec<LandmarkObservation> = Vec::new();
    let mut scheduled = Vec::new();
    let mut reader = csv::Reader::from_path(landmarks_path)?;
    for row in reader.records() {
        let row = row?;
        if row.len() != 7 {
            return Err(ScenarioError::BadLog(format!(
                "landmark row has {} fields, expected 7",
                row.len()
            )));
        }
        let epoch: usize = row[0]
            .parse()
            .map_err(|_| ScenarioError::BadLog(format!("cannot parse epoch `{}`", &row[0])))?;
        let t = parse_f64(&row[1], "landmark timestamp")?;
        let landmark: usize = row[2]
            .parse()
            .map_err(|_| ScenarioError::BadLog(format!("cannot parse landmark id `{}`", &row[2])))?;
        let flagged = &row[3] == "1";
        let y = Vector3::new(
            parse_f64(&row[4], "landmark measurement")?,
            parse_f64(&row[5], "landmark measurement")?,
            parse_f64(&row[6], "landmark measurement")?,
        );
        if epoch == observations.len() && landmark == 0 {
            observations.push(LandmarkObservation { t, body: Vec::new() });
            if flagged {
                scheduled.push(epoch);
            }
        }
        let n_epochs = observations.len();
        let current = observations.last_mut().ok_or_else(|| {
            ScenarioError::BadLog("landmark rows do not start at epoch 0, landmark 0".into())
        })?;
        if epoch + 1 != n_epochs || landmark != current.body.len() {
            return Err(ScenarioError::BadLog(format!(
                "landmark rows out of order at epoch {epoch}, landmark {landmark}"
            )));
        }
        current.body.push(y);
    }

    let log = SimLog { truth, imu, observations, scheduled };
    log.validate(None)?;
    Ok(log)
}
