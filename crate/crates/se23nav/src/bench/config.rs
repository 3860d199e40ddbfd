//! Experiment configuration: a single TOML file with sections `[scenario]`,
//! `[landmarks]`, `[noise]`, `[observers]` and `[output]`, every key
//! optional. The full schema:
//!
//! ```toml
//! [scenario]
//! duration = 30.0          # simulated seconds
//! imu_rate = 200.0         # IMU epochs per second
//! profile = "circle"       # "static" | "circle" | "figure8"
//! seed = 42                # base RNG seed
//! runs = 1                 # Monte-Carlo repetitions
//! seed_stride = 1000       # run r simulates with seed + r*seed_stride
//! gravity = [0.0, 0.0, -9.81]
//!
//! [scenario.params]        # numeric profile parameters (profile-specific)
//! radius = 5.0             # circle: radius, rate, altitude
//! rate = 0.2               # figure8: amp_x, amp_y, rate, altitude
//!                          # static: x, y, z
//! [scenario.schedule]
//! kind = "fixed-rate"      # "fixed-rate" | "jittered"
//! rate = 10.0              # fixed-rate: landmark epochs per second
//! # min_gap = 0.05         # jittered: gap bounds in seconds
//! # max_gap = 0.2
//!
//! [landmarks]              # default: regular tetrahedron, edge 10 m
//! positions = [[1.0, 0.0, 0.0], ...]
//! weights = [0.25, ...]    # optional, must sum to 1; default equal
//!
//! [noise]                  # true sensor noise (standard deviations)
//! gyro_std = 0.0           # rad/s
//! accel_std = 0.0          # m/s^2
//! landmark_std = 0.0       # m
//!
//! [observers]
//! run = ["mekf", "iekf", "continuous", "hybrid-discrete", "hybrid-continuous"]
//!                          # append "-riccati" to a geometric observer name
//!                          # for its Riccati-scheduled variant
//! kp = 1.0                 # optional; default depends on the observer
//! kv = 3.0                 # (continuous: 2/2, hybrids: 1/3)
//! kr = 0.04                # optional; default from the constellation
//! eta0 = [0.0, 0.0, 0.0]   # continuous-attitude hybrid initial eta
//! model_gyro_std = 1e-3    # internal noise model (filters + Riccati)
//! model_accel_std = 1e-2
//! model_landmark_std = 1e-2
//! init_att_err_deg = 10.0  # initial estimate offset magnitudes
//! init_pos_err = 1.0       # (directions drawn per run from the seed)
//! init_vel_err = 1.0
//! grid_size = 101          # gain certification grid
//!
//! [output]
//! dir = "out"
//! prefix = ""              # prepended to every file name
//! write_series = true      # per-run per-observer time-series CSVs
//! # threshold_att_deg = 2.0   # optional pass/fail limits on the
//! # threshold_pos = 0.5       # aggregated steady-state RMSE
//! # threshold_vel = 0.5
//! ```

use super::BenchError;
use crate::scenario::{LandmarkSchedule, Scenario, TrajectoryProfile};
use crate::world::{LandmarkSet, NoiseSpec, DEFAULT_GRAVITY};
use nalgebra::Vector3;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObserverKind {
    Mekf,
    Iekf,
    Continuous,
    HybridDiscrete,
    HybridContinuous,
}

/// One observer selection: the estimator family plus whether its
/// translational gains come from a Riccati equation instead of fixed values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ObserverSpec {
    pub kind: ObserverKind,
    pub riccati: bool,
}

impl ObserverSpec {
    pub fn parse(name: &str) -> Result<Self, BenchError> {
        let (base, riccati) = match name.strip_suffix("-riccati") {
            Some(base) => (base, true),
            None => (name, false),
        };
        let kind = match base {
            "mekf" => ObserverKind::Mekf,
            "iekf" => ObserverKind::Iekf,
            "continuous" => ObserverKind::Continuous,
            "hybrid-discrete" => ObserverKind::HybridDiscrete,
            "hybrid-continuous" => ObserverKind::HybridContinuous,
            other => {
                return Err(BenchError::Config(format!(
                    "unknown observer `{other}` (expected mekf, iekf, continuous, \
                     hybrid-discrete or hybrid-continuous, optionally with -riccati)"
                )))
            }
        };
        if riccati && matches!(kind, ObserverKind::Mekf | ObserverKind::Iekf) {
            return Err(BenchError::Config(format!(
                "`{name}`: the Kalman filters schedule their own gains; -riccati \
                 applies only to the geometric observers"
            )));
        }
        Ok(ObserverSpec { kind, riccati })
    }

    /// Canonical name, as accepted by [`ObserverSpec::parse`].
    pub fn name(&self) -> String {
        let base = match self.kind {
            ObserverKind::Mekf => "mekf",
            ObserverKind::Iekf => "iekf",
            ObserverKind::Continuous => "continuous",
            ObserverKind::HybridDiscrete => "hybrid-discrete",
            ObserverKind::HybridContinuous => "hybrid-continuous",
        };
        if self.riccati {
            format!("{base}-riccati")
        } else {
            base.to_string()
        }
    }

    /// Name with `-` replaced by `_`, for file stems.
    pub fn file_stem(&self) -> String {
        self.name().replace('-', "_")
    }
}

fn default_duration() -> f64 {
    30.0
}
fn default_imu_rate() -> f64 {
    200.0
}
fn default_profile() -> String {
    "circle".into()
}
fn default_seed() -> u64 {
    42
}
fn default_runs() -> usize {
    1
}
fn default_seed_stride() -> u64 {
    1000
}
fn default_gravity() -> [f64; 3] {
    [DEFAULT_GRAVITY.x, DEFAULT_GRAVITY.y, DEFAULT_GRAVITY.z]
}
fn default_schedule_kind() -> String {
    "fixed-rate".into()
}
fn default_landmark_rate() -> f64 {
    10.0
}
fn default_observer_list() -> Vec<String> {
    ["mekf", "iekf", "continuous", "hybrid-discrete", "hybrid-continuous"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}
fn default_eta0() -> [f64; 3] {
    [0.0; 3]
}
fn default_model_gyro() -> f64 {
    1e-3
}
fn default_model_accel() -> f64 {
    1e-2
}
fn default_model_landmark() -> f64 {
    1e-2
}
fn default_init_att() -> f64 {
    10.0
}
fn default_init_pos() -> f64 {
    1.0
}
fn default_init_vel() -> f64 {
    1.0
}
fn default_grid_size() -> usize {
    101
}
fn default_out_dir() -> String {
    "out".into()
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(default = "default_schedule_kind")]
    pub kind: String,
    #[serde(default = "default_landmark_rate")]
    pub rate: f64,
    #[serde(default)]
    pub min_gap: Option<f64>,
    #[serde(default)]
    pub max_gap: Option<f64>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            kind: default_schedule_kind(),
            rate: default_landmark_rate(),
            min_gap: None,
            max_gap: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_imu_rate")]
    pub imu_rate: f64,
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_seed_stride")]
    pub seed_stride: u64,
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            duration: default_duration(),
            imu_rate: default_imu_rate(),
            profile: default_profile(),
            params: BTreeMap::new(),
            schedule: ScheduleSection::default(),
            seed: default_seed(),
            runs: default_runs(),
            seed_stride: default_seed_stride(),
            gravity: default_gravity(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarksSection {
    #[serde(default)]
    pub positions: Option<Vec<[f64; 3]>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub gyro_std: f64,
    #[serde(default)]
    pub accel_std: f64,
    #[serde(default)]
    pub landmark_std: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserversSection {
    #[serde(default = "default_observer_list")]
    pub run: Vec<String>,
    #[serde(default)]
    pub kp: Option<f64>,
    #[serde(default)]
    pub kv: Option<f64>,
    #[serde(default)]
    pub kr: Option<f64>,
    #[serde(default = "default_eta0")]
    pub eta0: [f64; 3],
    #[serde(default = "default_model_gyro")]
    pub model_gyro_std: f64,
    #[serde(default = "default_model_accel")]
    pub model_accel_std: f64,
    #[serde(default = "default_model_landmark")]
    pub model_landmark_std: f64,
    #[serde(default = "default_init_att")]
    pub init_att_err_deg: f64,
    #[serde(default = "default_init_pos")]
    pub init_pos_err: f64,
    #[serde(default = "default_init_vel")]
    pub init_vel_err: f64,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
}

impl Default for ObserversSection {
    fn default() -> Self {
        ObserversSection {
            run: default_observer_list(),
            kp: None,
            kv: None,
            kr: None,
            eta0: default_eta0(),
            model_gyro_std: default_model_gyro(),
            model_accel_std: default_model_accel(),
            model_landmark_std: default_model_landmark(),
            init_att_err_deg: default_init_att(),
            init_pos_err: default_init_pos(),
            init_vel_err: default_init_vel(),
            grid_size: default_grid_size(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default)]
    pub prefix: String,
    #[serde(default = "default_true")]
    pub write_series: bool,
    #[serde(default)]
    pub threshold_att_deg: Option<f64>,
    #[serde(default)]
    pub threshold_pos: Option<f64>,
    #[serde(default)]
    pub threshold_vel: Option<f64>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_out_dir(),
            prefix: String::new(),
            write_series: true,
            threshold_att_deg: None,
            threshold_pos: None,
            threshold_vel: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub landmarks: LandmarksSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub observers: ObserversSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_str(text: &str) -> Result<Self, BenchError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            BenchError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        ExperimentConfig::from_str(&text)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.scenario.runs == 0 {
            return Err(BenchError::Config("scenario.runs must be at least 1".into()));
        }
        if self.scenario.seed_stride == 0 {
            return Err(BenchError::Config("scenario.seed_stride must be nonzero".into()));
        }
        if self.observers.run.is_empty() {
            return Err(BenchError::Config("observers.run must select at least one observer".into()));
        }
        let specs = self.observer_specs()?;
        for (i, a) in specs.iter().enumerate() {
            if specs[..i].contains(a) {
                return Err(BenchError::Config(format!(
                    "observer `{}` listed twice",
                    a.name()
                )));
            }
        }
        for (key, value) in [
            ("kp", self.observers.kp),
            ("kv", self.observers.kv),
            ("kr", self.observers.kr),
        ] {
            if let Some(v) = value {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(BenchError::Config(format!(
                        "observers.{key} must be finite and non-negative, got {v}"
                    )));
                }
            }
        }
        for (key, v) in [
            ("model_gyro_std", self.observers.model_gyro_std),
            ("model_accel_std", self.observers.model_accel_std),
            ("model_landmark_std", self.observers.model_landmark_std),
            ("init_att_err_deg", self.observers.init_att_err_deg),
            ("init_pos_err", self.observers.init_pos_err),
            ("init_vel_err", self.observers.init_vel_err),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(BenchError::Config(format!(
                    "observers.{key} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.observers.model_landmark_std <= 0.0 {
            return Err(BenchError::Config(
                "observers.model_landmark_std must be positive (the filters and \
                 Riccati schedules invert it)"
                    .into(),
            ));
        }
        if self.observers.grid_size < 2 {
            return Err(BenchError::Config("observers.grid_size must be at least 2".into()));
        }
        for (key, value) in [
            ("threshold_att_deg", self.output.threshold_att_deg),
            ("threshold_pos", self.output.threshold_pos),
            ("threshold_vel", self.output.threshold_vel),
        ] {
            if let Some(v) = value {
                if !(v.is_finite() && v > 0.0) {
                    return Err(BenchError::Config(format!(
                        "output.{key} must be finite and positive, got {v}"
                    )));
                }
            }
        }
        // Build the full scenario once so every cross-field constraint
        // (profile parameters, schedule bounds, landmark geometry, noise)
        // is checked at parse time rather than mid-run.
        self.scenario(self.scenario.seed)?;
        Ok(())
    }

    pub fn observer_specs(&self) -> Result<Vec<ObserverSpec>, BenchError> {
        self.observers.run.iter().map(|name| ObserverSpec::parse(name)).collect()
    }

    pub fn landmark_set(&self) -> Result<LandmarkSet, BenchError> {
        match &self.landmarks.positions {
            None => {
                if self.landmarks.weights.is_some() {
                    return Err(BenchError::Config(
                        "landmarks.weights given without landmarks.positions".into(),
                    ));
                }
                Ok(Scenario::default_landmarks())
            }
            Some(positions) => {
                let positions: Vec<Vector3<f64>> =
                    positions.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect();
                let set = match &self.landmarks.weights {
                    Some(w) => LandmarkSet::new(positions, w.clone()),
                    None => LandmarkSet::with_equal_weights(positions),
                };
                set.map_err(|e| BenchError::Config(e.to_string()))
            }
        }
    }

    pub fn schedule(&self) -> Result<LandmarkSchedule, BenchError> {
        match self.scenario.schedule.kind.as_str() {
            "fixed-rate" => {
                if self.scenario.schedule.min_gap.is_some()
                    || self.scenario.schedule.max_gap.is_some()
                {
                    return Err(BenchError::Config(
                        "min_gap/max_gap apply only to the jittered schedule".into(),
                    ));
                }
                Ok(LandmarkSchedule::FixedRate { rate: self.scenario.schedule.rate })
            }
            "jittered" => {
                let (Some(min_gap), Some(max_gap)) =
                    (self.scenario.schedule.min_gap, self.scenario.schedule.max_gap)
                else {
                    return Err(BenchError::Config(
                        "jittered schedule needs both min_gap and max_gap".into(),
                    ));
                };
                Ok(LandmarkSchedule::Jittered { min_gap, max_gap })
            }
            other => Err(BenchError::Config(format!(
                "unknown schedule kind `{other}` (expected fixed-rate or jittered)"
            ))),
        }
    }

    /// Materializes the simulator scenario for one Monte-Carlo run.
    pub fn scenario(&self, seed: u64) -> Result<Scenario, BenchError> {
        let trajectory = TrajectoryProfile::from_name(&self.scenario.profile, &self.scenario.params)
            .map_err(|e| BenchError::Config(e.to_string()))?;
        let noise = NoiseSpec::isotropic(
            self.noise.gyro_std,
            self.noise.accel_std,
            self.noise.landmark_std,
        )
        .map_err(|e| BenchError::Config(e.to_string()))?;
        let g = self.scenario.gravity;
        let sc = Scenario {
            duration: self.scenario.duration,
            imu_rate: self.scenario.imu_rate,
            trajectory,
            schedule: self.schedule()?,
            landmarks: self.landmark_set()?,
            noise,
            gravity: Vector3::new(g[0], g[1], g[2]),
            seed,
        };
        sc.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(sc)
    }

    /// Seed for Monte-Carlo run `r`.
    pub fn run_seed(&self, run: usize) -> u64 {
        self.scenario.seed.wrapping_add(self.scenario.seed_stride.wrapping_mul(run as u64))
    }

    /// Internal noise model used by the filters and the Riccati schedules.
    pub fn model_noise(&self) -> Result<NoiseSpec, BenchError> {
        NoiseSpec::isotropic(
            self.observers.model_gyro_std,
            self.observers.model_accel_std,
            self.observers.model_landmark_std,
        )
        .map_err(|e| BenchError::Config(e.to_string()))
    }
}
