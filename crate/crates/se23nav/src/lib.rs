//! State estimation for inertial navigation on the extended pose group SE₂(3).
//!
//! The crate bundles five observers that fuse IMU readings (angular velocity,
//! specific force) with body-frame landmark position measurements:
//!
//! * a multiplicative extended Kalman filter ([`kalman::Mekf`]),
//! * an invariant extended Kalman filter ([`kalman::Iekf`]),
//! * a continuous geometric observer ([`geometric::ContinuousObserver`]),
//! * two hybrid observers for intermittent landmark measurements, one with a
//!   discrete attitude correction ([`geometric::DiscreteAttitudeHybrid`]) and
//!   one with a continuous attitude correction driven by a piecewise-constant
//!   auxiliary rate ([`geometric::ContinuousAttitudeHybrid`]).
//!
//! Supporting layers: [`lie`] (SO(3)/SE₂(3) kernel), [`world`] (rigid-body
//! kinematics, sensor models, landmark constellations), [`scenario`]
//! (deterministic trajectory/measurement simulation), [`riccati`] (covariance
//! propagation and gain computation), and [`bench`] (error metrics, experiment
//! runner and the file formats behind the `se23nav` CLI).

pub mod bench;
pub mod geometric;
pub mod kalman;
pub mod lie;
pub mod riccati;
pub mod scenario;
pub mod world;

pub use lie::{ExtendedPose, GainSet, Rotation, Tangent9};
pub use world::{ImuSample, LandmarkObservation, LandmarkSet, NoiseSpec, TrueState};
