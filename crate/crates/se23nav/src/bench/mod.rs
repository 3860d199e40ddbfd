//! Declarative experiment harness: config parsing, observer drivers, error
//! metrics and CSV/summary reports for comparing the estimators on shared
//! simulation logs.

pub mod config;
pub mod driver;
pub mod experiment;
pub mod metrics;

pub use config::{ExperimentConfig, ObserverKind, ObserverSpec};
pub use driver::{draw_initial_offset, run_observer, DriverOutput, InitialOffset};
pub use experiment::{run_experiment, verify_gains, ExperimentReport};
pub use metrics::{attitude_distance, compute_errors, summarize, ErrorRecord, SeriesSummary};

use crate::geometric::GeometricError;
use crate::kalman::KalmanError;
use crate::riccati::RiccatiError;
use crate::scenario::ScenarioError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    /// Malformed or inconsistent configuration (exit code 2).
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    /// Estimator failure at runtime, e.g. a singular innovation covariance
    /// or a covariance losing positive definiteness (exit code 3).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl From<KalmanError> for BenchError {
    fn from(e: KalmanError) -> Self {
        BenchError::Numerical(e.to_string())
    }
}

impl From<GeometricError> for BenchError {
    fn from(e: GeometricError) -> Self {
        BenchError::Numerical(e.to_string())
    }
}

impl From<RiccatiError> for BenchError {
    fn from(e: RiccatiError) -> Self {
        BenchError::Numerical(e.to_string())
    }
}

impl BenchError {
    /// Process exit code contract: 0 success, 2 config, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Numerical(_) => 3,
            _ => 2,
        }
    }
}
