//! Runs one observer over one simulation log, producing a time series of
//! error records and covariance-bound measurements.

use super::config::{ObserverKind, ObserverSpec, ObserversSection};
use super::metrics::{compute_errors, ErrorRecord};
use super::BenchError;
use crate::geometric::{
    ContinuousAttitudeHybrid, ContinuousObserver, DiscreteAttitudeHybrid, RiccatiGains,
};
use crate::kalman::{Iekf, Mekf};
use crate::lie::{exp_so3, ExtendedPose, GainSet};
use crate::scenario::{Scenario, SimLog};
use crate::world::{check_observability_conditions, NoiseSpec};
use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Initial estimate offset: an attitude rotation vector plus position and
/// velocity displacements, applied to the true initial state. One draw is
/// shared by every observer of a Monte-Carlo run so they start from the
/// same estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialOffset {
    pub datt: Vector3<f64>,
    pub dpos: Vector3<f64>,
    pub dvel: Vector3<f64>,
}

fn random_unit(rng: &mut ChaCha12Rng) -> Vector3<f64> {
    loop {
        let v: Vector3<f64> = Vector3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// Draws offset directions from the run seed (ChaCha stream 4; streams 1–3
/// belong to the simulator) with the given magnitudes.
pub fn draw_initial_offset(seed: u64, att_rad: f64, pos: f64, vel: f64) -> InitialOffset {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(4);
    InitialOffset {
        datt: random_unit(&mut rng) * att_rad,
        dpos: random_unit(&mut rng) * pos,
        dvel: random_unit(&mut rng) * vel,
    }
}

/// Perturbed initial estimate; the attitude error angle equals ‖datt‖.
pub fn initial_estimate(truth: &ExtendedPose, off: &InitialOffset) -> ExtendedPose {
    ExtendedPose::new(
        exp_so3(&off.datt) * truth.rot,
        truth.vel + off.dvel,
        truth.pos + off.dpos,
    )
}

/// Fixed gains for a geometric observer, falling back to per-family
/// defaults scaled by the constellation: the attitude gain defaults stay
/// clear of the discrete-update stability bound k_R (tr M − λ_min) < 1, and
/// the continuous-attitude hybrid divides by the maximum gap because its
/// attitude gain carries units of 1/(m²·s).
pub fn resolve_gains(
    spec: ObserverSpec,
    o: &ObserversSection,
    sc: &Scenario,
) -> Result<GainSet, BenchError> {
    let report = check_observability_conditions(&sc.landmarks);
    if !(report.kr_bound.is_finite() && report.kr_bound > 0.0) {
        return Err(BenchError::Config(
            "landmark constellation is degenerate (tr M = λ_min); attitude \
             innovations carry no information"
                .into(),
        ));
    }
    let (_, t_mx) = sc.schedule.bounds();
    let (kr, kp, kv) = match spec.kind {
        ObserverKind::Continuous => (2.0 / report.kr_bound, 2.0, 2.0),
        ObserverKind::HybridDiscrete => (0.9 / report.kr_bound, 1.0, 3.0),
        ObserverKind::HybridContinuous => (0.9 / (report.kr_bound * t_mx), 1.0, 3.0),
        ObserverKind::Mekf | ObserverKind::Iekf => {
            return Err(BenchError::Config(format!(
                "`{}` does not take observer gains",
                spec.name()
            )))
        }
    };
    GainSet::isotropic(o.kr.unwrap_or(kr), o.kp.unwrap_or(kp), o.kv.unwrap_or(kv))
        .map_err(|e| BenchError::Config(e.to_string()))
}

enum Instance {
    Mekf(Mekf),
    Iekf(Iekf),
    Continuous(ContinuousObserver),
    HybridDiscrete(DiscreteAttitudeHybrid),
    HybridContinuous(ContinuousAttitudeHybrid),
}

impl Instance {
    fn build(
        spec: ObserverSpec,
        o: &ObserversSection,
        sc: &Scenario,
        est0: ExtendedPose,
        model: NoiseSpec,
    ) -> Result<Instance, BenchError> {
        // Floors keep the initial covariances positive definite when an
        // error channel starts exactly on the truth.
        let att_std = o.init_att_err_deg.to_radians().max(1e-4);
        let pos_std = o.init_pos_err.max(1e-3);
        let vel_std = o.init_vel_err.max(1e-3);
        let riccati = || -> Result<RiccatiGains, BenchError> {
            let mut p0 = DMatrix::zeros(6, 6);
            for i in 0..3 {
                p0[(i, i)] = pos_std * pos_std;
                p0[(3 + i, 3 + i)] = vel_std * vel_std;
            }
            RiccatiGains::new(p0, model, 1e-6).map_err(|e| BenchError::Config(e.to_string()))
        };
        let config_err = |e: crate::geometric::GeometricError| BenchError::Config(e.to_string());
        Ok(match spec.kind {
            ObserverKind::Mekf => Instance::Mekf(
                Mekf::from_stds(est0, att_std, pos_std, vel_std, model, sc.gravity)
                    .map_err(|e| BenchError::Config(e.to_string()))?,
            ),
            ObserverKind::Iekf => Instance::Iekf(
                Iekf::from_stds(est0, att_std, vel_std, pos_std, model, sc.gravity)
                    .map_err(|e| BenchError::Config(e.to_string()))?,
            ),
            ObserverKind::Continuous => {
                let gains = resolve_gains(spec, o, sc)?;
                if spec.riccati {
                    Instance::Continuous(
                        ContinuousObserver::with_riccati_gains(est0, gains.kr, riccati()?, sc.gravity)
                            .map_err(config_err)?,
                    )
                } else {
                    Instance::Continuous(ContinuousObserver::new(est0, gains, sc.gravity))
                }
            }
            ObserverKind::HybridDiscrete => {
                let gains = resolve_gains(spec, o, sc)?;
                if spec.riccati {
                    Instance::HybridDiscrete(
                        DiscreteAttitudeHybrid::with_riccati_gains(
                            est0, gains.kr, riccati()?, sc.gravity,
                        )
                        .map_err(config_err)?,
                    )
                } else {
                    Instance::HybridDiscrete(DiscreteAttitudeHybrid::new(est0, gains, sc.gravity))
                }
            }
            ObserverKind::HybridContinuous => {
                let gains = resolve_gains(spec, o, sc)?;
                let eta0 = Vector3::new(o.eta0[0], o.eta0[1], o.eta0[2]);
                if spec.riccati {
                    Instance::HybridContinuous(
                        ContinuousAttitudeHybrid::with_riccati_gains(
                            est0, eta0, gains.kr, riccati()?, sc.gravity,
                        )
                        .map_err(config_err)?,
                    )
                } else {
                    Instance::HybridContinuous(ContinuousAttitudeHybrid::new(
                        est0, eta0, gains, sc.gravity,
                    ))
                }
            }
        })
    }

    fn est(&self) -> &ExtendedPose {
        match self {
            Instance::Mekf(f) => f.pose(),
            Instance::Iekf(f) => f.pose(),
            Instance::Continuous(g) => g.est(),
            Instance::HybridDiscrete(g) => g.est(),
            Instance::HybridContinuous(g) => g.est(),
        }
    }

    fn covariance(&self) -> Option<&DMatrix<f64>> {
        match self {
            Instance::Mekf(f) => Some(f.covariance()),
            Instance::Iekf(f) => Some(f.covariance()),
            Instance::Continuous(g) => g.covariance(),
            Instance::HybridDiscrete(g) => g.covariance(),
            Instance::HybridContinuous(g) => g.covariance(),
        }
    }
}

/// One observer's run output: error records at every IMU epoch, plus the
/// extreme covariance eigenvalues seen over the run (p_m, p_M) when the
/// observer carries a covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverOutput {
    pub records: Vec<ErrorRecord>,
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
}

fn eig_bounds(p: &DMatrix<f64>) -> (f64, f64) {
    let eig = p.clone().symmetric_eigen().eigenvalues;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &l in eig.iter() {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    (lo, hi)
}

/// Replays `log` through the selected observer. The intermittent observers
/// (both hybrids and both filters) consume landmark observations only at
/// the scheduled epochs; the continuous observer consumes the dense stream,
/// holding each epoch's observation over the following IMU interval.
pub fn run_observer(
    spec: ObserverSpec,
    o: &ObserversSection,
    sc: &Scenario,
    log: &SimLog,
    init: &InitialOffset,
) -> Result<DriverOutput, BenchError> {
    let model = NoiseSpec::isotropic(
        o.model_gyro_std,
        o.model_accel_std,
        o.model_landmark_std,
    )
    .map_err(|e| BenchError::Config(e.to_string()))?;
    let est0 = initial_estimate(&log.truth[0].pose, init);
    let mut inst = Instance::build(spec, o, sc, est0, model)?;

    let n = log.epochs();
    let mut is_scheduled = vec![false; n];
    for &k in &log.scheduled {
        is_scheduled[k] = true;
    }

    let dt = sc.dt();
    let landmarks = &sc.landmarks;
    let mut records = Vec::with_capacity(n);
    let mut p_min = f64::INFINITY;
    let mut p_max = f64::NEG_INFINITY;
    let mut saw_cov = false;

    let mut record = |inst: &Instance, t: f64, truth: &ExtendedPose| {
        let trace_p = inst.covariance().map(|p| {
            saw_cov = true;
            let (lo, hi) = eig_bounds(p);
            p_min = p_min.min(lo);
            p_max = p_max.max(hi);
            p.trace()
        });
        records.push(compute_errors(t, truth, inst.est(), landmarks, trace_p));
    };

    record(&inst, log.truth[0].t, &log.truth[0].pose);
    for k in 0..n - 1 {
        let imu = &log.imu[k];
        match &mut inst {
            Instance::Mekf(f) => {
                f.predict(&imu.gyro, &imu.accel, dt);
                if is_scheduled[k + 1] {
                    f.update(&log.observations[k + 1].body, landmarks)?;
                }
            }
            Instance::Iekf(f) => {
                f.predict(&imu.gyro, &imu.accel, dt);
                if is_scheduled[k + 1] {
                    f.update(&log.observations[k + 1].body, landmarks)?;
                }
            }
            Instance::Continuous(g) => {
                g.step(&imu.gyro, &imu.accel, &log.observations[k].body, landmarks, dt)?;
            }
            Instance::HybridDiscrete(g) => {
                g.flow(&imu.gyro, &imu.accel, landmarks, dt)?;
                if is_scheduled[k + 1] {
                    g.jump(&log.observations[k + 1].body, landmarks)?;
                }
            }
            Instance::HybridContinuous(g) => {
                g.flow(&imu.gyro, &imu.accel, landmarks, dt)?;
                if is_scheduled[k + 1] {
                    g.jump(&log.observations[k + 1].body, landmarks)?;
                }
            }
        }
        record(&inst, log.truth[k + 1].t, &log.truth[k + 1].pose);
    }
    drop(record);

    Ok(DriverOutput {
        records,
        p_min: saw_cov.then_some(p_min),
        p_max: saw_cov.then_some(p_max),
    })
}
