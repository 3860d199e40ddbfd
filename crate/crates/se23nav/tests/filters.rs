//! Side-by-side behavior of the two Kalman variants: the invariant filter's
//! linearization is constant, the multiplicative one re-linearizes around the
//! estimate, and both converge on the benchmark circle with healthy
//! covariances.

mod common;

use std::collections::BTreeSet;

use nalgebra::Vector3;
use se23nav::kalman::{Iekf, Mekf};
use se23nav::lie::exp_so3;
use se23nav::riccati::assert_covariance;
use se23nav::scenario::{run_scenario, Scenario};
use se23nav::world::DEFAULT_GRAVITY;
use se23nav::{ExtendedPose, NoiseSpec};

fn offset_initial(truth: &ExtendedPose) -> ExtendedPose {
    let tilt = Vector3::new(1.0, -0.3, 0.5).normalize() * 10f64.to_radians();
    ExtendedPose::new(
        exp_so3(&tilt) * truth.rot,
        truth.vel + Vector3::new(-0.4, 0.8, 0.45),
        truth.pos + Vector3::new(0.6, -0.6, 0.5),
    )
}

fn model_noise() -> NoiseSpec {
    NoiseSpec::isotropic(1e-3, 1e-2, 1e-2).unwrap()
}

#[test]
fn invariant_filter_linearization_never_moves() {
    let scenario = Scenario::default_circle(3);
    let log = run_scenario(&scenario).unwrap();
    let scheduled: BTreeSet<usize> = log.scheduled.iter().copied().collect();
    let mut iekf = Iekf::from_stds(
        offset_initial(&log.truth[0].pose),
        0.2,
        1.0,
        1.0,
        model_noise(),
        DEFAULT_GRAVITY,
    )
    .unwrap();

    let a0 = iekf.state_matrix();
    let c0 = iekf.measurement_matrix(&scenario.landmarks);
    let horizon = (8.0 * scenario.imu_rate) as usize;
    for k in 0..horizon {
        iekf.predict(&log.imu[k].gyro, &log.imu[k].accel, scenario.dt());
        if scheduled.contains(&(k + 1)) {
            iekf.update(&log.observations[k + 1].body, &scenario.landmarks).unwrap();
            // Bit-identical at every epoch, however far the estimate moved.
            assert_eq!(iekf.state_matrix(), a0);
            assert_eq!(iekf.measurement_matrix(&scenario.landmarks), c0);
        }
    }

    // A filter initialized somewhere else entirely sees the same matrices.
    let elsewhere = ExtendedPose::new(
        exp_so3(&Vector3::new(0.0, 0.0, 2.0)),
        Vector3::new(9.0, -9.0, 9.0),
        Vector3::new(100.0, 200.0, -50.0),
    );
    let other = Iekf::from_stds(elsewhere, 0.2, 1.0, 1.0, model_noise(), DEFAULT_GRAVITY).unwrap();
    assert_eq!(other.state_matrix(), a0);
    assert_eq!(other.measurement_matrix(&scenario.landmarks), c0);
}

#[test]
fn multiplicative_filter_relinearizes_around_the_estimate() {
    let scenario = Scenario::default_circle(3);
    let log = run_scenario(&scenario).unwrap();
    let mut mekf = Mekf::from_stds(
        offset_initial(&log.truth[0].pose),
        0.2,
        1.0,
        1.0,
        model_noise(),
        DEFAULT_GRAVITY,
    )
    .unwrap();

    let a0 = mekf.state_matrix(&log.imu[0].accel);
    let c0 = mekf.measurement_matrix(&scenario.landmarks);
    // Quarter-turn later the attitude has moved; the linearization follows.
    let quarter = (0.25 * std::f64::consts::TAU / 0.2 * scenario.imu_rate) as usize;
    for k in 0..quarter {
        mekf.predict(&log.imu[k].gyro, &log.imu[k].accel, scenario.dt());
    }
    let a1 = mekf.state_matrix(&log.imu[quarter].accel);
    let c1 = mekf.measurement_matrix(&scenario.landmarks);
    assert_ne!(a0, a1, "state matrix should move with the estimate");
    assert_ne!(c0, c1, "measurement matrix should move with the estimate");
    assert!((&a0 - &a1).norm() > 1e-3);
    assert!((&c0 - &c1).norm() > 1e-3);
}

fn run_to_end<F>(mut predict_update: F, log: &se23nav::scenario::SimLog)
where
    F: FnMut(usize, bool),
{
    let scheduled: BTreeSet<usize> = log.scheduled.iter().copied().collect();
    for k in 0..log.epochs() - 1 {
        predict_update(k, scheduled.contains(&(k + 1)));
    }
}

#[test]
fn both_filters_converge_on_the_noise_free_circle() {
    let mut scenario = Scenario::default_circle(3);
    scenario.duration = 12.0;
    let log = run_scenario(&scenario).unwrap();
    let initial = offset_initial(&log.truth[0].pose);
    let dt = scenario.dt();

    let mut mekf =
        Mekf::from_stds(initial, 0.2, 1.0, 1.0, model_noise(), DEFAULT_GRAVITY).unwrap();
    let mut iekf =
        Iekf::from_stds(initial, 0.2, 1.0, 1.0, model_noise(), DEFAULT_GRAVITY).unwrap();

    run_to_end(
        |k, update| {
            mekf.predict(&log.imu[k].gyro, &log.imu[k].accel, dt);
            iekf.predict(&log.imu[k].gyro, &log.imu[k].accel, dt);
            if update {
                mekf.update(&log.observations[k + 1].body, &scenario.landmarks).unwrap();
                iekf.update(&log.observations[k + 1].body, &scenario.landmarks).unwrap();
                assert_covariance(mekf.covariance(), 1e-9).unwrap();
                assert_covariance(iekf.covariance(), 1e-9).unwrap();
            }
        },
        &log,
    );

    let truth = &log.truth.last().unwrap().pose;
    for (name, pose) in [("mekf", mekf.pose()), ("iekf", iekf.pose())] {
        let dp = (pose.pos - truth.pos).norm();
        let dv = (pose.vel - truth.vel).norm();
        let dr = (pose.rot.matrix() - truth.rot.matrix()).norm();
        assert!(dp < 1e-2, "{name}: position error {dp}");
        assert!(dv < 1e-2, "{name}: velocity error {dv}");
        assert!(dr < 1e-2, "{name}: attitude error {dr}");
    }
}

#[test]
fn update_rejects_mismatched_observation_counts() {
    let scenario = Scenario::default_circle(1);
    let pose = ExtendedPose::identity();
    let mut mekf = Mekf::from_stds(pose, 0.2, 1.0, 1.0, model_noise(), DEFAULT_GRAVITY).unwrap();
    let mut iekf = Iekf::from_stds(pose, 0.2, 1.0, 1.0, model_noise(), DEFAULT_GRAVITY).unwrap();
    let short = vec![Vector3::zeros(); scenario.landmarks.len() - 1];
    assert!(mekf.update(&short, &scenario.landmarks).is_err());
    assert!(iekf.update(&short, &scenario.landmarks).is_err());
}

#[test]
fn constructors_enforce_a_valid_initial_covariance() {
    let pose = ExtendedPose::identity();
    assert!(Mekf::from_stds(pose, 0.0, 1.0, 1.0, model_noise(), DEFAULT_GRAVITY).is_err());
    assert!(Iekf::from_stds(pose, 0.2, 0.0, 1.0, model_noise(), DEFAULT_GRAVITY).is_err());
    let bad = nalgebra::DMatrix::<f64>::zeros(9, 9);
    assert!(Mekf::new(pose, bad.clone(), model_noise(), DEFAULT_GRAVITY).is_err());
    assert!(Iekf::new(pose, bad, model_noise(), DEFAULT_GRAVITY).is_err());
}
