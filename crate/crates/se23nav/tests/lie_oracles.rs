//! Cross-checks the closed-form Lie maps against independent oracles:
//! truncated matrix-exponential series, the Rodrigues formula written out
//! directly, and the half-angle form of the Cayley transform.

mod common;

use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use se23nav::lie::{
    cayley, exp_se23, exp_so3, hat3, left_jacobian, log_so3, proj_antisym, psi, vee3, GainSet,
    Tangent9,
};
use se23nav::Rotation;

fn random_angles(seed: u64, n: usize, max_angle: f64) -> Vec<Vector3<f64>> {
    let mut r = common::rng(seed);
    (0..n).map(|_| common::random_axis_angle(&mut r, max_angle)).collect()
}

#[test]
fn exp_so3_matches_series_and_rodrigues() {
    let mut samples = random_angles(11, 2000, 3.1);
    // Magnitudes that stress the Taylor switchover on both sides.
    let mut r = common::rng(12);
    for &scale in &[1e-12, 1e-8, 1e-5, 9e-5, 1.1e-4, 1e-2] {
        for _ in 0..50 {
            let axis = common::random_axis_angle(&mut r, 1.0).normalize();
            samples.push(axis * scale);
        }
    }
    for theta in &samples {
        let got = *exp_so3(theta).matrix();
        let series = common::series_exp3(&hat3(theta));
        let closed = common::rodrigues(theta);
        assert!(common::max_abs3(&(got - series)) < 1e-10, "series mismatch at θ = {theta:?}");
        assert!(common::max_abs3(&(got - closed)) < 1e-10, "Rodrigues mismatch at θ = {theta:?}");
    }
}

#[test]
fn exp_se23_matches_matrix_series() {
    let mut r = common::rng(21);
    for _ in 0..2000 {
        let xi = Tangent9::new(
            common::random_axis_angle(&mut r, 3.1),
            common::random_vec3(&mut r, 5.0),
            common::random_vec3(&mut r, 5.0),
        );
        let got = exp_se23(&xi).embed();
        let series = common::series_exp5(&xi.embed());
        assert!(common::max_abs5(&(got - series)) < 1e-10, "mismatch at ξ = {xi:?}");
    }
}

#[test]
fn log_exp_round_trip_recovers_tangent() {
    let mut samples = random_angles(31, 2000, std::f64::consts::PI - 1e-3);
    let mut r = common::rng(32);
    // Near the half-turn the log has to switch to the trace-insensitive
    // branch; cover both sides of that switch and the angle floor.
    for &residual in &[1e-3, 1e-5, 1e-7, 1e-9, 1e-12] {
        for _ in 0..50 {
            let axis = common::random_axis_angle(&mut r, 1.0).normalize();
            samples.push(axis * (std::f64::consts::PI - residual));
        }
    }
    for &scale in &[1e-14, 1e-9, 1e-5] {
        for _ in 0..50 {
            let axis = common::random_axis_angle(&mut r, 1.0).normalize();
            samples.push(axis * scale);
        }
    }
    for theta in &samples {
        let back = log_so3(&exp_so3(theta));
        assert!((back - theta).norm() < 1e-9, "round trip lost {theta:?} -> {back:?}");
    }
}

#[test]
fn exp_log_round_trip_on_rotations() {
    let mut r = common::rng(41);
    for _ in 0..2000 {
        let rot = common::random_rotation(&mut r);
        let back = exp_so3(&log_so3(&rot));
        assert!(common::max_abs3(&(back.matrix() - rot.matrix())) < 1e-10);
    }
}

#[test]
fn cayley_matches_half_angle_exponential() {
    // σ = tan(θ/2)·axis maps to the rotation by θ about that axis, so the
    // rational form must agree with exp_so3 at angle 2·atan‖σ‖.
    let mut r = common::rng(51);
    for _ in 0..2000 {
        let sigma = common::random_vec3(&mut r, 4.0);
        let norm = sigma.norm();
        let expected = if norm < 1e-300 {
            Matrix3::identity()
        } else {
            *exp_so3(&(sigma / norm * (2.0 * norm.atan()))).matrix()
        };
        let got = *cayley(&sigma).matrix();
        assert!(common::max_abs3(&(got - expected)) < 1e-12, "mismatch at σ = {sigma:?}");
    }
    assert!(common::max_abs3(&(cayley(&Vector3::zeros()).matrix() - Matrix3::identity())) == 0.0);
}

#[test]
fn left_jacobian_matches_its_series() {
    // J_l(θ) = Σ_{n≥0} (θ^×)ⁿ / (n+1)!
    let mut samples = random_angles(61, 500, 3.1);
    samples.push(Vector3::zeros());
    let mut r = common::rng(62);
    for &scale in &[1e-9, 9e-5, 2e-4] {
        samples.push(common::random_axis_angle(&mut r, 1.0).normalize() * scale);
    }
    for theta in &samples {
        let h = hat3(theta);
        let mut series = Matrix3::identity();
        let mut term = Matrix3::identity();
        for n in 1..30 {
            term = term * h / (n as f64 + 1.0);
            series += term;
        }
        assert!(common::max_abs3(&(left_jacobian(theta) - series)) < 1e-12);
    }
}

#[test]
fn adjoint_conjugation_commutes_with_exp() {
    // exp(X ξ^∧ X⁻¹) = X exp(ξ^∧) X⁻¹: the coordinate extraction of the
    // conjugated generator has to agree with conjugating the group element.
    let mut r = common::rng(71);
    for _ in 0..300 {
        let x = common::random_pose(&mut r);
        let xi = Tangent9::new(
            common::random_axis_angle(&mut r, 2.5),
            common::random_vec3(&mut r, 2.0),
            common::random_vec3(&mut r, 2.0),
        );
        let ad = se23nav::lie::adjoint(&x, &xi.embed());
        let ad_xi = Tangent9::new(
            vee3(&ad.fixed_view::<3, 3>(0, 0).into_owned()).unwrap(),
            ad.fixed_view::<3, 1>(0, 3).into_owned(),
            ad.fixed_view::<3, 1>(0, 4).into_owned(),
        );
        let lhs = exp_se23(&ad_xi).embed();
        let rhs = x.embed() * exp_se23(&xi).embed() * x.inverse().embed();
        assert!(common::max_abs5(&(lhs - rhs)) < 1e-10);
    }
}

#[test]
fn psi_is_vee_of_the_antisymmetric_part() {
    let mut r = common::rng(81);
    for _ in 0..200 {
        let m = Matrix3::<f64>::from_fn(|_, _| common::random_vec3(&mut r, 2.0)[0]);
        let direct = psi(&m);
        let via_projection = vee3(&proj_antisym(&m)).unwrap();
        assert!((direct - via_projection).norm() < 1e-14);
    }
    // On a rotation by θ the antisymmetric part carries sin θ · axis.
    let theta: Vector3<f64> = Vector3::new(0.3, -0.2, 0.5);
    let expected = theta.normalize() * theta.norm().sin();
    assert!((psi(&exp_so3(&theta).matrix()) - expected).norm() < 1e-12);
}

#[test]
fn nearest_rotation_restores_a_perturbed_matrix() {
    let mut r = common::rng(91);
    for _ in 0..200 {
        let rot = common::random_rotation(&mut r);
        let noisy =
            rot.matrix() + Matrix3::<f64>::from_fn(|_, _| common::random_vec3(&mut r, 1e-6)[0]);
        let fixed = Rotation::from_nearest(&noisy);
        let m = *fixed.matrix();
        assert!(common::max_abs3(&(m.transpose() * m - Matrix3::identity())) < 1e-12);
        assert!((m.determinant() - 1.0).abs() < 1e-12);
        assert!(common::max_abs3(&(m - rot.matrix())) < 1e-5);
        // The checked constructor must reject what from_nearest repairs.
        assert!(Rotation::from_matrix(noisy * 1.1).is_err());
    }
}

#[test]
fn vee_and_gain_constructors_reject_bad_input() {
    let mut m = Matrix3::zeros();
    m[(0, 1)] = 1.0; // not balanced by m[(1,0)] = -1
    assert!(vee3(&m).is_err());
    assert!(GainSet::isotropic(0.0, 1.0, 1.0).is_err());
    assert!(GainSet::isotropic(-0.5, 1.0, 1.0).is_err());
    assert!(GainSet::isotropic(f64::NAN, 1.0, 1.0).is_err());
    assert!(GainSet::isotropic(0.1, 1.0, 1.0).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn prop_hat_vee_round_trip(x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0) {
        let w = Vector3::new(x, y, z);
        let back = vee3(&hat3(&w)).unwrap();
        prop_assert!((back - w).norm() == 0.0);
    }

    #[test]
    fn prop_exp_so3_is_orthonormal(
        x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, scale in 0.0f64..3.1
    ) {
        let v = Vector3::new(x, y, z);
        prop_assume!(v.norm() > 1e-3);
        let theta = v.normalize() * scale;
        let m = *exp_so3(&theta).matrix();
        prop_assert!(common::max_abs3(&(m.transpose() * m - Matrix3::identity())) < 1e-13);
        prop_assert!((m.determinant() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn prop_log_inverts_exp_below_half_turn(
        x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, scale in 0.0f64..3.0
    ) {
        let v = Vector3::new(x, y, z);
        prop_assume!(v.norm() > 1e-3);
        let theta = v.normalize() * scale;
        let back = log_so3(&exp_so3(&theta));
        prop_assert!((back - theta).norm() < 1e-9);
    }

    #[test]
    fn prop_exp_se23_inverse_is_group_inverse(
        x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0,
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0
    ) {
        let xi = Tangent9::new(
            Vector3::new(x, y, z),
            Vector3::new(a, b, c),
            Vector3::new(c, a, b),
        );
        let g = exp_se23(&xi);
        let prod = (g * g.inverse()).embed();
        prop_assert!(common::max_abs5(&(prod - nalgebra::SMatrix::<f64, 5, 5>::identity())) < 1e-12);
    }
}
