use approx::assert_relative_eq;
use dmpp_core::quaternion::{
    jacobian_eta, jacobian_eta_dagger, jacobian_eta_dagger_dot, jacobian_eta_dot, quat_exp,
    quat_log, torque_from_log, torque_to_log, UnitQuaternion,
};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn unit_quaternion() -> impl Strategy<Value = UnitQuaternion> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("non-degenerate", |(w, x, y, z)| {
            w * w + x * x + y * y + z * z > 1e-3
        })
        .prop_map(|(w, x, y, z)| UnitQuaternion::new(w, x, y, z))
}

/// Log vectors with rotation angle in (1e-3, pi - 1e-2).
fn log_vector() -> impl Strategy<Value = Vector3<f64>> {
    (
        -1.0..1.0f64,
        -1.0..1.0f64,
        -1.0..1.0f64,
        1e-3..(std::f64::consts::PI - 1e-2),
    )
        .prop_filter("axis", |(x, y, z, _)| x * x + y * y + z * z > 1e-2)
        .prop_map(|(x, y, z, a)| Vector3::new(x, y, z).normalize() * a)
}

fn rate() -> impl Strategy<Value = Vector3<f64>> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn central<F: Fn(f64) -> Matrix3<f64>>(f: F, h: f64) -> Matrix3<f64> {
    (f(h) - f(-h)) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn exp_log_round_trip(q in unit_quaternion()) {
        let back = quat_exp(&quat_log(&q));
        prop_assert!((back.w - q.w).abs() < 1e-12);
        prop_assert!((back.v - q.v).amax() < 1e-12);
    }

    #[test]
    fn jacobian_times_pseudo_inverse_is_identity(eta in log_vector()) {
        let p = jacobian_eta(&eta) * jacobian_eta_dagger(&eta);
        prop_assert!((p - Matrix3::identity()).amax() < 1e-10);
    }

    #[test]
    fn jacobian_rate_matches_finite_difference(eta in log_vector(), ed in rate()) {
        let fd = central(|t| jacobian_eta(&(eta + ed * t)), 1e-6);
        let an = jacobian_eta_dot(&eta, &ed);
        prop_assert!((fd - an).amax() < 1e-5 * (1.0 + an.amax()), "{} vs {}", fd, an);
    }

    #[test]
    fn pseudo_inverse_rate_matches_finite_difference(eta in log_vector(), ed in rate()) {
        let fd = central(|t| jacobian_eta_dagger(&(eta + ed * t)), 1e-6);
        let an = jacobian_eta_dagger_dot(&eta, &ed);
        prop_assert!((fd - an).amax() < 1e-5 * (1.0 + an.amax()), "{} vs {}", fd, an);
    }

    #[test]
    fn torque_round_trip(eta in log_vector(), tau in rate()) {
        let back = torque_from_log(&eta, &torque_to_log(&eta, &tau));
        prop_assert!((back - tau).amax() < 1e-9 * (1.0 + tau.amax()));
    }
}

#[test]
fn zero_rotation_limits_are_exact() {
    let z = Vector3::zeros();
    let ed = Vector3::new(0.3, 0.1, -0.2);
    assert_eq!(jacobian_eta(&z), Matrix3::identity());
    assert_eq!(jacobian_eta_dagger(&z), Matrix3::identity());
    assert_eq!(jacobian_eta_dot(&z, &ed), Matrix3::zeros());
    assert_eq!(jacobian_eta_dagger_dot(&z, &ed), Matrix3::zeros());
    assert_eq!(quat_exp(&z), UnitQuaternion::identity());
}

#[test]
fn pi_about_z() {
    let q = quat_exp(&Vector3::new(0.0, 0.0, std::f64::consts::PI));
    assert_relative_eq!(q.w, 0.0, epsilon = 1e-15);
    assert_relative_eq!(q.v.z, 1.0, epsilon = 1e-15);
}
