//! Unit quaternions (scalar first, Hamilton product) and the maps between
//! log-space velocities and world-frame angular velocities.
//!
//! For a log vector `eta = theta * k` the half angle is `t = theta / 2`, and
//!
//! ```text
//! J      = k k^T + (sin t cos t / t) (I - k k^T) + (sin^2 t / t) [k]x
//! J_dag  = k k^T + (t cos t / sin t) (I - k k^T) - t [k]x
//! ```
//!
//! so that `omega = J eta_dot` and `eta_dot = J_dag omega`.

use core::ops::{Mul, Neg};
use nalgebra::{Matrix3, Vector3};

use crate::linalg::skew;

/// Below this rotation angle the maps use their identity limits.
pub const SMALL_ANGLE: f64 = 1e-7;

/// Half angles are clamped to `pi - HALF_ANGLE_MARGIN` where `J_dag` is
/// singular.
pub const HALF_ANGLE_MARGIN: f64 = 1e-6;

/// Log-space rotation vector `eta = theta * axis`.
pub type LogVector = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    pub w: f64,
    pub v: Vector3<f64>,
}

impl UnitQuaternion {
    /// Normalises `(w, x, y, z)`. A zero input yields the identity.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Self::identity();
        }
        Self {
            w: w / n,
            v: Vector3::new(x / n, y / n, z / n),
        }
    }

    pub fn identity() -> Self {
        Self {
            w: 1.0,
            v: Vector3::zeros(),
        }
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        quat_exp(&(axis.normalize() * angle))
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.w, self.v.x, self.v.y, self.v.z]
    }

    pub fn conjugate(&self) -> Self {
        Self {
            w: self.w,
            v: -self.v,
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.v.dot(&other.v)
    }

    pub fn renormalize(&self) -> Self {
        Self::new(self.w, self.v.x, self.v.y, self.v.z)
    }

    /// Representative with non-negative scalar part.
    pub fn canonical(&self) -> Self {
        if self.w < 0.0 {
            -*self
        } else {
            *self
        }
    }

    /// Rotates a vector.
    pub fn rotate(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let t = 2.0 * self.v.cross(p);
        p + t * self.w + self.v.cross(&t)
    }

    /// Rotation angle of `self * other^-1` along the shorter way round.
    pub fn angle_to(&self, other: &Self) -> f64 {
        quat_log(&(*self * other.conjugate()).canonical()).norm()
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    fn mul(self, r: UnitQuaternion) -> UnitQuaternion {
        UnitQuaternion {
            w: self.w * r.w - self.v.dot(&r.v),
            v: r.v * self.w + self.v * r.w + self.v.cross(&r.v),
        }
    }
}

impl Neg for UnitQuaternion {
    type Output = UnitQuaternion;

    fn neg(self) -> UnitQuaternion {
        UnitQuaternion {
            w: -self.w,
            v: -self.v,
        }
    }
}

/// `log(Q) = 2 acos(w) v / |v|`, evaluated with `atan2` for accuracy near the
/// identity. The result has norm in `[0, 2 pi]`.
pub fn quat_log(q: &UnitQuaternion) -> LogVector {
    let nv = q.v.norm();
    if nv == 0.0 {
        return Vector3::zeros();
    }
    let half = nv.atan2(q.w);
    q.v * (2.0 * half / nv)
}

/// `exp(eta) = [cos(|eta|/2), sin(|eta|/2) eta / |eta|]`.
pub fn quat_exp(eta: &LogVector) -> UnitQuaternion {
    let theta = eta.norm();
    let half = 0.5 * theta;
    // sin(theta/2) / theta with its series near zero.
    let sinc = if theta < 1e-4 {
        0.5 - theta * theta / 48.0
    } else {
        half.sin() / theta
    };
    UnitQuaternion {
        w: half.cos(),
        v: eta * sinc,
    }
}

/// Half angle and axis of `eta`, or `None` in the small-angle regime.
fn split(eta: &LogVector) -> Option<(f64, Vector3<f64>)> {
    let theta = eta.norm();
    if theta < SMALL_ANGLE {
        return None;
    }
    let mut half = 0.5 * theta;
    let limit = core::f64::consts::PI - HALF_ANGLE_MARGIN;
    if half > limit {
        log::warn!("log-space angle {theta} beyond the Jacobian range; clamped");
        half = limit;
    }
    Some((half, eta / theta))
}

/// `J_eta` with `omega = J_eta eta_dot`.
pub fn jacobian_eta(eta: &LogVector) -> Matrix3<f64> {
    let Some((t, k)) = split(eta) else {
        return Matrix3::identity();
    };
    let (s, c) = t.sin_cos();
    let kk = k * k.transpose();
    kk + (Matrix3::identity() - kk) * (s * c / t) + skew(&k) * (s * s / t)
}

/// `J_eta^dagger` with `eta_dot = J_eta^dagger omega`.
pub fn jacobian_eta_dagger(eta: &LogVector) -> Matrix3<f64> {
    let Some((t, k)) = split(eta) else {
        return Matrix3::identity();
    };
    let (s, c) = t.sin_cos();
    let kk = k * k.transpose();
    kk + (Matrix3::identity() - kk) * (t * c / s) - skew(&k) * t
}

/// Time derivatives of the half angle and the axis.
fn half_angle_rates(t: f64, k: &Vector3<f64>, eta_dot: &LogVector) -> (f64, Vector3<f64>) {
    let t_dot = 0.5 * k.dot(eta_dot);
    let k_dot = (eta_dot - k * k.dot(eta_dot)) * (0.5 / t);
    (t_dot, k_dot)
}

/// `d/dt J_eta` along a log-space velocity `eta_dot`.
///
/// In the small-angle branch the zero matrix is returned; the products
/// `J_dot eta_dot` used by the kinematic maps vanish there.
pub fn jacobian_eta_dot(eta: &LogVector, eta_dot: &LogVector) -> Matrix3<f64> {
    let Some((t, k)) = split(eta) else {
        return Matrix3::zeros();
    };
    let (s, c) = t.sin_cos();
    let (t_dot, k_dot) = half_angle_rates(t, &k, eta_dot);
    let kk = k * k.transpose();
    let sym = k_dot * k.transpose() + k * k_dot.transpose();
    let da = (1.0 - 2.0 * s * s) / t - s * c / (t * t);
    let db = 2.0 * s * c / t - s * s / (t * t);
    sym * (1.0 - s * c / t)
        + (Matrix3::identity() - kk) * (da * t_dot)
        + skew(&k) * (db * t_dot)
        + skew(&k_dot) * (s * s / t)
}

/// `d/dt J_eta^dagger` along a log-space velocity `eta_dot`.
pub fn jacobian_eta_dagger_dot(eta: &LogVector, eta_dot: &LogVector) -> Matrix3<f64> {
    let Some((t, k)) = split(eta) else {
        return Matrix3::zeros();
    };
    let (s, c) = t.sin_cos();
    let (t_dot, k_dot) = half_angle_rates(t, &k, eta_dot);
    let kk = k * k.transpose();
    let sym = k_dot * k.transpose() + k * k_dot.transpose();
    let dc = (s * c - t) / (s * s);
    sym * (1.0 - t * c / s) + (Matrix3::identity() - kk) * (dc * t_dot)
        - skew(&k) * t_dot
        - skew(&k_dot) * t
}

/// `(omega, omega_dot)` from a log-space trajectory sample.
pub fn omega_from_eta(
    eta: &LogVector,
    eta_dot: &LogVector,
    eta_ddot: &LogVector,
) -> (Vector3<f64>, Vector3<f64>) {
    let j = jacobian_eta(eta);
    let jd = jacobian_eta_dot(eta, eta_dot);
    (j * eta_dot, j * eta_ddot + jd * eta_dot)
}

/// `(eta_dot, eta_ddot)` from world-frame angular velocity and acceleration.
pub fn eta_from_omega(
    eta: &LogVector,
    omega: &Vector3<f64>,
    omega_dot: &Vector3<f64>,
) -> (LogVector, LogVector) {
    let jd = jacobian_eta_dagger(eta);
    let eta_dot = jd * omega;
    let jdd = jacobian_eta_dagger_dot(eta, &eta_dot);
    (eta_dot, jd * omega_dot + jdd * omega)
}

/// Cartesian torque to log-space torque, `tau_eta = J_eta^T tau`.
pub fn torque_to_log(eta: &LogVector, tau: &Vector3<f64>) -> Vector3<f64> {
    jacobian_eta(eta).transpose() * tau
}

/// Log-space torque to Cartesian torque, `tau = J_eta^dagger^T tau_eta`.
pub fn torque_from_log(eta: &LogVector, tau_eta: &Vector3<f64>) -> Vector3<f64> {
    jacobian_eta_dagger(eta).transpose() * tau_eta
}

/// One explicit step `Q <- exp(omega dt) * Q` with a world-frame `omega`.
pub fn integrate_world(q: &UnitQuaternion, omega: &Vector3<f64>, dt: f64) -> UnitQuaternion {
    (quat_exp(&(omega * dt)) * *q).renormalize()
}
