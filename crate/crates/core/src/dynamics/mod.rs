//! Canonical and transformation systems, force coupling and the closed-loop
//! rollout.

mod rollout;

pub use rollout::{
    orientation_of, run_orientation_rollout, run_rollout, run_rollout_probed, DebugRecord,
    Generalization, RolloutConfig, Sample, StepProbe, Trajectory, Trigger, ViaAction, ViaEvent,
};

use nalgebra::{DVector, Vector3};

use crate::adaptation::PhaseSample;
use crate::error::{Error, Result};
use crate::model::{Direction, Gains, StateTriplet};
use crate::quaternion::{integrate_world, quat_log, UnitQuaternion};

/// Second-order phase dynamics `sdd = d (sd_d - sd)` with the nominal rate
/// slowed down by external forces, `sd_d = sd_1 / (1 + a_d |f|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub s: f64,
    pub sd: f64,
    pub sdd: f64,
    /// Nominal rate `sd_1 = +-1 / T_f`.
    pub nominal_rate: f64,
    /// Convergence gain `d`.
    pub gain: f64,
    pub direction: Direction,
}

impl PhaseState {
    pub fn start(direction: Direction, duration: f64, gain: f64) -> Self {
        let rate = direction.sign() / duration;
        Self {
            s: direction.start_phase(),
            sd: rate,
            sdd: 0.0,
            nominal_rate: rate,
            gain,
            direction,
        }
    }

    pub fn sample(&self) -> PhaseSample {
        PhaseSample {
            s: self.s,
            sd: self.sd,
            sdd: self.sdd,
        }
    }

    pub fn finished(&self) -> bool {
        self.s == self.direction.end_phase() && self.sd == 0.0
    }

    /// One semi-implicit Euler step; the phase is held at its end value once
    /// reached.
    pub fn step_canonical(&self, dt: f64, force_norm: f64, stop_gain: f64) -> Self {
        if self.finished() {
            return *self;
        }
        let target = self.nominal_rate / (1.0 + stop_gain * force_norm);
        let sdd = self.gain * (target - self.sd);
        let sd = self.sd + sdd * dt;
        let s = self.s + sd * dt;
        let end = self.direction.end_phase();
        let past_end = (s - end) * self.direction.sign() >= -1e-12;
        if past_end {
            Self {
                s: end,
                sd: 0.0,
                sdd: 0.0,
                ..*self
            }
        } else {
            Self {
                s,
                sd,
                sdd,
                ..*self
            }
        }
    }
}

/// State of the transformation system together with its phase and time.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionState {
    pub t: f64,
    pub state: StateTriplet,
    pub phase: PhaseState,
}

/// `ddy = ddy_s - D (dy - dy_s) - K (y - y_s) + u`.
pub fn transformation_acceleration(
    gains: &Gains,
    state: &StateTriplet,
    reference: &StateTriplet,
    u: &DVector<f64>,
) -> DVector<f64> {
    &reference.ddy
        - &gains.damping * (&state.dy - &reference.dy)
        - &gains.stiffness * (&state.y - &reference.y)
        + u
}

/// Semi-implicit Euler step of the transformation system. The returned
/// triplet carries the acceleration used for the step.
pub fn step_transformation(
    gains: &Gains,
    state: &StateTriplet,
    reference: &StateTriplet,
    u: &DVector<f64>,
    dt: f64,
) -> Result<StateTriplet> {
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coupling term"));
    }
    let ddy = transformation_acceleration(gains, state, reference, u);
    let dy = &state.dy + &ddy * dt;
    let y = &state.y + &dy * dt;
    Ok(StateTriplet { y, dy, ddy })
}

/// Orientation, world-frame angular velocity and angular acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationState {
    pub q: UnitQuaternion,
    pub omega: Vector3<f64>,
    pub omega_dot: Vector3<f64>,
}

impl OrientationState {
    pub fn at_rest(q: UnitQuaternion) -> Self {
        Self {
            q,
            omega: Vector3::zeros(),
            omega_dot: Vector3::zeros(),
        }
    }
}

/// Orientation counterpart of [`step_transformation`]: the position error is
/// replaced by `log(Q * Q_s^*)` taken the short way round.
pub fn step_orientation(
    gains: &Gains,
    state: &OrientationState,
    reference: &OrientationState,
    u: &Vector3<f64>,
    dt: f64,
) -> Result<OrientationState> {
    if gains.dofs() != 3 {
        return Err(Error::Dimension {
            context: "orientation gains",
            expected: 3,
            found: gains.dofs(),
        });
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coupling torque"));
    }
    let err = quat_log(&(state.q * reference.q.conjugate()).canonical());
    let k = gains.stiffness.fixed_view::<3, 3>(0, 0);
    let d = gains.damping.fixed_view::<3, 3>(0, 0);
    let omega_dot = reference.omega_dot - d * (state.omega - reference.omega) - k * err + u;
    let omega = state.omega + omega_dot * dt;
    Ok(OrientationState {
        q: integrate_world(&state.q, &omega, dt),
        omega,
        omega_dot,
    })
}

/// Maps an external force to an acceleration, fading out the reference
/// acceleration while the force is applied:
/// `u = f / M - a ddy_s`, `a = sqrt(min(2 |f|, 1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceCoupling {
    pub inertia: f64,
}

impl ForceCoupling {
    pub fn position() -> Self {
        Self { inertia: 5.0 }
    }

    pub fn orientation() -> Self {
        Self { inertia: 2.0 }
    }

    pub fn gate(force_norm: f64) -> f64 {
        (2.0 * force_norm).min(1.0).sqrt()
    }

    pub fn coupling(&self, force: &DVector<f64>, reference_acc: &DVector<f64>) -> DVector<f64> {
        let a = Self::gate(force.norm());
        force / self.inertia - reference_acc * a
    }
}

impl Default for ForceCoupling {
    fn default() -> Self {
        Self::position()
    }
}
