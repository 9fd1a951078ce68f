//! Obstacles, moving targets and scripted external forces.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, invalid, Error, Result};

/// Upper bound on the barrier argument so `-log(1 - e)` stays finite.
const BARRIER_CLAMP: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `psi = (y - c)^T Sigma^{-1} (y - c) - 1`
    Ellipsoid {
        center: DVector<f64>,
        inv_cov: DMatrix<f64>,
    },
    /// `psi = n^T (y - y0)` with unit normal `n`.
    Plane {
        normal: DVector<f64>,
        point: DVector<f64>,
    },
}

/// An obstacle with a logarithmic barrier acting within `d0` of its surface.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub shape: Shape,
    /// Influence distance in surface-function units.
    pub d0: f64,
    /// Repulsion gain `k_o`.
    pub gain: f64,
}

impl Obstacle {
    /// Ellipsoid with covariance `sigma` (semi-axes are its square-root
    /// eigenvalues).
    pub fn ellipsoid(
        center: DVector<f64>,
        sigma: DMatrix<f64>,
        d0: f64,
        gain: f64,
    ) -> Result<Self> {
        check_dim("ellipsoid covariance", center.len(), sigma.nrows())?;
        check_dim("ellipsoid covariance", center.len(), sigma.ncols())?;
        let chol = sigma
            .cholesky()
            .ok_or_else(|| invalid("ellipsoid covariance must be positive definite"))?;
        Self::checked(
            Shape::Ellipsoid {
                center,
                inv_cov: chol.inverse(),
            },
            d0,
            gain,
        )
    }

    pub fn plane(normal: DVector<f64>, point: DVector<f64>, d0: f64, gain: f64) -> Result<Self> {
        check_dim("plane point", normal.len(), point.len())?;
        let norm = normal.norm();
        if !(norm > 0.0) {
            return Err(invalid("plane normal must be non-zero"));
        }
        Self::checked(
            Shape::Plane {
                normal: normal / norm,
                point,
            },
            d0,
            gain,
        )
    }

    fn checked(shape: Shape, d0: f64, gain: f64) -> Result<Self> {
        if !(d0 > 0.0) || !(gain >= 0.0) {
            return Err(invalid(format!(
                "obstacle needs d0 > 0 and gain >= 0 (got {d0}, {gain})"
            )));
        }
        Ok(Self { shape, d0, gain })
    }

    pub fn dofs(&self) -> usize {
        match &self.shape {
            Shape::Ellipsoid { center, .. } => center.len(),
            Shape::Plane { normal, .. } => normal.len(),
        }
    }

    /// Surface function `psi(y)`; negative inside the obstacle.
    pub fn surface_value(&self, y: &DVector<f64>) -> f64 {
        match &self.shape {
            Shape::Ellipsoid { center, inv_cov } => {
                let d = y - center;
                d.dot(&(inv_cov * &d)) - 1.0
            }
            Shape::Plane { normal, point } => normal.dot(&(y - point)),
        }
    }

    /// `d psi / d y`.
    pub fn surface_gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        match &self.shape {
            Shape::Ellipsoid { center, inv_cov } => inv_cov * (y - center) * 2.0,
            Shape::Plane { normal, .. } => normal.clone(),
        }
    }

    fn barrier_argument(&self, psi: f64) -> f64 {
        if psi >= self.d0 {
            0.0
        } else {
            let r = (psi - self.d0) / self.d0;
            (r * r).min(BARRIER_CLAMP)
        }
    }

    /// Barrier `V = -log(1 - e)` with `e = (psi - d0)^2 / d0^2` inside the
    /// influence region and zero outside.
    pub fn potential(&self, y: &DVector<f64>) -> f64 {
        let e = self.barrier_argument(self.surface_value(y));
        -(1.0 - e).ln()
    }

    /// `f = -k_o dV/dy`; fails if `y` is on or inside the surface.
    pub fn repulsive_force(&self, y: &DVector<f64>, index: usize) -> Result<DVector<f64>> {
        let psi = self.surface_value(y);
        if !(psi > 0.0) {
            return Err(Error::Penetration { index, psi });
        }
        if psi >= self.d0 {
            return Ok(DVector::zeros(y.len()));
        }
        let e = self.barrier_argument(psi);
        let de = 2.0 * (psi - self.d0) / (self.d0 * self.d0);
        let dv = de / (1.0 - e);
        Ok(self.surface_gradient(y) * (-self.gain * dv))
    }
}

/// Sum of the repulsive accelerations of all obstacles.
pub fn total_repulsion(obstacles: &[Obstacle], y: &DVector<f64>) -> Result<DVector<f64>> {
    let mut f = DVector::zeros(y.len());
    for (i, o) in obstacles.iter().enumerate() {
        f += o.repulsive_force(y, i)?;
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq)]
pub enum GoalEvent {
    /// Jump to an absolute goal at `time`.
    Set { time: f64, goal: DVector<f64> },
    /// Add `delta` to the goal at `time`.
    Shift { time: f64, delta: DVector<f64> },
    /// Move with constant `velocity` between `start` and `end`.
    Drift {
        start: f64,
        end: f64,
        velocity: DVector<f64>,
    },
}

/// A goal that may jump or drift over time.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSchedule {
    initial: DVector<f64>,
    events: Vec<GoalEvent>,
}

impl TargetSchedule {
    pub fn fixed(goal: DVector<f64>) -> Self {
        Self {
            initial: goal,
            events: Vec::new(),
        }
    }

    pub fn new(initial: DVector<f64>, events: Vec<GoalEvent>) -> Result<Self> {
        let n = initial.len();
        for e in &events {
            match e {
                GoalEvent::Set { goal, .. } => check_dim("goal event", n, goal.len())?,
                GoalEvent::Shift { delta, .. } => check_dim("goal shift", n, delta.len())?,
                GoalEvent::Drift {
                    start,
                    end,
                    velocity,
                } => {
                    check_dim("goal drift", n, velocity.len())?;
                    if !(end >= start) {
                        return Err(invalid("goal drift must end after it starts"));
                    }
                }
            }
        }
        Ok(Self { initial, events })
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.initial
    }

    pub fn events(&self) -> &[GoalEvent] {
        &self.events
    }

    /// Goal at time `t`. Events take effect in time order; a `Set` overrides
    /// everything before it.
    pub fn goal_at(&self, t: f64) -> DVector<f64> {
        let mut order: Vec<(f64, usize)> = self
            .events
            .iter()
            .enumerate()
            .map(|(i, e)| match e {
                GoalEvent::Set { time, .. } | GoalEvent::Shift { time, .. } => (*time, i),
                GoalEvent::Drift { start, .. } => (*start, i),
            })
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut g = self.initial.clone();
        for (_, i) in order {
            match &self.events[i] {
                GoalEvent::Set { time, goal } if *time <= t => g.copy_from(goal),
                GoalEvent::Shift { time, delta } if *time <= t => g += delta,
                GoalEvent::Drift {
                    start,
                    end,
                    velocity,
                } if *start <= t => g += velocity * (t.min(*end) - start),
                _ => {}
            }
        }
        g
    }

    /// Times at which the goal changes discontinuously.
    pub fn jump_times(&self) -> Vec<f64> {
        self.events
            .iter()
            .filter_map(|e| match e {
                GoalEvent::Set { time, .. } | GoalEvent::Shift { time, .. } => Some(*time),
                GoalEvent::Drift { .. } => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PulseProfile {
    #[default]
    Constant,
    /// `sin(pi (t - start) / (end - start))` envelope.
    HalfSine,
}

/// An external force applied over `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcePulse {
    pub start: f64,
    pub end: f64,
    pub force: DVector<f64>,
    pub profile: PulseProfile,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForceScript {
    pub pulses: Vec<ForcePulse>,
}

impl ForceScript {
    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub fn force_at(&self, t: f64, dofs: usize) -> DVector<f64> {
        let mut f = DVector::zeros(dofs);
        for p in &self.pulses {
            if t >= p.start && t < p.end {
                let scale = match p.profile {
                    PulseProfile::Constant => 1.0,
                    PulseProfile::HalfSine => {
                        (core::f64::consts::PI * (t - p.start) / (p.end - p.start)).sin()
                    }
                };
                f += &p.force * scale;
            }
        }
        f
    }
}
