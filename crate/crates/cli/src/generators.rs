//! Synthetic demonstrations. All of them start and end at rest.

use std::f64::consts::PI;

use anyhow::{bail, Result};
use dmpp_core::model::Demonstration;
use dmpp_core::UnitQuaternion;
use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

/// Fifth-order rest-to-rest profile on `[0, 1]`.
pub fn min_jerk(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

/// `64 (u (1 - u))^3`: unit peak at `u = 1/2`, zero velocity and
/// acceleration at both ends.
pub fn bump(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    64.0 * (u * (1.0 - u)).powi(3)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    /// Straight min-jerk motion between two points.
    MinJerk { start: Vec<f64>, goal: Vec<f64> },
    /// 1-DoF min-jerk motion with a bump of height `hump` on top.
    SingleHump { start: f64, goal: f64, hump: f64 },
    /// 2-D path `x = L u`, `y = A sin(2 pi u) + slope L u`.
    SCurve {
        #[serde(default = "one")]
        length: f64,
        #[serde(default = "quarter")]
        amplitude: f64,
        #[serde(default = "half")]
        slope: f64,
    },
    /// 3-D helix around the z axis, starting on the x axis.
    Helix {
        #[serde(default = "quarter")]
        radius: f64,
        #[serde(default = "half")]
        height: f64,
        #[serde(default = "one")]
        turns: f64,
    },
    /// Orientation: slerp from `from` to `to` (scalar-first quaternions)
    /// with a wobble of `wobble` rad about the x axis.
    Slerp {
        from: [f64; 4],
        to: [f64; 4],
        #[serde(default)]
        wobble: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn quarter() -> f64 {
    0.25
}

impl Generator {
    pub fn is_orientation(&self) -> bool {
        matches!(self, Generator::Slerp { .. })
    }

    pub fn generate(&self, duration: f64, samples: usize) -> Result<Demonstration> {
        if samples < 2 {
            bail!("a demonstration needs at least 2 samples");
        }
        if !(duration > 0.0) {
            bail!("demonstration duration must be positive");
        }
        let times: Vec<f64> = (0..samples)
            .map(|i| duration * i as f64 / (samples - 1) as f64)
            .collect();
        let u = |j: usize| min_jerk(j as f64 / (samples - 1) as f64);
        let demo = match self {
            Generator::MinJerk { start, goal } => {
                if start.len() != goal.len() || start.is_empty() {
                    bail!("min_jerk start and goal must have the same, non-zero length");
                }
                let pos = DMatrix::from_fn(start.len(), samples, |r, j| {
                    start[r] + (goal[r] - start[r]) * u(j)
                });
                Demonstration::new(times, pos)?
            }
            Generator::SingleHump { start, goal, hump } => {
                let pos = DMatrix::from_fn(1, samples, |_, j| {
                    let s = j as f64 / (samples - 1) as f64;
                    start + (goal - start) * u(j) + hump * bump(s)
                });
                Demonstration::new(times, pos)?
            }
            Generator::SCurve {
                length,
                amplitude,
                slope,
            } => {
                let pos = DMatrix::from_fn(2, samples, |r, j| {
                    let v = u(j);
                    if r == 0 {
                        length * v
                    } else {
                        amplitude * (2.0 * PI * v).sin() + slope * length * v
                    }
                });
                Demonstration::new(times, pos)?
            }
            Generator::Helix {
                radius,
                height,
                turns,
            } => {
                let pos = DMatrix::from_fn(3, samples, |r, j| {
                    let a = 2.0 * PI * turns * u(j);
                    match r {
                        0 => radius * a.cos(),
                        1 => radius * a.sin(),
                        _ => height * u(j),
                    }
                });
                Demonstration::new(times, pos)?
            }
            Generator::Slerp { from, to, wobble } => {
                let q0 = UnitQuaternion::new(from[0], from[1], from[2], from[3]);
                let mut q1 = UnitQuaternion::new(to[0], to[1], to[2], to[3]);
                if q0.dot(&q1) < 0.0 {
                    q1 = -q1;
                }
                let rel = dmpp_core::quaternion::quat_log(&(q1 * q0.conjugate()));
                let qs: Vec<UnitQuaternion> = (0..samples)
                    .map(|j| {
                        let s = j as f64 / (samples - 1) as f64;
                        let base = dmpp_core::quaternion::quat_exp(&(rel * u(j))) * q0;
                        let w = UnitQuaternion::from_axis_angle(&Vector3::x(), wobble * bump(s));
                        w * base
                    })
                    .collect();
                Demonstration::from_orientations(times, &qs)?
            }
        };
        Ok(demo)
    }
}
