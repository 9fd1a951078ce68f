//! Scalar summaries of a rollout.

use dmpp_core::dynamics::Trajectory;
use dmpp_core::quaternion::quat_exp;
use dmpp_core::Space;
use nalgebra::{DVector, Vector3};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ViaError {
    pub id: u64,
    pub phase: f64,
    /// Distance at the sample whose phase is closest to `phase`; radians
    /// for orientations.
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    pub start: [f64; 3],
    pub goal: [f64; 3],
    pub via: f64,
    pub state: [f64; 3],
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LatencyStats {
    pub count: usize,
    pub mean_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
}

impl LatencyStats {
    /// Statistics of per-step durations given in seconds.
    pub fn from_seconds(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = sorted.iter().sum::<f64>() / n as f64;
        Some(Self {
            count: n,
            mean_us: mean * 1e6,
            p99_us: percentile(&sorted, 0.99) * 1e6,
            max_us: sorted[n - 1] * 1e6,
        })
    }
}

/// Nearest-rank percentile of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMetrics {
    pub label: String,
    pub space: &'static str,
    pub ticks: usize,
    pub final_time: f64,
    pub final_phase: f64,
    /// Distance to the final goal; radians for orientations.
    pub endpoint_error: f64,
    pub final_velocity: f64,
    pub via_errors: Vec<ViaError>,
    pub peak_acceleration: f64,
    pub peak_coupling: f64,
    pub peak_repulsion: f64,
    pub min_surface: Vec<f64>,
    pub penetrated: bool,
    /// Only for DMP++ rollouts.
    pub residuals: Option<Residuals>,
    pub latency: Option<LatencyStats>,
}

impl RunMetrics {
    pub fn compute(label: &str, traj: &Trajectory, latency: Option<&[f64]>) -> Self {
        let last = traj.samples.last();
        let space = match traj.space {
            Space::Position => "position",
            Space::Orientation => "orientation",
        };
        let endpoint_error = last.map_or(f64::NAN, |s| distance(traj.space, &s.y, &s.goal));
        let via_errors = traj
            .via_points
            .iter()
            .filter_map(|v| {
                let s = traj
                    .samples
                    .iter()
                    .min_by(|a, b| (a.s - v.phase).abs().total_cmp(&(b.s - v.phase).abs()))?;
                Some(ViaError {
                    id: v.id,
                    phase: v.phase,
                    error: distance(traj.space, &s.y, &v.point),
                })
            })
            .collect();
        let peak = |f: &dyn Fn(&dmpp_core::dynamics::Sample) -> f64| {
            traj.samples.iter().map(f).fold(0.0, f64::max)
        };
        let residuals = traj.final_weights.as_ref().map(|_| {
            let r = traj.max_residuals;
            Residuals {
                start: r.start,
                goal: r.goal,
                via: r.via,
                state: r.state,
            }
        });
        Self {
            label: label.to_owned(),
            space,
            ticks: traj.samples.len(),
            final_time: last.map_or(0.0, |s| s.t),
            final_phase: last.map_or(0.0, |s| s.s),
            endpoint_error,
            final_velocity: last.map_or(0.0, |s| s.dy.norm()),
            via_errors,
            peak_acceleration: peak(&|s| s.ddy.norm()),
            peak_coupling: peak(&|s| s.u.norm()),
            peak_repulsion: peak(&|s| s.repulsion.norm()),
            min_surface: traj.min_surface.clone(),
            penetrated: traj.min_surface.iter().any(|&v| !(v > 0.0)),
            residuals,
            latency: latency.and_then(LatencyStats::from_seconds),
        }
    }

    /// Largest boundary or via residual, together with the state rows
    /// (position, velocity, acceleration) selected by `include_state`.
    pub fn max_residual(&self, include_state: [bool; 3]) -> f64 {
        let Some(r) = &self.residuals else {
            return 0.0;
        };
        let mut m = r.via;
        for (i, &with_state) in include_state.iter().enumerate() {
            m = m.max(r.start[i]).max(r.goal[i]);
            if with_state {
                m = m.max(r.state[i]);
            }
        }
        m
    }
}

/// Position samples compare directly; orientation samples hold a quaternion
/// and the target is a log vector.
fn distance(space: Space, y: &DVector<f64>, target: &DVector<f64>) -> f64 {
    match space {
        Space::Position => (y - target).norm(),
        Space::Orientation => {
            let q = dmpp_core::UnitQuaternion::new(y[0], y[1], y[2], y[3]);
            q.angle_to(&quat_exp(&Vector3::from_column_slice(target.as_slice())))
        }
    }
}

/// Signed deviation of largest magnitude from the chord
/// `v_first + (v_last - v_first) s`, with `phases` and `values` parallel.
pub fn chord_extremum(phases: &[f64], values: &[f64]) -> f64 {
    let (Some(&v0), Some(&v1)) = (values.first(), values.last()) else {
        return 0.0;
    };
    phases
        .iter()
        .zip(values)
        .map(|(&s, &v)| v - (v0 + (v1 - v0) * s))
        .fold(0.0, |m: f64, d| if d.abs() > m.abs() { d } else { m })
}

/// Phase and position of dof `dof` for every sample.
pub fn dof_series(traj: &Trajectory, dof: usize) -> (Vec<f64>, Vec<f64>) {
    traj.samples.iter().map(|s| (s.s, s.y[dof])).unzip()
}

/// Largest one-step change of position and of velocity.
pub fn max_increments(traj: &Trajectory) -> (f64, f64) {
    traj.samples.windows(2).fold((0.0, 0.0), |(dy, dv), w| {
        (
            dy.max((&w[1].y - &w[0].y).norm()),
            dv.max((&w[1].dy - &w[0].dy).norm()),
        )
    })
}

/// Peak acceleration norm within `window` seconds after any of `times`.
pub fn peak_acceleration_after(traj: &Trajectory, times: &[f64], window: f64) -> f64 {
    traj.samples
        .iter()
        .filter(|s| times.iter().any(|&t| s.t >= t && s.t <= t + window))
        .map(|s| s.ddy.norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_uses_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.99), 99.0);
        assert_eq!(percentile(&v, 1.0), 100.0);
        assert_eq!(percentile(&[3.0], 0.5), 3.0);
        let s = LatencyStats::from_seconds(&[1e-6, 3e-6]).unwrap();
        assert!((s.mean_us - 2.0).abs() < 1e-9 && s.max_us == 3.0);
        assert!(LatencyStats::from_seconds(&[]).is_none());
    }

    #[test]
    fn chord_extremum_keeps_sign() {
        let s = [0.0, 0.5, 1.0];
        assert!((chord_extremum(&s, &[0.0, 1.5, 2.0]) - 0.5).abs() < 1e-12);
        assert!((chord_extremum(&s, &[0.0, -0.5, -2.0]) - 0.5).abs() < 1e-12);
        assert!((chord_extremum(&s, &[0.0, -1.5, -2.0]) + 0.5).abs() < 1e-12);
        assert_eq!(chord_extremum(&s, &[1.0, 1.0, 1.0]), 0.0);
    }
}
