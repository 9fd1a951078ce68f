//! Runs a prepared scenario: the main rollout, an optional comparison with
//! another generalisation, and an optional reverse pass.

use std::time::Instant;

use anyhow::{Context, Result};
use dmpp_core::dynamics::{
    orientation_of, run_orientation_rollout, run_rollout_probed, RolloutConfig, StepProbe,
    Trajectory,
};
use dmpp_core::environment::{ForceScript, TargetSchedule};
use dmpp_core::quaternion::quat_log;
use dmpp_core::{Direction, DmpModel, Space};
use nalgebra::DVector;

use crate::metrics::RunMetrics;
use crate::scenario::{GeneralizationTag, Prepared};

/// Wall-clock duration of every adaptation step, in seconds.
#[derive(Debug, Default)]
pub struct LatencyProbe {
    started: Option<Instant>,
    pub samples: Vec<f64>,
}

impl StepProbe for LatencyProbe {
    fn before_adaptation(&mut self) {
        self.started = Some(Instant::now());
    }

    fn after_adaptation(&mut self) {
        if let Some(t0) = self.started.take() {
            self.samples.push(t0.elapsed().as_secs_f64());
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Also run the scene with this generalisation.
    pub compare: Option<GeneralizationTag>,
    /// Force a reverse pass even if the scenario does not ask for one.
    pub reverse: bool,
    pub dt: Option<f64>,
    pub record_debug: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub label: String,
    pub trajectory: Trajectory,
    pub metrics: RunMetrics,
}

pub fn rollout(
    model: &DmpModel,
    config: &RolloutConfig,
    probe: &mut dyn StepProbe,
) -> Result<Trajectory> {
    let t = match model.space() {
        Space::Position => run_rollout_probed(model, config, probe),
        Space::Orientation => run_orientation_rollout(model, config, probe),
    };
    Ok(t?)
}

fn run_one(model: &DmpModel, label: &str, config: &RolloutConfig) -> Result<RunOutput> {
    let mut probe = LatencyProbe::default();
    let trajectory =
        rollout(model, config, &mut probe).with_context(|| format!("rollout `{label}` failed"))?;
    let latency = (!probe.samples.is_empty()).then_some(probe.samples.as_slice());
    let metrics = RunMetrics::compute(label, &trajectory, latency);
    Ok(RunOutput {
        label: label.to_owned(),
        trajectory,
        metrics,
    })
}

/// Configuration that retraces `forward` back to its start, starting from
/// its final weights, with no goal changes, via events or forces.
pub fn reverse_config(
    forward_config: &RolloutConfig,
    forward: &Trajectory,
) -> Option<RolloutConfig> {
    let weights = forward.final_weights.clone()?;
    let last = forward.samples.last()?;
    let end = match forward.space {
        Space::Position => last.y.clone(),
        Space::Orientation => {
            let eta = quat_log(&orientation_of(last));
            DVector::from_column_slice(eta.as_slice())
        }
    };
    let mut c = forward_config.clone();
    c.start = end;
    c.targets = TargetSchedule::fixed(forward_config.start.clone());
    c.direction = match forward_config.direction {
        Direction::Forward => Direction::Reverse,
        Direction::Reverse => Direction::Forward,
    };
    c.prior_weights = Some(weights);
    c.via_events.clear();
    c.forces = ForceScript::default();
    Some(c)
}

/// Runs the scenario and returns one output per rollout, the main one
/// first.
pub fn execute(prepared: &Prepared, opts: &RunOptions) -> Result<Vec<RunOutput>> {
    let tag = prepared.scenario.generalization;
    let mut config = prepared.config.clone();
    if let Some(dt) = opts.dt {
        config.dt = dt;
    }
    config.record_debug = opts.record_debug;

    let main = run_one(&prepared.model, tag.label(), &config)?;
    let mut outputs = Vec::new();
    if prepared.scenario.reverse || opts.reverse {
        if let Some(rev) = reverse_config(&config, &main.trajectory) {
            let label = format!("{}-reverse", tag.label());
            outputs.push(run_one(&prepared.model, &label, &rev)?);
        } else {
            log::warn!("reverse pass needs a DMP++ forward run; skipped");
        }
    }
    outputs.insert(0, main);
    if let Some(other) = opts.compare.filter(|&o| o != tag) {
        let mut c = prepared.config_for(other);
        c.dt = config.dt;
        c.record_debug = opts.record_debug;
        outputs.push(run_one(&prepared.model, other.label(), &c)?);
    }
    Ok(outputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse;
    use std::path::Path;

    const SCENE: &str = r#"
schema_version = 1
name = "r"
goal = [1.5, 0.5]
hold = 0.3
reverse = true
[demo]
synthetic = { generator = "s_curve" }
duration = 1.0
"#;

    #[test]
    fn reverse_and_compare_produce_labelled_runs() {
        let p = parse(SCENE).unwrap().prepare(Path::new(".")).unwrap();
        let opts = RunOptions {
            compare: Some(GeneralizationTag::Classical),
            ..RunOptions::default()
        };
        let out = execute(&p, &opts).unwrap();
        let labels: Vec<&str> = out.iter().map(|o| o.label.as_str()).collect();
        assert_eq!(labels, ["dmpp", "dmpp-reverse", "classical"]);
        assert!(out[0].metrics.endpoint_error < 2e-3);
        // The reverse run ends where the forward run started.
        assert!(out[1].metrics.endpoint_error < 2e-3);
        assert!(out[0].metrics.latency.is_some());
        assert!(out[2].metrics.latency.is_none() && out[2].metrics.residuals.is_none());
    }
}
