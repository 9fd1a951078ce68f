//! Declarative scenario files (TOML).
//!
//! A scenario names a demonstration (a CSV file or a synthetic generator),
//! the training settings, and everything that happens during the rollout:
//! goal changes, via-point events, obstacles and external force pulses.
//! For orientation demos every point (start, goal, via) is a scalar-first
//! quaternion `[w, x, y, z]`; forces are torques.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use dmpp_core::adaptation::{AdaptationConfig, EpsilonProfile, HistoryMode, RecursionScheme};
use dmpp_core::dynamics::{
    ForceCoupling, Generalization, RolloutConfig, Trigger, ViaAction, ViaEvent,
};
use dmpp_core::environment::{
    ForcePulse, ForceScript, GoalEvent, Obstacle, PulseProfile, TargetSchedule,
};
use dmpp_core::model::{
    Demonstration, Direction, DmpModel, Gains, Space, TrainReport, TrainingOptions,
};
use dmpp_core::quaternion::quat_log;
use dmpp_core::UnitQuaternion;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::generators::Generator;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub demo: DemoSpec,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub generalization: GeneralizationTag,
    /// Goal filter gain `a_g` for `classical+goal_filter`.
    #[serde(default = "default_goal_gain")]
    pub goal_filter_gain: f64,
    #[serde(default)]
    pub history: HistoryTag,
    #[serde(default)]
    pub scheme: SchemeTag,
    #[serde(default)]
    pub epsilon: EpsilonSpec,
    /// Minimum phase advance between two state constraints.
    pub state_gate: Option<f64>,
    /// Defaults to the demonstrated start.
    pub start: Option<Vec<f64>>,
    /// Defaults to the demonstrated goal.
    pub goal: Option<Vec<f64>>,
    #[serde(default)]
    pub direction: DirectionTag,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Execution time; defaults to the demonstrated duration.
    pub duration: Option<f64>,
    /// Simulated time after the nominal duration.
    #[serde(default)]
    pub hold: f64,
    #[serde(default = "default_canonical_gain")]
    pub canonical_gain: f64,
    /// Phase stopping gain; 0 disables phase stopping.
    #[serde(default = "default_phase_stop_gain")]
    pub phase_stop_gain: f64,
    /// Also run a reverse pass that starts from the forward weights.
    #[serde(default)]
    pub reverse: bool,
    #[serde(default)]
    pub goal_events: Vec<GoalEventSpec>,
    #[serde(default)]
    pub via_events: Vec<ViaEventSpec>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub forces: Vec<ForceSpec>,
}

fn default_goal_gain() -> f64 {
    4.0
}
fn default_dt() -> f64 {
    2e-3
}
fn default_canonical_gain() -> f64 {
    40.0
}
fn default_phase_stop_gain() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoSpec {
    /// CSV file, relative to the scenario file.
    pub file: Option<PathBuf>,
    pub synthetic: Option<Generator>,
    /// Duration and sample count of a synthetic demo.
    #[serde(default = "default_demo_duration")]
    pub duration: f64,
    #[serde(default = "default_demo_samples")]
    pub samples: usize,
}

fn default_demo_duration() -> f64 {
    1.0
}
fn default_demo_samples() -> usize {
    500
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub kernels: usize,
    pub width_factor: f64,
    pub ridge: f64,
    /// Diagonal stiffness; damping is critical.
    pub stiffness: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        let t = TrainingOptions::default();
        Self {
            kernels: t.kernels,
            width_factor: t.width_factor,
            ridge: t.ridge,
            stiffness: 300.0,
        }
    }
}

impl ModelSpec {
    pub fn options(&self) -> TrainingOptions {
        TrainingOptions {
            kernels: self.kernels,
            width_factor: self.width_factor,
            ridge: self.ridge,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GeneralizationTag {
    #[default]
    #[serde(rename = "dmpp")]
    Dmpp,
    #[serde(rename = "classical")]
    Classical,
    #[serde(rename = "classical+goal_filter")]
    ClassicalGoalFilter,
}

impl GeneralizationTag {
    pub fn label(self) -> &'static str {
        match self {
            GeneralizationTag::Dmpp => "dmpp",
            GeneralizationTag::Classical => "classical",
            GeneralizationTag::ClassicalGoalFilter => "classical+goal_filter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryTag {
    #[default]
    PreserveLearned,
    AdaptToExternal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeTag {
    #[default]
    Retained,
    NegativeWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionTag {
    #[default]
    Forward,
    Reverse,
}

impl From<DirectionTag> for Direction {
    fn from(d: DirectionTag) -> Self {
        match d {
            DirectionTag::Forward => Direction::Forward,
            DirectionTag::Reverse => Direction::Reverse,
        }
    }
}

/// Per-class overrides of the mode's default tolerances.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSpec {
    pub boundary_pos: Option<f64>,
    pub boundary_vel: Option<f64>,
    pub boundary_acc: Option<f64>,
    pub via: Option<f64>,
    pub state_pos: Option<f64>,
    pub state_vel: Option<f64>,
    pub state_acc: Option<f64>,
}

impl EpsilonSpec {
    fn apply(&self, base: EpsilonProfile) -> EpsilonProfile {
        EpsilonProfile {
            boundary_pos: self.boundary_pos.unwrap_or(base.boundary_pos),
            boundary_vel: self.boundary_vel.unwrap_or(base.boundary_vel),
            boundary_acc: self.boundary_acc.unwrap_or(base.boundary_acc),
            via: self.via.unwrap_or(base.via),
            state_pos: self.state_pos.unwrap_or(base.state_pos),
            state_vel: self.state_vel.unwrap_or(base.state_vel),
            state_acc: self.state_acc.unwrap_or(base.state_acc),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GoalEventSpec {
    Set {
        time: f64,
        goal: Vec<f64>,
    },
    Shift {
        time: f64,
        delta: Vec<f64>,
    },
    Drift {
        start: f64,
        end: f64,
        velocity: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViaEventSpec {
    pub at_time: Option<f64>,
    pub at_phase: Option<f64>,
    pub add: Option<ViaAddSpec>,
    pub remove: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViaAddSpec {
    pub id: u64,
    pub point: Vec<f64>,
    /// Picked from the current path when omitted.
    pub phase: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleSpec {
    Ellipsoid {
        center: Vec<f64>,
        /// Full shape matrix; alternatively `radii` gives a diagonal one.
        sigma: Option<Vec<Vec<f64>>>,
        radii: Option<Vec<f64>>,
        d0: f64,
        #[serde(default = "default_obstacle_gain")]
        gain: f64,
    },
    Plane {
        /// Points into the free side; normalised on load.
        normal: Vec<f64>,
        point: Vec<f64>,
        d0: f64,
        #[serde(default = "default_obstacle_gain")]
        gain: f64,
    },
}

fn default_obstacle_gain() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceSpec {
    pub start: f64,
    pub end: f64,
    pub force: Vec<f64>,
    #[serde(default)]
    pub profile: ProfileTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileTag {
    #[default]
    Constant,
    HalfSine,
}

/// A scenario with its model trained and its rollout configured.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub demo: Demonstration,
    pub model: DmpModel,
    pub train_report: TrainReport,
    pub config: RolloutConfig,
}

impl Prepared {
    pub fn space(&self) -> Space {
        self.model.space()
    }

    /// Rollout configuration for another generalisation of the same scene.
    pub fn config_for(&self, tag: GeneralizationTag) -> RolloutConfig {
        let mut c = self.config.clone();
        c.generalization = self.scenario.generalization_for(tag);
        c
    }
}

pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read scenario {}", path.display()))?;
    parse(&text).with_context(|| format!("invalid scenario {}", path.display()))
}

pub fn parse(text: &str) -> Result<Scenario> {
    let s: Scenario = toml::from_str(text)?;
    s.check()?;
    Ok(s)
}

impl Scenario {
    /// Schema checks that do not need the demonstration.
    pub fn check(&self) -> Result<()> {
        ensure!(
            self.schema_version == SCHEMA_VERSION,
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            self.schema_version
        );
        ensure!(
            !self.name.trim().is_empty(),
            "scenario name must not be empty"
        );
        ensure!(
            self.demo.file.is_some() != self.demo.synthetic.is_some(),
            "[demo] needs exactly one of `file` or `synthetic`"
        );
        ensure!(self.dt > 0.0 && self.dt.is_finite(), "dt must be positive");
        ensure!(self.hold >= 0.0, "hold must be non-negative");
        ensure!(
            self.goal_filter_gain > 0.0,
            "goal_filter_gain must be positive"
        );
        for v in &self.via_events {
            ensure!(
                v.at_time.is_some() != v.at_phase.is_some(),
                "each via event needs exactly one of `at_time` or `at_phase`"
            );
            ensure!(
                v.add.is_some() != v.remove.is_some(),
                "each via event needs exactly one of `add` or `remove`"
            );
        }
        for f in &self.forces {
            ensure!(f.end > f.start, "force pulse must end after it starts");
        }
        self.adaptation_config().validate()?;
        Ok(())
    }

    pub fn adaptation_config(&self) -> AdaptationConfig {
        let base = match self.history {
            HistoryTag::PreserveLearned => AdaptationConfig::default(),
            HistoryTag::AdaptToExternal => AdaptationConfig::adapt_to_external(),
        };
        AdaptationConfig {
            epsilon: self.epsilon.apply(base.epsilon),
            mode: match self.history {
                HistoryTag::PreserveLearned => HistoryMode::PreserveLearned,
                HistoryTag::AdaptToExternal => HistoryMode::AdaptToExternal,
            },
            scheme: match self.scheme {
                SchemeTag::Retained => RecursionScheme::Retained,
                SchemeTag::NegativeWeight => RecursionScheme::NegativeWeight,
            },
            state_gate: self.state_gate.unwrap_or(base.state_gate),
            ..base
        }
    }

    pub fn generalization_for(&self, tag: GeneralizationTag) -> Generalization {
        match tag {
            GeneralizationTag::Dmpp => Generalization::Dmpp(self.adaptation_config()),
            GeneralizationTag::Classical => Generalization::Classical { goal_filter: None },
            GeneralizationTag::ClassicalGoalFilter => Generalization::Classical {
                goal_filter: Some(self.goal_filter_gain),
            },
        }
    }

    pub fn load_demo(&self, base_dir: &Path) -> Result<Demonstration> {
        match (&self.demo.file, &self.demo.synthetic) {
            (Some(f), None) => crate::io::read_demo(&base_dir.join(f)),
            (None, Some(g)) => g.generate(self.demo.duration, self.demo.samples),
            _ => bail!("[demo] needs exactly one of `file` or `synthetic`"),
        }
    }

    /// Loads the demo, trains the model and builds the rollout.
    pub fn prepare(&self, base_dir: &Path) -> Result<Prepared> {
        let demo = self.load_demo(base_dir)?;
        let n = demo.dofs();
        let gains = Gains::critically_damped(n, self.model.stiffness)?;
        let (model, train_report) =
            DmpModel::train(&demo, &self.model.options(), gains).context("training failed")?;
        let space = demo.space();
        let point = |name: &str, v: &[f64]| to_model_space(space, n, name, v);
        let delta = |name: &str, v: &[f64]| -> Result<DVector<f64>> {
            ensure!(v.len() == n, "`{name}` must have {n} entries");
            Ok(DVector::from_column_slice(v))
        };

        let (demo_start, demo_goal) = demo.endpoints();
        let start = match &self.start {
            Some(v) => point("start", v)?,
            None => demo_start,
        };
        let goal = match &self.goal {
            Some(v) => point("goal", v)?,
            None => demo_goal,
        };
        let mut events = Vec::new();
        for e in &self.goal_events {
            events.push(match e {
                GoalEventSpec::Set { time, goal } => GoalEvent::Set {
                    time: *time,
                    goal: point("goal_events.goal", goal)?,
                },
                GoalEventSpec::Shift { time, delta: d } => GoalEvent::Shift {
                    time: *time,
                    delta: delta("goal_events.delta", d)?,
                },
                GoalEventSpec::Drift {
                    start,
                    end,
                    velocity,
                } => GoalEvent::Drift {
                    start: *start,
                    end: *end,
                    velocity: delta("goal_events.velocity", velocity)?,
                },
            });
        }
        let targets = TargetSchedule::new(goal, events)?;

        let mut config = RolloutConfig::new(start, targets);
        config.dt = self.dt;
        config.direction = self.direction.into();
        config.duration = self.duration;
        config.hold = self.hold;
        config.canonical_gain = self.canonical_gain;
        config.phase_stop_gain = self.phase_stop_gain;
        config.generalization = self.generalization_for(self.generalization);
        if space == Space::Orientation {
            config.coupling = ForceCoupling::orientation();
        }
        for v in &self.via_events {
            let trigger = match (v.at_time, v.at_phase) {
                (Some(t), None) => Trigger::Time(t),
                (None, Some(s)) => Trigger::Phase(s),
                _ => bail!("each via event needs exactly one of `at_time` or `at_phase`"),
            };
            let action = match (&v.add, v.remove) {
                (Some(a), None) => ViaAction::Add {
                    id: a.id,
                    point: point("via point", &a.point)?,
                    phase: a.phase,
                },
                (None, Some(id)) => ViaAction::Remove { id },
                _ => bail!("each via event needs exactly one of `add` or `remove`"),
            };
            config.via_events.push(ViaEvent { trigger, action });
        }
        for o in &self.obstacles {
            config.obstacles.push(build_obstacle(o, n)?);
        }
        let mut pulses = Vec::new();
        for f in &self.forces {
            pulses.push(ForcePulse {
                start: f.start,
                end: f.end,
                force: delta("forces.force", &f.force)?,
                profile: match f.profile {
                    ProfileTag::Constant => PulseProfile::Constant,
                    ProfileTag::HalfSine => PulseProfile::HalfSine,
                },
            });
        }
        config.forces = ForceScript { pulses };

        Ok(Prepared {
            scenario: self.clone(),
            demo,
            model,
            train_report,
            config,
        })
    }
}

/// Positions pass through; orientations are given as quaternions and
/// mapped to the log space of the model.
fn to_model_space(space: Space, n: usize, name: &str, v: &[f64]) -> Result<DVector<f64>> {
    match space {
        Space::Position => {
            ensure!(
                v.len() == n,
                "`{name}` must have {n} entries, found {}",
                v.len()
            );
            Ok(DVector::from_column_slice(v))
        }
        Space::Orientation => {
            ensure!(
                v.len() == 4,
                "`{name}` must be a quaternion [w, x, y, z] for an orientation demo"
            );
            let q = UnitQuaternion::new(v[0], v[1], v[2], v[3]);
            Ok(DVector::from_column_slice(quat_log(&q).as_slice()))
        }
    }
}

fn build_obstacle(spec: &ObstacleSpec, n: usize) -> Result<Obstacle> {
    let vec = |name: &str, v: &[f64]| -> Result<DVector<f64>> {
        ensure!(v.len() == n, "obstacle `{name}` must have {n} entries");
        Ok(DVector::from_column_slice(v))
    };
    Ok(match spec {
        ObstacleSpec::Ellipsoid {
            center,
            sigma,
            radii,
            d0,
            gain,
        } => {
            let sigma = match (sigma, radii) {
                (Some(rows), None) => {
                    ensure!(
                        rows.len() == n && rows.iter().all(|r| r.len() == n),
                        "obstacle `sigma` must be {n}x{n}"
                    );
                    DMatrix::from_fn(n, n, |i, j| rows[i][j])
                }
                (None, Some(r)) => {
                    let r = vec("radii", r)?;
                    DMatrix::from_diagonal(&r.component_mul(&r))
                }
                _ => bail!("an ellipsoid needs exactly one of `sigma` or `radii`"),
            };
            Obstacle::ellipsoid(vec("center", center)?, sigma, *d0, *gain)?
        }
        ObstacleSpec::Plane {
            normal,
            point,
            d0,
            gain,
        } => {
            let normal = vec("normal", normal)?;
            ensure!(normal.norm() > 0.0, "plane normal must be non-zero");
            Obstacle::plane(normal.normalize(), vec("point", point)?, *d0, *gain)?
        }
    })
}
