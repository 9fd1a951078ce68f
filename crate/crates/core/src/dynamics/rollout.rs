use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, Vector3};

use super::{step_orientation, step_transformation, ForceCoupling, OrientationState, PhaseState};
use crate::adaptation::{
    via_phase_heuristic, AdaptationConfig, AdaptationState, ConstraintResiduals, StepInput,
    StepReport, ViaPoint,
};
use crate::baselines::{goal_filter_step, ClassicalReference};
use crate::basis::BasisValues;
use crate::environment::{ForceScript, Obstacle, TargetSchedule};
use crate::error::{check_dim, invalid, Error, Result};
use crate::model::{reference_from_values, Direction, DmpModel, Space, StateTriplet};
use crate::quaternion::{eta_from_omega, omega_from_eta, quat_exp, quat_log, UnitQuaternion};

/// How the primitive is generalised to new goals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generalization {
    /// Online constrained weight adaptation.
    Dmpp(AdaptationConfig),
    /// Goal-scaled classical reference, optionally with a first-order goal
    /// filter of gain `a_g`.
    Classical { goal_filter: Option<f64> },
}

impl Default for Generalization {
    fn default() -> Self {
        Generalization::Dmpp(AdaptationConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trigger {
    Time(f64),
    /// Fires once the phase has reached this value.
    Phase(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViaAction {
    /// Without a phase the closest point of the current path is used.
    Add {
        id: u64,
        point: DVector<f64>,
        phase: Option<f64>,
    },
    Remove {
        id: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViaEvent {
    pub trigger: Trigger,
    pub action: ViaAction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutConfig {
    pub dt: f64,
    pub direction: Direction,
    /// Execution time; the trained duration when `None`.
    pub duration: Option<f64>,
    /// Extra simulated time after the nominal duration.
    pub hold: f64,
    pub start: DVector<f64>,
    pub targets: TargetSchedule,
    pub via_events: Vec<ViaEvent>,
    pub obstacles: Vec<Obstacle>,
    pub forces: ForceScript,
    pub coupling: ForceCoupling,
    /// Phase convergence gain `d`.
    pub canonical_gain: f64,
    /// Phase stopping gain `a_d`; zero disables phase stopping.
    pub phase_stop_gain: f64,
    /// Weights to start from instead of the trained ones.
    pub prior_weights: Option<DMatrix<f64>>,
    pub generalization: Generalization,
    pub record_debug: bool,
}

impl RolloutConfig {
    pub fn new(start: DVector<f64>, targets: TargetSchedule) -> Self {
        Self {
            dt: 2e-3,
            direction: Direction::Forward,
            duration: None,
            hold: 0.0,
            start,
            targets,
            via_events: Vec::new(),
            obstacles: Vec::new(),
            forces: ForceScript::default(),
            coupling: ForceCoupling::position(),
            canonical_gain: 40.0,
            phase_stop_gain: 1.0,
            prior_weights: None,
            generalization: Generalization::default(),
            record_debug: false,
        }
    }

    fn validate(&self, model: &DmpModel) -> Result<()> {
        let n = model.dofs();
        check_dim("start", n, self.start.len())?;
        check_dim("goal", n, self.targets.initial().len())?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("time step must be positive"));
        }
        if !(self.hold >= 0.0) {
            return Err(invalid("hold time must be non-negative"));
        }
        if let Some(d) = self.duration {
            if !(d > 0.0) {
                return Err(invalid("duration must be positive"));
            }
        }
        for o in &self.obstacles {
            check_dim("obstacle", n, o.dofs())?;
        }
        for p in &self.forces.pulses {
            check_dim("force pulse", n, p.force.len())?;
        }
        if let Generalization::Classical {
            goal_filter: Some(a),
        } = self.generalization
        {
            if !(a > 0.0) {
                return Err(invalid("goal filter gain must be positive"));
            }
        }
        Ok(())
    }
}

/// One recorded control tick. For orientation rollouts `y` holds the
/// quaternion `[w, x, y, z]`, `dy` the angular velocity and `ddy` the angular
/// acceleration; the reference follows the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub s: f64,
    pub sd: f64,
    pub y: DVector<f64>,
    pub dy: DVector<f64>,
    pub ddy: DVector<f64>,
    pub reference: StateTriplet,
    /// Total coupling term `u`.
    pub u: DVector<f64>,
    pub repulsion: DVector<f64>,
    pub external: DVector<f64>,
    pub goal: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DebugRecord {
    pub step: usize,
    pub t: f64,
    pub s: f64,
    pub report: StepReport,
    pub residuals: ConstraintResiduals,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub space: Space,
    pub samples: Vec<Sample>,
    /// Weights at the end of a DMP++ run.
    pub final_weights: Option<DMatrix<f64>>,
    /// Per-class maximum residual over all adaptation steps.
    pub max_residuals: ConstraintResiduals,
    /// Minimum surface value per obstacle.
    pub min_surface: Vec<f64>,
    /// Via-points with the phase they were assigned.
    pub via_points: Vec<ViaPoint>,
    pub debug: Vec<DebugRecord>,
}

/// Hooks around each adaptation step, used for latency measurements.
pub trait StepProbe {
    fn before_adaptation(&mut self) {}
    fn after_adaptation(&mut self) {}
}

impl StepProbe for () {}

enum Generator {
    Dmpp(Box<AdaptationState>),
    Classical {
        reference: ClassicalReference,
        filtered: DVector<f64>,
        filter: Option<f64>,
    },
}

/// Via-point events that have fired so far.
struct ViaTracker {
    fired: Vec<bool>,
    vias: Vec<ViaPoint>,
}

impl ViaTracker {
    /// Events due at time `t` / phase `s`, resolved to via-points.
    fn due(
        &mut self,
        model: &DmpModel,
        config: &RolloutConfig,
        t: f64,
        s: f64,
        weights: &DMatrix<f64>,
    ) -> Result<(Vec<ViaPoint>, Vec<u64>)> {
        let dir = config.direction;
        let mut add = Vec::new();
        let mut remove = Vec::new();
        for (i, e) in config.via_events.iter().enumerate() {
            if self.fired[i] {
                continue;
            }
            let due = match e.trigger {
                Trigger::Time(at) => at <= t + 1e-12,
                Trigger::Phase(at) => (s - at) * dir.sign() >= -1e-12,
            };
            if !due {
                continue;
            }
            self.fired[i] = true;
            match &e.action {
                ViaAction::Add { id, point, phase } => {
                    let phase = match phase {
                        Some(p) => *p,
                        None => via_phase_heuristic(model.basis(), weights, point, s, dir)?,
                    };
                    let v = ViaPoint {
                        id: *id,
                        phase,
                        point: point.clone(),
                    };
                    self.vias.push(v.clone());
                    add.push(v);
                }
                ViaAction::Remove { id } => remove.push(*id),
            }
        }
        Ok((add, remove))
    }
}

/// Goal, via-point and adaptation bookkeeping shared by both rollouts.
struct Driver<'a> {
    model: &'a DmpModel,
    config: &'a RolloutConfig,
    generator: Generator,
    tracker: ViaTracker,
    residuals: ConstraintResiduals,
    debug: Vec<DebugRecord>,
}

impl<'a> Driver<'a> {
    fn new(model: &'a DmpModel, config: &'a RolloutConfig) -> Result<Self> {
        config.validate(model)?;
        let goal = config.targets.goal_at(0.0);
        let mut tracker = ViaTracker {
            fired: alloc::vec![false; config.via_events.len()],
            vias: Vec::new(),
        };
        let mut residuals = ConstraintResiduals::default();
        let generator = match config.generalization {
            Generalization::Dmpp(adapt) => {
                let s0 = config.direction.start_phase();
                let prior = config.prior_weights.as_ref().unwrap_or(model.weights());
                let (add, _) = tracker.due(model, config, 0.0, s0, prior)?;
                let state = AdaptationState::init(
                    model,
                    Some(prior),
                    &StateTriplet::at_rest(config.start.clone()),
                    &goal,
                    &add,
                    config.direction,
                    adapt,
                )?;
                residuals = state.residuals();
                Generator::Dmpp(Box::new(state))
            }
            Generalization::Classical { goal_filter } => {
                if !config.via_events.is_empty() {
                    log::warn!("via-point events are ignored by the classical reference");
                }
                Generator::Classical {
                    reference: ClassicalReference::new(
                        model,
                        &config.start,
                        &goal,
                        config.direction,
                    )?,
                    filtered: goal,
                    filter: goal_filter,
                }
            }
        };
        Ok(Self {
            model,
            config,
            generator,
            tracker,
            residuals,
            debug: Vec::new(),
        })
    }

    /// Runs the adaptation for tick `k` and returns the reference.
    fn reference(
        &mut self,
        k: usize,
        t: f64,
        phase: &PhaseState,
        values: &BasisValues,
        measured: Option<&StateTriplet>,
        probe: &mut dyn StepProbe,
    ) -> Result<StateTriplet> {
        let goal = self.config.targets.goal_at(t);
        let model = self.model;
        let dt = self.config.dt;
        let record = self.config.record_debug;
        if let Generator::Dmpp(state) = &self.generator {
            if k > 0 {
                let weights = state.weights().clone();
                let (add, remove) = self.tracker.due(model, self.config, t, phase.s, &weights)?;
                let Generator::Dmpp(state) = &mut self.generator else {
                    unreachable!()
                };
                probe.before_adaptation();
                let report = state.step(
                    model,
                    &StepInput {
                        phase: phase.sample(),
                        basis: values,
                        goal: &goal,
                        add: &add,
                        remove: &remove,
                        measured,
                    },
                )?;
                probe.after_adaptation();
                let r = state.residuals();
                self.residuals.max_with(&r);
                if record {
                    self.debug.push(DebugRecord {
                        step: k,
                        t,
                        s: phase.s,
                        report,
                        residuals: r,
                    });
                }
            }
        }
        match &mut self.generator {
            Generator::Dmpp(state) => Ok(reference_from_values(
                state.weights(),
                values,
                phase.sd,
                phase.sdd,
            )),
            Generator::Classical {
                reference,
                filtered,
                filter,
            } => {
                match filter {
                    Some(a) if k > 0 => goal_filter_step(filtered, &goal, *a, dt),
                    Some(_) => {}
                    None => filtered.copy_from(&goal),
                }
                reference.set_goal(filtered)?;
                Ok(reference.evaluate(model, values, phase.sd, phase.sdd))
            }
        }
    }

    fn final_weights(&self) -> Option<DMatrix<f64>> {
        match &self.generator {
            Generator::Dmpp(s) => Some(s.weights().clone()),
            Generator::Classical { .. } => None,
        }
    }
}

fn tick_count(model: &DmpModel, config: &RolloutConfig) -> (f64, usize) {
    let duration = config.duration.unwrap_or(model.duration());
    let total = duration + config.hold;
    (duration, (total / config.dt - 1e-9).ceil() as usize)
}

pub fn run_rollout(model: &DmpModel, config: &RolloutConfig) -> Result<Trajectory> {
    run_rollout_probed(model, config, &mut ())
}

/// Closed-loop rollout of a position primitive.
pub fn run_rollout_probed(
    model: &DmpModel,
    config: &RolloutConfig,
    probe: &mut dyn StepProbe,
) -> Result<Trajectory> {
    if model.space() == Space::Orientation {
        return Err(invalid(
            "use run_orientation_rollout for orientation primitives",
        ));
    }
    let mut driver = Driver::new(model, config)?;
    let n = model.dofs();
    let (duration, ticks) = tick_count(model, config);
    let gains = model.gains();
    let dt = config.dt;
    let mut phase = PhaseState::start(config.direction, duration, config.canonical_gain);
    let mut state = StateTriplet::at_rest(config.start.clone());
    let mut values = BasisValues::zeros(model.kernels());
    let mut samples = Vec::with_capacity(ticks + 1);
    let mut min_surface = alloc::vec![f64::INFINITY; config.obstacles.len()];

    for k in 0..=ticks {
        let t = k as f64 * dt;
        model.basis().eval_into(phase.s, &mut values);
        let reference = driver.reference(k, t, &phase, &values, Some(&state), probe)?;

        let mut repulsion = DVector::zeros(n);
        for (i, o) in config.obstacles.iter().enumerate() {
            min_surface[i] = min_surface[i].min(o.surface_value(&state.y));
            repulsion += o.repulsive_force(&state.y, i)?;
        }
        let external = config.forces.force_at(t, n);
        let u = &repulsion + config.coupling.coupling(&external, &reference.ddy);
        let next = step_transformation(gains, &state, &reference, &u, dt)?;
        if next.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("rollout state"));
        }
        samples.push(Sample {
            t,
            s: phase.s,
            sd: phase.sd,
            y: state.y.clone(),
            dy: state.dy.clone(),
            ddy: next.ddy.clone(),
            reference,
            u,
            repulsion,
            external: external.clone(),
            goal: config.targets.goal_at(t),
        });
        // `state.ddy` now holds the acceleration of this tick, which is the
        // measured `ddy_{j-1}` at the next one.
        state = next;
        phase = phase.step_canonical(dt, external.norm(), config.phase_stop_gain);
    }

    Ok(Trajectory {
        space: Space::Position,
        samples,
        final_weights: driver.final_weights(),
        max_residuals: driver.residuals,
        min_surface,
        via_points: driver.tracker.vias,
        debug: driver.debug,
    })
}

/// Closed-loop rollout of an orientation primitive. Goals, via-points and
/// the start are given in log space; external forces are torques.
pub fn run_orientation_rollout(
    model: &DmpModel,
    config: &RolloutConfig,
    probe: &mut dyn StepProbe,
) -> Result<Trajectory> {
    if model.space() != Space::Orientation {
        return Err(invalid(
            "run_orientation_rollout needs an orientation primitive",
        ));
    }
    if !config.obstacles.is_empty() {
        return Err(invalid(format!(
            "obstacles are not supported for orientation primitives ({} given)",
            config.obstacles.len()
        )));
    }
    let mut driver = Driver::new(model, config)?;
    let (duration, ticks) = tick_count(model, config);
    let gains = model.gains();
    let dt = config.dt;
    let mut phase = PhaseState::start(config.direction, duration, config.canonical_gain);
    let mut state = OrientationState::at_rest(quat_exp(&Vector3::from_column_slice(
        config.start.as_slice(),
    )));
    let mut values = BasisValues::zeros(model.kernels());
    let mut samples = Vec::with_capacity(ticks + 1);
    let mut prev_eta = Vector3::from_column_slice(config.start.as_slice());

    for k in 0..=ticks {
        let t = k as f64 * dt;
        model.basis().eval_into(phase.s, &mut values);

        // Measured state in log space, on the branch closest to the last one.
        let mut q = state.q;
        if q.dot(&quat_exp(&prev_eta)) < 0.0 {
            q = -q;
        }
        let eta = quat_log(&q);
        let (eta_dot, eta_ddot) = eta_from_omega(&eta, &state.omega, &state.omega_dot);
        let measured = StateTriplet {
            y: DVector::from_column_slice(eta.as_slice()),
            dy: DVector::from_column_slice(eta_dot.as_slice()),
            ddy: DVector::from_column_slice(eta_ddot.as_slice()),
        };
        prev_eta = eta;

        let r = driver.reference(k, t, &phase, &values, Some(&measured), probe)?;
        let eta_s = Vector3::from_column_slice(r.y.as_slice());
        let (omega_s, omega_dot_s) = omega_from_eta(
            &eta_s,
            &Vector3::from_column_slice(r.dy.as_slice()),
            &Vector3::from_column_slice(r.ddy.as_slice()),
        );
        let reference = OrientationState {
            q: quat_exp(&eta_s),
            omega: omega_s,
            omega_dot: omega_dot_s,
        };
        let torque = config.forces.force_at(t, 3);
        let omega_dot_dv = DVector::from_column_slice(omega_dot_s.as_slice());
        let u = config.coupling.coupling(&torque, &omega_dot_dv);
        let u3 = Vector3::from_column_slice(u.as_slice());
        let next = step_orientation(gains, &state, &reference, &u3, dt)?;

        samples.push(Sample {
            t,
            s: phase.s,
            sd: phase.sd,
            y: DVector::from_row_slice(&state.q.coords()),
            dy: DVector::from_column_slice(state.omega.as_slice()),
            ddy: DVector::from_column_slice(next.omega_dot.as_slice()),
            reference: StateTriplet {
                y: DVector::from_row_slice(&reference.q.coords()),
                dy: DVector::from_column_slice(omega_s.as_slice()),
                ddy: omega_dot_dv,
            },
            u,
            repulsion: DVector::zeros(3),
            external: torque.clone(),
            goal: config.targets.goal_at(t),
        });
        state = next;
        phase = phase.step_canonical(dt, torque.norm(), config.phase_stop_gain);
    }

    Ok(Trajectory {
        space: Space::Orientation,
        samples,
        final_weights: driver.final_weights(),
        max_residuals: driver.residuals,
        min_surface: Vec::new(),
        via_points: driver.tracker.vias,
        debug: driver.debug,
    })
}

/// Current orientation as a quaternion from a log-space sample.
pub fn orientation_of(sample: &Sample) -> UnitQuaternion {
    UnitQuaternion::new(sample.y[0], sample.y[1], sample.y[2], sample.y[3])
}
