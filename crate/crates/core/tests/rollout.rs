mod common;

use dmpp_core::adaptation::AdaptationConfig;
use dmpp_core::dynamics::{
    run_orientation_rollout, run_rollout, Generalization, RolloutConfig, Trajectory,
};
use dmpp_core::environment::{
    ForcePulse, ForceScript, GoalEvent, Obstacle, PulseProfile, TargetSchedule,
};
use dmpp_core::model::{Demonstration, Direction, DmpModel, Gains, TrainingOptions};
use dmpp_core::quaternion::{quat_log, UnitQuaternion};
use nalgebra::{DMatrix, DVector, Vector3};
use std::f64::consts::PI;

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(v)
}

fn final_error(tr: &Trajectory, goal: &DVector<f64>) -> f64 {
    (&tr.samples.last().unwrap().y - goal).amax()
}

#[test]
fn reaches_new_goal() {
    let model = common::model(30, 2, 1.0);
    let goal = dv(&[2.0, -1.0]);
    let mut cfg = RolloutConfig::new(dv(&[0.0, 0.0]), TargetSchedule::fixed(goal.clone()));
    cfg.hold = 0.5;
    let tr = run_rollout(&model, &cfg).unwrap();
    assert!(final_error(&tr, &goal) < 1e-3 * 2.0);
    let r = tr.max_residuals;
    assert!(r.start[0] < 1e-4 && r.goal[0] < 1e-4, "{r:?}");
}

#[test]
fn goal_jumps_keep_state_continuous() {
    let model = common::model(30, 1, 2.0);
    let targets = TargetSchedule::new(
        dv(&[1.0]),
        vec![
            GoalEvent::Set {
                time: 0.5,
                goal: dv(&[1.5]),
            },
            GoalEvent::Set {
                time: 1.0,
                goal: dv(&[0.6]),
            },
        ],
    )
    .unwrap();
    let mut cfg = RolloutConfig::new(dv(&[0.0]), targets);
    cfg.hold = 1.0;
    let tr = run_rollout(&model, &cfg).unwrap();
    let dt = cfg.dt;
    for w in tr.samples.windows(2) {
        // Velocity changes by at most |ddy| dt; no jumps.
        assert!((w[1].dy[0] - w[0].dy[0]).abs() <= w[0].ddy[0].abs() * dt + 1e-12);
        assert!((w[1].reference.y[0] - w[0].reference.y[0]).abs() < 0.05);
    }
    assert!(final_error(&tr, &dv(&[0.6])) < 1e-3);
}

#[test]
fn reverse_pass_retraces_forward_path() {
    let model = common::model(30, 2, 1.0);
    let start = dv(&[0.0, 0.0]);
    let goal = dv(&[1.5, 0.5]);
    let mut fwd = RolloutConfig::new(start.clone(), TargetSchedule::fixed(goal.clone()));
    fwd.hold = 0.3;
    let a = run_rollout(&model, &fwd).unwrap();
    let wf = a.final_weights.clone().unwrap();

    let end = a.samples.last().unwrap().y.clone();
    let mut rev = RolloutConfig::new(end, TargetSchedule::fixed(start.clone()));
    rev.direction = Direction::Reverse;
    rev.prior_weights = Some(wf);
    rev.hold = 0.3;
    let b = run_rollout(&model, &rev).unwrap();
    assert!(final_error(&b, &start) < 2e-3);

    // Compare positions at equal phase.
    let amp = 1.5;
    let mut worst: f64 = 0.0;
    for sa in a.samples.iter().filter(|s| s.s > 0.02 && s.s < 0.98) {
        let sb = b
            .samples
            .iter()
            .min_by(|x, y| (x.s - sa.s).abs().total_cmp(&(y.s - sa.s).abs()))
            .unwrap();
        worst = worst.max((&sa.reference.y - &sb.reference.y).amax());
    }
    assert!(worst < 5e-3 * amp, "{worst}");
}

fn s_curve_model() -> DmpModel {
    let m = 1000;
    let times: Vec<f64> = (0..m).map(|i| 2.0 * i as f64 / (m - 1) as f64).collect();
    let pos = DMatrix::from_fn(2, m, |r, j| {
        let u = common::min_jerk(j as f64 / (m - 1) as f64);
        if r == 0 {
            u
        } else {
            0.25 * (2.0 * PI * u).sin() + 0.5 * u
        }
    });
    let demo = Demonstration::new(times, pos).unwrap();
    DmpModel::train(
        &demo,
        &TrainingOptions::default(),
        Gains::critically_damped(2, 300.0).unwrap(),
    )
    .unwrap()
    .0
}

fn peak_repulsion(tr: &Trajectory) -> f64 {
    tr.samples
        .iter()
        .map(|s| s.repulsion.norm())
        .fold(0.0, f64::max)
}

#[test]
fn obstacles_are_avoided_and_learned() {
    let model = s_curve_model();
    let start = dv(&[0.0, 0.0]);
    let goal = dv(&[1.0, 0.5]);
    let sigma = DMatrix::from_row_slice(2, 2, &[0.02, 0.0, 0.0, 0.0064]);
    let obstacles = vec![
        Obstacle::ellipsoid(dv(&[0.25, 0.485]), sigma.clone(), 0.5, 1.0).unwrap(),
        Obstacle::ellipsoid(dv(&[0.75, 0.015]), sigma, 0.5, 1.0).unwrap(),
        Obstacle::plane(dv(&[-0.5, 1.0]).normalize(), dv(&[0.0, -0.28]), 0.05, 1.0).unwrap(),
        Obstacle::plane(dv(&[0.5, -1.0]).normalize(), dv(&[0.0, 0.28]), 0.05, 1.0).unwrap(),
    ];
    let run = |generalization: Generalization| {
        let mut fwd = RolloutConfig::new(start.clone(), TargetSchedule::fixed(goal.clone()));
        fwd.obstacles = obstacles.clone();
        fwd.generalization = generalization;
        fwd.hold = 0.3;
        let a = run_rollout(&model, &fwd).unwrap();
        let mut rev = RolloutConfig::new(
            a.samples.last().unwrap().y.clone(),
            TargetSchedule::fixed(start.clone()),
        );
        rev.direction = Direction::Reverse;
        rev.prior_weights = a.final_weights.clone();
        rev.obstacles = obstacles.clone();
        rev.generalization = generalization;
        rev.hold = 0.3;
        let b = run_rollout(&model, &rev).unwrap();
        for tr in [&a, &b] {
            assert!(tr.min_surface.iter().all(|&p| p > 0.0));
        }
        (peak_repulsion(&a), peak_repulsion(&b))
    };
    let (dmpp_fwd, dmpp_rev) = run(Generalization::Dmpp(AdaptationConfig::adapt_to_external()));
    let (classical, _) = run(Generalization::Classical { goal_filter: None });
    assert!(classical > 0.0);
    assert!(dmpp_fwd < classical, "{dmpp_fwd} vs {classical}");
    assert!(dmpp_rev <= dmpp_fwd, "{dmpp_rev} vs {dmpp_fwd}");
}

#[test]
fn external_force_stops_phase() {
    let model = common::model(20, 1, 1.0);
    let mut cfg = RolloutConfig::new(dv(&[0.0]), TargetSchedule::fixed(dv(&[1.0])));
    cfg.forces = ForceScript {
        pulses: vec![ForcePulse {
            start: 0.3,
            end: 0.6,
            force: dv(&[-20.0]),
            profile: PulseProfile::Constant,
        }],
    };
    let tr = run_rollout(&model, &cfg).unwrap();
    let during = tr.samples.iter().find(|s| s.t > 0.55).unwrap();
    assert!(during.sd < 0.1 / model.duration());
    let free = run_rollout(
        &model,
        &RolloutConfig::new(dv(&[0.0]), TargetSchedule::fixed(dv(&[1.0]))),
    )
    .unwrap();
    let same_time = free.samples.iter().find(|s| s.t > 0.55).unwrap();
    assert!(during.s < same_time.s - 0.1);
}

#[test]
fn classical_zero_displacement_fails() {
    let times: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
    let pos = DMatrix::from_fn(1, 200, |_, j| {
        let s = j as f64 / 199.0;
        (std::f64::consts::PI * s).sin()
    });
    let demo = Demonstration::new(times, pos).unwrap();
    let model = DmpModel::train(
        &demo,
        &TrainingOptions::default(),
        Gains::critically_damped(1, 300.0).unwrap(),
    )
    .unwrap()
    .0;
    let mut cfg = RolloutConfig::new(dv(&[0.0]), TargetSchedule::fixed(dv(&[1.0])));
    cfg.generalization = Generalization::Classical { goal_filter: None };
    assert!(run_rollout(&model, &cfg).is_err());
    cfg.generalization = Generalization::default();
    assert!(run_rollout(&model, &cfg).is_ok());
}

#[test]
fn orientation_reaches_target() {
    let axis = Vector3::new(0.3, -0.4, 1.0);
    let times: Vec<f64> = (0..400).map(|i| i as f64 / 399.0).collect();
    let qs: Vec<UnitQuaternion> = times
        .iter()
        .map(|&t| UnitQuaternion::from_axis_angle(&axis, 1.5 * common::min_jerk(t)))
        .collect();
    let demo = Demonstration::from_orientations(times, &qs).unwrap();
    let model = DmpModel::train(
        &demo,
        &TrainingOptions::default(),
        Gains::critically_damped(3, 300.0).unwrap(),
    )
    .unwrap()
    .0;
    let target = UnitQuaternion::from_axis_angle(&Vector3::new(1.0, 0.2, 0.1), 2.0);
    let eta_g = quat_log(&target);
    let mut cfg = RolloutConfig::new(
        DVector::zeros(3),
        TargetSchedule::fixed(DVector::from_column_slice(eta_g.as_slice())),
    );
    cfg.hold = 0.5;
    let tr = run_orientation_rollout(&model, &cfg, &mut ()).unwrap();
    let last = tr.samples.last().unwrap();
    let q = UnitQuaternion::new(last.y[0], last.y[1], last.y[2], last.y[3]);
    assert!(q.angle_to(&target) < 1e-3);
}
