mod common;

use dmpp_core::adaptation::{
    batch_solve, penalized_cost, AdaptationConfig, AdaptationState, BatchMethod, BatchProblem,
    PhaseSample, ViaPoint,
};
use dmpp_core::linalg::{min_symmetric_eigenvalue, relative_frobenius};
use dmpp_core::model::{Direction, StateTriplet};
use nalgebra::DVector;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Scenario {
    kernels: usize,
    dofs: usize,
    steps: usize,
    jumps: Vec<(usize, Vec<f64>)>,
    vias: Vec<(usize, usize, f64, Vec<f64>)>,
}

fn scenario() -> impl Strategy<Value = Scenario> {
    (
        prop::sample::select(vec![10usize, 30, 50]),
        prop::sample::select(vec![1usize, 3]),
        100usize..=200,
    )
        .prop_flat_map(|(k, n, steps)| {
            let jump = (1..steps * 3 / 5, prop::collection::vec(-0.5..0.5f64, n));
            let via = (
                1..steps / 2,
                1..steps / 3,
                0.3..0.9f64,
                prop::collection::vec(-0.5..1.5f64, n),
            );
            (
                Just(k),
                Just(n),
                Just(steps),
                prop::collection::vec(jump, 1..=3),
                prop::collection::vec(via, 0..=2),
            )
        })
        .prop_map(|(kernels, dofs, steps, jumps, vias)| Scenario {
            kernels,
            dofs,
            steps,
            jumps,
            vias,
        })
}

fn run(sc: &Scenario) -> (AdaptationState, dmpp_core::DmpModel, f64) {
    let model = common::model(sc.kernels, sc.dofs, 2.0);
    let config = AdaptationConfig {
        record: true,
        ..AdaptationConfig::default()
    };
    let mut goal = DVector::from_element(sc.dofs, 1.0);
    let mut st = AdaptationState::init(
        &model,
        None,
        &StateTriplet::zeros(sc.dofs),
        &goal,
        &[],
        Direction::Forward,
        config,
    )
    .unwrap();
    let sd = 1.0 / model.duration();
    let dt = model.duration() / sc.steps as f64;
    let mut min_eig = f64::INFINITY;
    for i in 1..=sc.steps {
        for (at, delta) in &sc.jumps {
            if *at == i {
                goal += DVector::from_column_slice(delta);
            }
        }
        let mut add = Vec::new();
        let mut remove = Vec::new();
        for (j, (at, len, phase, point)) in sc.vias.iter().enumerate() {
            if *at == i {
                add.push(ViaPoint {
                    id: j as u64,
                    phase: *phase,
                    point: DVector::from_column_slice(point),
                });
            }
            if at + len == i {
                remove.push(j as u64);
            }
        }
        let s = (i as f64 * dt * sd).min(1.0);
        st.step_at(
            &model,
            PhaseSample { s, sd, sdd: 0.0 },
            &goal,
            &add,
            &remove,
            None,
        )
        .unwrap();
        if i % 50 == 0 {
            min_eig = min_eig.min(min_symmetric_eigenvalue(&st.covariance().unwrap()));
        }
    }
    (st, model, min_eig)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn recursion_equals_batch_solution(sc in scenario()) {
        let (st, model, min_eig) = run(&sc);
        let wb = batch_solve(&model, &st.batch_problem().unwrap(), BatchMethod::Penalized).unwrap();
        let err = relative_frobenius(st.weights(), &wb);
        prop_assert!(err < 1e-6, "{err:e} for {sc:?}");
        prop_assert!(min_eig > 0.0);
    }
}

#[test]
fn more_constraints_never_lower_the_optimal_cost() {
    let model = common::model(20, 2, 1.0);
    let st = AdaptationState::init(
        &model,
        None,
        &StateTriplet::zeros(2),
        &DVector::from_row_slice(&[2.0, -1.0]),
        &[],
        Direction::Forward,
        AdaptationConfig {
            record: true,
            ..AdaptationConfig::default()
        },
    )
    .unwrap();
    let full = st.batch_problem().unwrap();
    let mut previous = 0.0;
    for upto in 1..=full.blocks.len() {
        let sub = BatchProblem {
            prior_weights: full.prior_weights.clone(),
            blocks: full.blocks[..upto].to_vec(),
        };
        let w = batch_solve(&model, &sub, BatchMethod::Penalized).unwrap();
        let c = penalized_cost(&model, &sub, &w);
        assert!(c >= previous * (1.0 - 1e-9), "{c} < {previous}");
        previous = c;
    }
}

#[test]
fn exact_and_penalised_solutions_agree_for_tight_constraints() {
    let model = common::model(30, 1, 1.0);
    let st = AdaptationState::init(
        &model,
        None,
        &StateTriplet::zeros(1),
        &DVector::from_element(1, 3.0),
        &[ViaPoint {
            id: 0,
            phase: 0.5,
            point: DVector::from_element(1, 0.2),
        }],
        Direction::Forward,
        AdaptationConfig {
            record: true,
            ..AdaptationConfig::default()
        },
    )
    .unwrap();
    let p = st.batch_problem().unwrap();
    let a = batch_solve(&model, &p, BatchMethod::Penalized).unwrap();
    let b = batch_solve(&model, &p, BatchMethod::ExactKkt).unwrap();
    // Both meet the constraints to within the penalty's slack.
    for w in [&a, &b] {
        let y = model.evaluate_reference(w, 0.5, 0.0, 0.0).y[0];
        assert!((y - 0.2).abs() < 1e-4);
    }
    assert!(relative_frobenius(&a, &b) < 1e-3);
}
