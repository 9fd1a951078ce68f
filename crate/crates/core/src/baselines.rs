//! Classical goal-scaled reference and first-order goal filtering, used for
//! comparison.

use nalgebra::DVector;

use crate::basis::BasisValues;
use crate::error::{check_dim, Error, Result};
use crate::model::{reference_from_values, Direction, DmpModel, StateTriplet};

/// `y_s = K_s (f(s) - f(s_0)) + y_0` with the diagonal scaling
/// `K_s = (g - y_0) / (f(s_end) - f(s_0))` applied to the trained path `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalReference {
    start: DVector<f64>,
    anchor: DVector<f64>,
    displacement: DVector<f64>,
    scaling: DVector<f64>,
}

impl ClassicalReference {
    pub fn new(
        model: &DmpModel,
        start: &DVector<f64>,
        goal: &DVector<f64>,
        direction: Direction,
    ) -> Result<Self> {
        let n = model.dofs();
        check_dim("start", n, start.len())?;
        let w = model.weights();
        let anchor = model
            .evaluate_reference(w, direction.start_phase(), 0.0, 0.0)
            .y;
        let end = model
            .evaluate_reference(w, direction.end_phase(), 0.0, 0.0)
            .y;
        let displacement = end - &anchor;
        let scale = anchor.amax().max(1.0);
        for i in 0..n {
            if displacement[i].abs() <= 1e-12 * scale {
                return Err(Error::ScalingSingularity { dof: i });
            }
        }
        let mut r = Self {
            start: start.clone(),
            anchor,
            displacement,
            scaling: DVector::zeros(n),
        };
        r.set_goal(goal)?;
        Ok(r)
    }

    pub fn set_goal(&mut self, goal: &DVector<f64>) -> Result<()> {
        check_dim("goal", self.start.len(), goal.len())?;
        self.scaling = (goal - &self.start).component_div(&self.displacement);
        Ok(())
    }

    pub fn scaling(&self) -> &DVector<f64> {
        &self.scaling
    }

    /// Reference at the phase described by `values`; changes of the scaling
    /// over time are not differentiated.
    pub fn evaluate(
        &self,
        model: &DmpModel,
        values: &BasisValues,
        sd: f64,
        sdd: f64,
    ) -> StateTriplet {
        let f = reference_from_values(model.weights(), values, sd, sdd);
        StateTriplet {
            y: (f.y - &self.anchor).component_mul(&self.scaling) + &self.start,
            dy: f.dy.component_mul(&self.scaling),
            ddy: f.ddy.component_mul(&self.scaling),
        }
    }
}

/// One forward-Euler step of `g_dot = a_g (g_target - g)`.
pub fn goal_filter_step(g: &mut DVector<f64>, target: &DVector<f64>, gain: f64, dt: f64) {
    let step = (gain * dt).min(1.0);
    *g += (target - &*g) * step;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Demonstration, Gains, TrainingOptions};
    use alloc::vec::Vec;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn model(displacement: f64, hump: f64) -> DmpModel {
        let m = 200;
        let times: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
        let pos = DMatrix::from_fn(1, m, |_, j| {
            let s = j as f64 / (m - 1) as f64;
            displacement * s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
                + hump * 64.0 * (s * (1.0 - s)).powi(3)
        });
        let demo = Demonstration::new(times, pos).unwrap();
        DmpModel::train(
            &demo,
            &TrainingOptions::default(),
            Gains::critically_damped(1, 300.0).unwrap(),
        )
        .unwrap()
        .0
    }

    #[test]
    fn reproduces_demo_for_demo_goal() {
        let m = model(1.0, 0.3);
        let y0 = m.evaluate_reference(m.weights(), 0.0, 0.0, 0.0).y;
        let g = m.evaluate_reference(m.weights(), 1.0, 0.0, 0.0).y;
        let r = ClassicalReference::new(&m, &y0, &g, Direction::Forward).unwrap();
        assert_relative_eq!(r.scaling()[0], 1.0, epsilon = 1e-12);
        let v = m.basis().eval(0.37);
        let a = r.evaluate(&m, &v, 1.0, 0.0);
        let b = m.evaluate_reference(m.weights(), 0.37, 1.0, 0.0);
        assert_relative_eq!(a.y, b.y, epsilon = 1e-12);
    }

    #[test]
    fn zero_displacement_is_singular() {
        let m = model(0.0, 0.5);
        let r = ClassicalReference::new(
            &m,
            &DVector::zeros(1),
            &DVector::from_element(1, 1.0),
            Direction::Forward,
        );
        assert!(matches!(r, Err(Error::ScalingSingularity { dof: 0 })));
    }

    #[test]
    fn equal_start_and_goal_flattens_path() {
        let m = model(1.0, 0.5);
        let r = ClassicalReference::new(
            &m,
            &DVector::zeros(1),
            &DVector::zeros(1),
            Direction::Forward,
        )
        .unwrap();
        let a = r.evaluate(&m, &m.basis().eval(0.5), 1.0, 0.0);
        assert_eq!(a.y[0], 0.0);
    }

    #[test]
    fn goal_filter_converges_exponentially() {
        let mut g = DVector::zeros(1);
        let target = DVector::from_element(1, 1.0);
        let dt = 1e-3;
        for _ in 0..250 {
            goal_filter_step(&mut g, &target, 4.0, dt);
        }
        // One time constant 1 / a_g.
        assert_relative_eq!(g[0], 1.0 - (-1.0f64).exp(), epsilon = 1e-3);
    }
}
