//! Direct (non-recursive) solutions of the constrained weight problem, used
//! as a reference for the recursive estimate.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use super::ConstraintBlock;
use crate::error::{check_dim, Error, Result};
use crate::linalg::lstsq_svd;
use crate::model::{absolute_ridge, acceleration_gram, uniform_phases, DmpModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchMethod {
    /// Minimise the prior cost plus `sum ||(Z - W^T H) R^{-1/2}||^2`, which
    /// is what the recursion computes.
    #[default]
    Penalized,
    /// Enforce `W^T H = Z` exactly; needs `H` to have full column rank.
    ExactKkt,
}

/// Prior weights and every constraint active at some step.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchProblem {
    pub prior_weights: DMatrix<f64>,
    pub blocks: Vec<ConstraintBlock>,
}

impl BatchProblem {
    pub fn stacked(&self) -> ConstraintBlock {
        let refs: Vec<&ConstraintBlock> = self.blocks.iter().collect();
        ConstraintBlock::concat(&refs)
    }
}

/// Rows `L^T` with `L L^T = G + lambda I` built from the acceleration grid.
fn prior_rows(model: &DmpModel) -> DMatrix<f64> {
    let m = model.accel_samples();
    let k = model.kernels();
    let d2 = model.basis().design_d2(&uniform_phases(m));
    let lambda = absolute_ridge(&acceleration_gram(model.basis(), m), model.ridge());
    let mut rows = DMatrix::zeros(m + k, k);
    rows.rows_mut(0, m)
        .copy_from(&(d2.transpose() / (m as f64).sqrt()));
    rows.rows_mut(m, k)
        .copy_from(&(DMatrix::identity(k, k) * lambda.sqrt()));
    rows
}

pub fn batch_solve(
    model: &DmpModel,
    problem: &BatchProblem,
    method: BatchMethod,
) -> Result<DMatrix<f64>> {
    let k = model.kernels();
    let w0 = &problem.prior_weights;
    check_dim("prior weight rows", k, w0.nrows())?;
    let all = problem.stacked();
    check_dim("constraint regressor rows", k, all.regressors.nrows())?;
    check_dim("constraint target rows", w0.ncols(), all.targets.nrows())?;
    match method {
        BatchMethod::Penalized => {
            let prior = prior_rows(model);
            let p = prior.nrows();
            let l = all.len();
            let mut a = DMatrix::zeros(p + l, k);
            let mut b = DMatrix::zeros(p + l, w0.ncols());
            a.rows_mut(0, p).copy_from(&prior);
            b.rows_mut(0, p).copy_from(&(&prior * w0));
            for j in 0..l {
                let scale = 1.0 / all.eps[j].sqrt();
                a.row_mut(p + j)
                    .copy_from(&(all.regressors.column(j).transpose() * scale));
                b.row_mut(p + j)
                    .copy_from(&(all.targets.column(j).transpose() * scale));
            }
            lstsq_svd(&a, &b, 1e-15)
        }
        BatchMethod::ExactKkt => {
            let p0 = model.prior_covariance();
            let ph = p0 * &all.regressors;
            let s = all.regressors.tr_mul(&ph);
            let chol = s
                .cholesky()
                .ok_or_else(|| Error::Oracle("stacked constraints are rank deficient".into()))?;
            let innov = &all.targets - w0.tr_mul(&all.regressors);
            Ok(w0 + ph * chol.solve(&innov.transpose()))
        }
    }
}

/// Value of the penalised objective at `w`.
pub fn penalized_cost(model: &DmpModel, problem: &BatchProblem, w: &DMatrix<f64>) -> f64 {
    let prior = prior_rows(model);
    let mut cost = (&prior * (w - &problem.prior_weights)).norm_squared();
    for b in &problem.blocks {
        let r = w.tr_mul(&b.regressors) - &b.targets;
        for (j, col) in r.column_iter().enumerate() {
            cost += col.norm_squared() / b.eps[j];
        }
    }
    cost.max(0.0)
}
