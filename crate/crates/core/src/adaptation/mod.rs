//! Online re-solution of the weights under boundary, via-point and
//! state-history equality constraints.
//!
//! Each constraint class `(H, Z, R)` enters through the recursive update
//!
//! ```text
//! G = P H (R + H^T P H)^{-1}
//! W <- W + G (Z - W^T H)^T
//! P <- P - G H^T P
//! ```
//!
//! and is removed by the same formulas with `R -> -R`.
//!
//! The default [`RecursionScheme::Retained`] keeps a base estimate holding the
//! prior, the start constraint and the state history. Goal and via-point
//! constraints are applied on top of it every step, so removing them never
//! requires a downdate. [`RecursionScheme::NegativeWeight`] keeps a single
//! estimate and downdates removed constraints directly.

mod batch;

pub use batch::{batch_solve, penalized_cost, BatchMethod, BatchProblem};

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::basis::{BasisModel, BasisValues};
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{
    cholesky_condition_estimate, cholesky_in_place, solve_right_in_place, symmetrize,
};
use crate::model::{Direction, DmpModel, StateTriplet};

/// Constraint weights `epsilon` (diagonal of `R`) per constraint class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonProfile {
    pub boundary_pos: f64,
    pub boundary_vel: f64,
    pub boundary_acc: f64,
    pub via: f64,
    pub state_pos: f64,
    pub state_vel: f64,
    pub state_acc: f64,
}

impl Default for EpsilonProfile {
    fn default() -> Self {
        Self {
            boundary_pos: 1e-9,
            boundary_vel: 1e-7,
            boundary_acc: 1e-7,
            via: 1e-7,
            state_pos: 1e-6,
            state_vel: 1e-6,
            state_acc: 1e-4,
        }
    }
}

impl EpsilonProfile {
    /// Softer state constraints for tracking an externally perturbed state.
    pub fn adapt_to_external() -> Self {
        Self {
            state_pos: 1e-4,
            state_vel: 1e-1,
            state_acc: 1e-1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("boundary_pos", self.boundary_pos),
            ("boundary_vel", self.boundary_vel),
            ("boundary_acc", self.boundary_acc),
            ("via", self.via),
            ("state_pos", self.state_pos),
            ("state_vel", self.state_vel),
            ("state_acc", self.state_acc),
        ];
        for (name, v) in all {
            if !(v > 1e-12 && v < 1.0) {
                return Err(invalid(format!(
                    "epsilon {name} = {v:e} outside the open interval (1e-12, 1)"
                )));
            }
        }
        Ok(())
    }

    fn boundary(&self) -> [f64; 3] {
        [self.boundary_pos, self.boundary_vel, self.boundary_acc]
    }

    fn state(&self) -> [f64; 3] {
        [self.state_pos, self.state_vel, self.state_acc]
    }
}

/// Source of the state-history targets `Y_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistoryMode {
    /// `Y_j = W_{i-1}^T C_j`: keep the path already produced by the weights.
    #[default]
    PreserveLearned,
    /// `Y_j` is the measured state: follow external perturbations.
    AdaptToExternal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecursionScheme {
    #[default]
    Retained,
    NegativeWeight,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationConfig {
    pub epsilon: EpsilonProfile,
    pub mode: HistoryMode,
    pub scheme: RecursionScheme,
    /// A state constraint is applied only once the phase has moved by at
    /// least this much since the previous one.
    pub state_gate: f64,
    /// Keep every applied constraint so the batch oracle can re-solve them.
    pub record: bool,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            epsilon: EpsilonProfile::default(),
            mode: HistoryMode::PreserveLearned,
            scheme: RecursionScheme::Retained,
            state_gate: 1e-3,
            record: false,
        }
    }
}

impl AdaptationConfig {
    pub fn adapt_to_external() -> Self {
        Self {
            epsilon: EpsilonProfile::adapt_to_external(),
            mode: HistoryMode::AdaptToExternal,
            // Measured states carry the integrator's half-step velocity lag;
            // constraining them every tick feeds it back into the reference.
            state_gate: 1e-2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.epsilon.validate()?;
        if !(self.state_gate >= 0.0) || !self.state_gate.is_finite() {
            return Err(invalid("state gate must be finite and non-negative"));
        }
        Ok(())
    }
}

/// A via-point `W^T phi(phase) = point`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViaPoint {
    pub id: u64,
    pub phase: f64,
    pub point: DVector<f64>,
}

/// Equality constraints `W^T H = Z` with diagonal weights `R = diag(eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintBlock {
    /// `K x l`
    pub regressors: DMatrix<f64>,
    /// `n x l`
    pub targets: DMatrix<f64>,
    /// `l`
    pub eps: DVector<f64>,
}

impl ConstraintBlock {
    pub fn new(regressors: DMatrix<f64>, targets: DMatrix<f64>, eps: DVector<f64>) -> Result<Self> {
        check_dim("constraint targets", regressors.ncols(), targets.ncols())?;
        check_dim("constraint weights", regressors.ncols(), eps.len())?;
        if eps.iter().any(|&e| !(e > 0.0)) {
            return Err(invalid("constraint weights must be positive"));
        }
        Ok(Self {
            regressors,
            targets,
            eps,
        })
    }

    pub fn empty(kernels: usize, dofs: usize) -> Self {
        Self {
            regressors: DMatrix::zeros(kernels, 0),
            targets: DMatrix::zeros(dofs, 0),
            eps: DVector::zeros(0),
        }
    }

    /// Position, velocity and acceleration at phase `s`, in phase units.
    pub fn boundary(
        basis: &BasisModel,
        s: f64,
        state: &StateTriplet,
        eps: &EpsilonProfile,
    ) -> Self {
        Self {
            regressors: basis.block_a(s),
            targets: state.as_columns(),
            eps: DVector::from_row_slice(&eps.boundary()),
        }
    }

    pub fn via_points(basis: &BasisModel, vias: &[ViaPoint], eps: f64) -> Self {
        let n = vias.first().map_or(0, |v| v.point.len());
        let mut regressors = DMatrix::zeros(basis.len(), vias.len());
        let mut targets = DMatrix::zeros(n, vias.len());
        for (j, v) in vias.iter().enumerate() {
            regressors.set_column(j, &basis.phi(v.phase));
            targets.set_column(j, &v.point);
        }
        Self {
            regressors,
            targets,
            eps: DVector::from_element(vias.len(), eps),
        }
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    /// Horizontal concatenation.
    pub fn concat(blocks: &[&ConstraintBlock]) -> Self {
        let k = blocks[0].regressors.nrows();
        let n = blocks[0].targets.nrows();
        let l: usize = blocks.iter().map(|b| b.len()).sum();
        let mut out = Self {
            regressors: DMatrix::zeros(k, l),
            targets: DMatrix::zeros(n, l),
            eps: DVector::zeros(l),
        };
        let mut c = 0;
        for b in blocks {
            let m = b.len();
            out.regressors.columns_mut(c, m).copy_from(&b.regressors);
            out.targets.columns_mut(c, m).copy_from(&b.targets);
            out.eps.rows_mut(c, m).copy_from(&b.eps);
            c += m;
        }
        out
    }

    /// Largest absolute residual `|W^T H - Z|` per constraint column.
    pub fn residuals(&self, weights: &DMatrix<f64>) -> DVector<f64> {
        let r = weights.tr_mul(&self.regressors) - &self.targets;
        DVector::from_iterator(r.ncols(), r.column_iter().map(|c| c.amax()))
    }
}

/// Scratch space for one gain computation.
#[derive(Debug, Clone)]
struct Workspace {
    ph: DMatrix<f64>,
    gain: DMatrix<f64>,
    s: DMatrix<f64>,
    innov: DMatrix<f64>,
}

impl Workspace {
    fn new() -> Self {
        Self {
            ph: DMatrix::zeros(0, 0),
            gain: DMatrix::zeros(0, 0),
            s: DMatrix::zeros(0, 0),
            innov: DMatrix::zeros(0, 0),
        }
    }

    fn shape(&mut self, k: usize, n: usize, l: usize) {
        if self.ph.shape() != (k, l) {
            self.ph = DMatrix::zeros(k, l);
            self.gain = DMatrix::zeros(k, l);
        }
        if self.s.shape() != (l, l) {
            self.s = DMatrix::zeros(l, l);
        }
        if self.innov.shape() != (n, l) {
            self.innov = DMatrix::zeros(n, l);
        }
    }

    /// Computes `P H` and the gain for `R' = sign * R`. Returns the condition
    /// estimate of the innovation matrix.
    fn gain(
        &mut self,
        p: &DMatrix<f64>,
        block: &ConstraintBlock,
        n: usize,
        downdate: bool,
    ) -> Result<f64> {
        let (k, l) = block.regressors.shape();
        self.shape(k, n, l);
        self.ph.gemm(1.0, p, &block.regressors, 0.0);
        self.s.gemm_tr(1.0, &block.regressors, &self.ph, 0.0);
        for i in 0..l {
            self.s[(i, i)] += if downdate {
                -block.eps[i]
            } else {
                block.eps[i]
            };
        }
        if downdate {
            // The downdated innovation matrix must be negative definite.
            self.s.neg_mut();
            if !cholesky_in_place(&mut self.s) {
                return Err(Error::Downdate(
                    "R - H^T P H is not positive definite for the removed constraints".into(),
                ));
            }
        } else if !cholesky_in_place(&mut self.s) {
            return Err(Error::Conditioning {
                context: "constraint update",
            });
        }
        self.gain.copy_from(&self.ph);
        solve_right_in_place(&self.s, &mut self.gain);
        if downdate {
            self.gain.neg_mut();
        }
        Ok(cholesky_condition_estimate(&self.s))
    }

    /// `W += G (Z - W^T H)^T` using the gain from [`Workspace::gain`].
    fn apply_weights(&mut self, w: &mut DMatrix<f64>, block: &ConstraintBlock) {
        self.innov.copy_from(&block.targets);
        self.innov.gemm_tr(-1.0, w, &block.regressors, 1.0);
        for c in 0..block.len() {
            w.ger(1.0, &self.gain.column(c), &self.innov.column(c), 1.0);
        }
    }

    /// `P -= G (P H)^T`.
    fn apply_covariance(&self, p: &mut DMatrix<f64>) {
        for c in 0..self.gain.ncols() {
            p.ger(-1.0, &self.gain.column(c), &self.ph.column(c), 1.0);
        }
        symmetrize(p);
    }
}

/// Adds the constraints in `block` to `(w, p)`.
pub fn update(w: &mut DMatrix<f64>, p: &mut DMatrix<f64>, block: &ConstraintBlock) -> Result<()> {
    check_block(w, p, block)?;
    let mut ws = Workspace::new();
    ws.gain(p, block, w.ncols(), false)?;
    ws.apply_weights(w, block);
    ws.apply_covariance(p);
    Ok(())
}

/// Removes the constraints in `block` from `(w, p)`; they must have been
/// added before with the same regressors and weights.
pub fn downdate(w: &mut DMatrix<f64>, p: &mut DMatrix<f64>, block: &ConstraintBlock) -> Result<()> {
    check_block(w, p, block)?;
    let mut ws = Workspace::new();
    ws.gain(p, block, w.ncols(), true)?;
    ws.apply_weights(w, block);
    ws.apply_covariance(p);
    Ok(())
}

fn check_block(w: &DMatrix<f64>, p: &DMatrix<f64>, block: &ConstraintBlock) -> Result<()> {
    check_dim("covariance rows", w.nrows(), p.nrows())?;
    check_dim("covariance columns", w.nrows(), p.ncols())?;
    check_dim(
        "constraint regressor rows",
        w.nrows(),
        block.regressors.nrows(),
    )?;
    check_dim("constraint target rows", w.ncols(), block.targets.nrows())
}

/// Phase and its first two time derivatives at one control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSample {
    pub s: f64,
    pub sd: f64,
    pub sdd: f64,
}

/// Everything that changes between two adaptation steps.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    pub phase: PhaseSample,
    /// Basis values at `phase.s`.
    pub basis: &'a BasisValues,
    pub goal: &'a DVector<f64>,
    pub add: &'a [ViaPoint],
    pub remove: &'a [u64],
    /// `[y_j, dy_j, ddy_{j-1}]`; required in [`HistoryMode::AdaptToExternal`].
    pub measured: Option<&'a StateTriplet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub state_applied: bool,
    pub goal_changed: bool,
    pub vias_changed: bool,
    /// Condition estimate of the worst innovation matrix factored this step.
    pub innovation_condition: f64,
}

/// Largest absolute residual per constraint class.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstraintResiduals {
    pub start: [f64; 3],
    pub goal: [f64; 3],
    pub via: f64,
    /// Residual of the most recently applied state constraint.
    pub state: [f64; 3],
}

impl ConstraintResiduals {
    pub fn max_with(&mut self, other: &Self) {
        for i in 0..3 {
            self.start[i] = self.start[i].max(other.start[i]);
            self.goal[i] = self.goal[i].max(other.goal[i]);
            self.state[i] = self.state[i].max(other.state[i]);
        }
        self.via = self.via.max(other.via);
    }
}

/// Online estimate of the weights.
#[derive(Debug, Clone)]
pub struct AdaptationState {
    config: AdaptationConfig,
    direction: Direction,
    prior_weights: DMatrix<f64>,
    start: ConstraintBlock,
    goal: ConstraintBlock,
    vias: Vec<ViaPoint>,
    /// Goal and via constraints concatenated.
    tail: ConstraintBlock,
    tail_dirty: bool,
    /// Estimate without goal and via constraints (retained scheme) or the
    /// full estimate (negative-weight scheme).
    base_w: DMatrix<f64>,
    base_p: DMatrix<f64>,
    weights: DMatrix<f64>,
    /// Acceleration regressor of the previous tick, in time units.
    prev_accel: DVector<f64>,
    last_state_phase: f64,
    last_state: Option<ConstraintBlock>,
    state_block: ConstraintBlock,
    state_ws: Workspace,
    tail_ws: Workspace,
    steps: usize,
    history: Vec<ConstraintBlock>,
}

impl AdaptationState {
    /// Starts from `prior` (the trained weights if `None`) with the start
    /// state, the goal and any initial via-points.
    pub fn init(
        model: &DmpModel,
        prior: Option<&DMatrix<f64>>,
        start: &StateTriplet,
        goal: &DVector<f64>,
        vias: &[ViaPoint],
        direction: Direction,
        config: AdaptationConfig,
    ) -> Result<Self> {
        config.validate()?;
        let basis = model.basis();
        let (k, n) = (model.kernels(), model.dofs());
        check_dim("start state", n, start.dofs())?;
        check_dim("goal", n, goal.len())?;
        let prior_weights = match prior {
            Some(w) => {
                check_dim("prior weight rows", k, w.nrows())?;
                check_dim("prior weight columns", n, w.ncols())?;
                w.clone()
            }
            None => model.weights().clone(),
        };
        let s0 = direction.start_phase();
        let start_block = ConstraintBlock::boundary(basis, s0, start, &config.epsilon);
        let goal_block = ConstraintBlock::boundary(
            basis,
            direction.end_phase(),
            &StateTriplet::at_rest(goal.clone()),
            &config.epsilon,
        );
        let sd1 = direction.sign() / model.duration();
        let prev_accel = basis.eval(s0).d2 * (sd1 * sd1);

        let mut state = Self {
            config,
            direction,
            prior_weights: prior_weights.clone(),
            start: start_block,
            goal: goal_block,
            vias: Vec::new(),
            tail: ConstraintBlock::empty(k, n),
            tail_dirty: true,
            base_w: prior_weights,
            base_p: model.prior_covariance().clone(),
            weights: DMatrix::zeros(k, n),
            prev_accel,
            last_state_phase: s0,
            last_state: None,
            state_block: ConstraintBlock {
                regressors: DMatrix::zeros(k, 3),
                targets: DMatrix::zeros(n, 3),
                eps: DVector::from_row_slice(&config.epsilon.state()),
            },
            state_ws: Workspace::new(),
            tail_ws: Workspace::new(),
            steps: 0,
            history: Vec::new(),
        };
        for v in vias {
            state.insert_via(v.clone())?;
        }
        match config.scheme {
            RecursionScheme::Retained => {
                update(&mut state.base_w, &mut state.base_p, &state.start)?;
                state.refresh_tail(basis);
                state.recompute_weights()?;
            }
            RecursionScheme::NegativeWeight => {
                state.refresh_tail(basis);
                let all = ConstraintBlock::concat(&[&state.start, &state.tail]);
                update(&mut state.base_w, &mut state.base_p, &all)?;
                state.weights.copy_from(&state.base_w);
            }
        }
        Ok(state)
    }

    pub fn config(&self) -> &AdaptationConfig {
        &self.config
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Current weights `W_i`.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn prior_weights(&self) -> &DMatrix<f64> {
        &self.prior_weights
    }

    pub fn goal(&self) -> DVector<f64> {
        self.goal.targets.column(0).into_owned()
    }

    pub fn via_points(&self) -> &[ViaPoint] {
        &self.vias
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of state constraints applied so far.
    pub fn state_constraints(&self) -> usize {
        self.history.len()
    }

    /// Current covariance `P_i`.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        match self.config.scheme {
            RecursionScheme::NegativeWeight => Ok(self.base_p.clone()),
            RecursionScheme::Retained => {
                let mut p = self.base_p.clone();
                if !self.tail.is_empty() {
                    let mut ws = Workspace::new();
                    ws.gain(&self.base_p, &self.tail, self.weights.ncols(), false)?;
                    ws.apply_covariance(&mut p);
                }
                Ok(p)
            }
        }
    }

    /// One control tick.
    pub fn step(&mut self, model: &DmpModel, input: &StepInput<'_>) -> Result<StepReport> {
        let basis = model.basis();
        let n = self.weights.ncols();
        check_dim("goal", n, input.goal.len())?;
        let mut report = StepReport::default();
        let PhaseSample { s, sd, sdd } = input.phase;
        let values = input.basis;

        // State regressors C_j in time units and their targets Y_j.
        {
            let c = &mut self.state_block.regressors;
            for i in 0..c.nrows() {
                c[(i, 0)] = values.value[i];
                c[(i, 1)] = values.d1[i] * sd;
                c[(i, 2)] = self.prev_accel[i];
            }
        }
        match self.config.mode {
            HistoryMode::PreserveLearned => {
                self.state_block.targets.gemm_tr(
                    1.0,
                    &self.weights,
                    &self.state_block.regressors,
                    0.0,
                );
            }
            HistoryMode::AdaptToExternal => {
                let m = input.measured.ok_or_else(|| {
                    invalid("the measured state is required when adapting to external signals")
                })?;
                check_dim("measured state", n, m.dofs())?;
                let t = &mut self.state_block.targets;
                t.set_column(0, &m.y);
                t.set_column(1, &m.dy);
                t.set_column(2, &m.ddy);
            }
        }
        for i in 0..self.prev_accel.len() {
            self.prev_accel[i] = values.d2[i] * sd * sd + values.d1[i] * sdd;
        }
        // A changed goal or via set always pins the current state, otherwise
        // the reference could jump at the current phase.
        let goal_changed = self.goal.targets.column(0) != input.goal.column(0);
        let vias_changed = !input.add.is_empty() || !input.remove.is_empty();
        let apply_state = ((s - self.last_state_phase).abs() >= self.config.state_gate
            || goal_changed
            || vias_changed)
            && !(self.state_block.targets.iter().any(|v| !v.is_finite()));

        // Goal and via bookkeeping.
        let mut removed = Vec::new();
        for &id in input.remove {
            let pos = self
                .vias
                .iter()
                .position(|v| v.id == id)
                .ok_or_else(|| invalid(format!("via-point {id} is not active")))?;
            removed.push(self.vias.remove(pos));
            self.tail_dirty = true;
        }
        for v in input.add {
            check_dim("via-point", n, v.point.len())?;
            self.insert_via(v.clone())?;
        }

        match self.config.scheme {
            RecursionScheme::Retained => {
                if apply_state {
                    report.innovation_condition =
                        self.state_ws
                            .gain(&self.base_p, &self.state_block, n, false)?;
                    self.state_ws
                        .apply_weights(&mut self.base_w, &self.state_block);
                    self.state_ws.apply_covariance(&mut self.base_p);
                }
                if goal_changed {
                    self.goal.targets.set_column(0, input.goal);
                    // The goal leads the tail; with an unchanged via set it
                    // can be patched in place.
                    if !self.tail_dirty {
                        self.tail.targets.set_column(0, input.goal);
                    }
                }
                if self.tail_dirty {
                    self.refresh_tail(basis);
                }
                if apply_state || vias_changed || goal_changed {
                    let c = self.recompute_weights()?;
                    report.innovation_condition = report.innovation_condition.max(c);
                }
            }
            RecursionScheme::NegativeWeight => {
                let mut out: Vec<&ConstraintBlock> = Vec::new();
                let removed_block;
                let old_goal = self.goal.clone();
                if goal_changed {
                    out.push(&old_goal);
                }
                if !removed.is_empty() {
                    removed_block =
                        ConstraintBlock::via_points(basis, &removed, self.config.epsilon.via);
                    out.push(&removed_block);
                }
                if !out.is_empty() {
                    let block = ConstraintBlock::concat(&out);
                    downdate(&mut self.base_w, &mut self.base_p, &block)?;
                }
                if goal_changed {
                    self.goal.targets.set_column(0, input.goal);
                }
                let added = ConstraintBlock::via_points(basis, input.add, self.config.epsilon.via);
                let mut ins: Vec<&ConstraintBlock> = Vec::new();
                if apply_state {
                    ins.push(&self.state_block);
                }
                if goal_changed {
                    ins.push(&self.goal);
                }
                if !input.add.is_empty() {
                    ins.push(&added);
                }
                if !ins.is_empty() {
                    let block = ConstraintBlock::concat(&ins);
                    let c = self.tail_ws.gain(&self.base_p, &block, n, false)?;
                    self.tail_ws.apply_weights(&mut self.base_w, &block);
                    self.tail_ws.apply_covariance(&mut self.base_p);
                    report.innovation_condition = c;
                }
                self.weights.copy_from(&self.base_w);
                if vias_changed || goal_changed {
                    self.refresh_tail(basis);
                }
            }
        }

        if apply_state {
            self.last_state_phase = s;
            if self.config.record {
                self.history.push(self.state_block.clone());
            }
            match &mut self.last_state {
                Some(b) => {
                    b.regressors.copy_from(&self.state_block.regressors);
                    b.targets.copy_from(&self.state_block.targets);
                }
                None => self.last_state = Some(self.state_block.clone()),
            }
        }
        self.steps += 1;
        report.state_applied = apply_state;
        report.goal_changed = goal_changed;
        report.vias_changed = vias_changed;
        Ok(report)
    }

    /// Evaluates the basis at `phase.s` and calls [`AdaptationState::step`].
    pub fn step_at(
        &mut self,
        model: &DmpModel,
        phase: PhaseSample,
        goal: &DVector<f64>,
        add: &[ViaPoint],
        remove: &[u64],
        measured: Option<&StateTriplet>,
    ) -> Result<StepReport> {
        let values = model.basis().eval(phase.s);
        self.step(
            model,
            &StepInput {
                phase,
                basis: &values,
                goal,
                add,
                remove,
                measured,
            },
        )
    }

    /// Residuals of every active constraint under the current weights.
    pub fn residuals(&self) -> ConstraintResiduals {
        let w = &self.weights;
        let start = self.start.residuals(w);
        let goal = self.goal.residuals(w);
        let via = if self.tail.len() > 3 {
            self.tail.residuals(w).rows(3, self.tail.len() - 3).max()
        } else {
            0.0
        };
        let state = self
            .last_state
            .as_ref()
            .map(|b| {
                let r = b.residuals(w);
                [r[0], r[1], r[2]]
            })
            .unwrap_or_default();
        ConstraintResiduals {
            start: [start[0], start[1], start[2]],
            goal: [goal[0], goal[1], goal[2]],
            via,
            state,
        }
    }

    /// The active constraint set for the batch oracle, if recording is on.
    pub fn batch_problem(&self) -> Option<BatchProblem> {
        if !self.config.record {
            return None;
        }
        let mut blocks = Vec::with_capacity(self.history.len() + 2);
        blocks.push(self.start.clone());
        blocks.extend(self.history.iter().cloned());
        blocks.push(self.tail.clone());
        Some(BatchProblem {
            prior_weights: self.prior_weights.clone(),
            blocks,
        })
    }

    fn insert_via(&mut self, v: ViaPoint) -> Result<()> {
        if !(0.0..=1.0).contains(&v.phase) {
            return Err(invalid(format!(
                "via-point phase {} outside [0, 1]",
                v.phase
            )));
        }
        if self.vias.iter().any(|u| u.id == v.id) {
            return Err(invalid(format!("via-point {} is already active", v.id)));
        }
        self.vias.push(v);
        self.tail_dirty = true;
        Ok(())
    }

    fn refresh_tail(&mut self, basis: &BasisModel) {
        let vias = ConstraintBlock::via_points(basis, &self.vias, self.config.epsilon.via);
        self.tail = if vias.is_empty() {
            self.goal.clone()
        } else {
            ConstraintBlock::concat(&[&self.goal, &vias])
        };
        self.tail_dirty = false;
    }

    /// Retained scheme: `W = base + goal and via constraints`.
    fn recompute_weights(&mut self) -> Result<f64> {
        self.weights.copy_from(&self.base_w);
        let n = self.weights.ncols();
        let c = self.tail_ws.gain(&self.base_p, &self.tail, n, false)?;
        self.tail_ws.apply_weights(&mut self.weights, &self.tail);
        Ok(c)
    }
}

/// Phase for a via-point given without one: the closest of 80 evenly spaced
/// samples of the current path between `s_now` and the end of the motion.
pub fn via_phase_heuristic(
    basis: &BasisModel,
    weights: &DMatrix<f64>,
    point: &DVector<f64>,
    s_now: f64,
    direction: Direction,
) -> Result<f64> {
    const SAMPLES: usize = 80;
    check_dim("via-point", weights.ncols(), point.len())?;
    let end = direction.end_phase();
    if (end - s_now) * direction.sign() <= 0.0 {
        return Err(invalid("no phase left before the end of the motion"));
    }
    let mut best = (f64::INFINITY, end);
    for i in 1..=SAMPLES {
        let s = s_now + (end - s_now) * i as f64 / SAMPLES as f64;
        let d = (weights.tr_mul(&basis.phi(s)) - point).norm();
        if d < best.0 {
            best = (d, s);
        }
    }
    Ok(best.1)
}
