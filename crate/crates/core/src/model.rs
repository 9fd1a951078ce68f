//! Demonstrations, the trained primitive and its reference evaluation.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::basis::{BasisModel, BasisValues};
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{self, symmetrize};
use crate::quaternion::{quat_log, UnitQuaternion};

/// Position, velocity and acceleration of all degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTriplet {
    pub y: DVector<f64>,
    pub dy: DVector<f64>,
    pub ddy: DVector<f64>,
}

impl StateTriplet {
    pub fn zeros(n: usize) -> Self {
        Self {
            y: DVector::zeros(n),
            dy: DVector::zeros(n),
            ddy: DVector::zeros(n),
        }
    }

    pub fn at_rest(y: DVector<f64>) -> Self {
        let n = y.len();
        Self {
            y,
            dy: DVector::zeros(n),
            ddy: DVector::zeros(n),
        }
    }

    pub fn dofs(&self) -> usize {
        self.y.len()
    }

    /// Columns `[y, dy, ddy]` as an `n x 3` matrix.
    pub fn as_columns(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&[self.y.clone(), self.dy.clone(), self.ddy.clone()])
    }
}

/// Direction in which the phase is traversed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    #[default]
    Forward,
    Reverse,
}

impl Direction {
    pub fn start_phase(self) -> f64 {
        match self {
            Direction::Forward => 0.0,
            Direction::Reverse => 1.0,
        }
    }

    pub fn end_phase(self) -> f64 {
        1.0 - self.start_phase()
    }

    /// `+1` forward, `-1` reverse.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
        }
    }
}

/// Whether the degrees of freedom are Cartesian coordinates or the log map
/// of a unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Space {
    #[default]
    Position,
    Orientation,
}

/// A sampled demonstration; `positions` holds one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    times: Vec<f64>,
    positions: DMatrix<f64>,
    space: Space,
}

impl Demonstration {
    pub fn new(times: Vec<f64>, positions: DMatrix<f64>) -> Result<Self> {
        check_dim("demonstration samples", times.len(), positions.ncols())?;
        if times.len() < 2 {
            return Err(invalid("a demonstration needs at least two samples"));
        }
        if positions.nrows() == 0 {
            return Err(invalid(
                "a demonstration needs at least one degree of freedom",
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid(
                "demonstration timestamps must be strictly increasing",
            ));
        }
        if times.iter().chain(positions.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("demonstration"));
        }
        Ok(Self {
            times,
            positions,
            space: Space::Position,
        })
    }

    /// Converts an orientation demonstration to log space. Consecutive
    /// quaternions are sign-aligned first so the log path has no jumps.
    pub fn from_orientations(times: Vec<f64>, orientations: &[UnitQuaternion]) -> Result<Self> {
        check_dim("orientation samples", times.len(), orientations.len())?;
        let mut positions = DMatrix::zeros(3, orientations.len());
        let mut prev: Option<UnitQuaternion> = None;
        for (j, q) in orientations.iter().enumerate() {
            let q = match prev {
                None => q.canonical(),
                Some(p) if p.dot(q) < 0.0 => -*q,
                Some(_) => *q,
            };
            positions.set_column(j, &quat_log(&q));
            prev = Some(q);
        }
        let mut demo = Self::new(times, positions)?;
        demo.space = Space::Orientation;
        Ok(demo)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &DMatrix<f64> {
        &self.positions
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dofs(&self) -> usize {
        self.positions.nrows()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    /// Phase of each sample, `(t - t_0) / T`.
    pub fn phases(&self) -> Vec<f64> {
        let t0 = self.times[0];
        let d = self.duration();
        self.times.iter().map(|t| (t - t0) / d).collect()
    }

    pub fn is_uniform(&self) -> bool {
        let h = self.duration() / (self.len() - 1) as f64;
        self.times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0))
    }

    /// Linear resampling to `count` equally spaced samples.
    pub fn resampled(&self, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(invalid("resampling needs at least two samples"));
        }
        let t0 = self.times[0];
        let d = self.duration();
        let mut times = Vec::with_capacity(count);
        let mut positions = DMatrix::zeros(self.dofs(), count);
        let mut seg = 0;
        for j in 0..count {
            let t = t0 + d * j as f64 / (count - 1) as f64;
            while seg + 2 < self.len() && self.times[seg + 1] < t {
                seg += 1;
            }
            let (ta, tb) = (self.times[seg], self.times[seg + 1]);
            let a = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            let col = self.positions.column(seg) * (1.0 - a) + self.positions.column(seg + 1) * a;
            positions.set_column(j, &col);
            times.push(t);
        }
        Ok(Self {
            times,
            positions,
            space: self.space,
        })
    }

    /// Start and end positions.
    pub fn endpoints(&self) -> (DVector<f64>, DVector<f64>) {
        (
            self.positions.column(0).into_owned(),
            self.positions.column(self.len() - 1).into_owned(),
        )
    }
}

/// Stiffness `K` and damping `D` of the transformation system.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    pub stiffness: DMatrix<f64>,
    pub damping: DMatrix<f64>,
}

impl Gains {
    /// `K = k I`, `D = 2 sqrt(k) I` (critical damping).
    pub fn critically_damped(n: usize, k: f64) -> Result<Self> {
        Self::new(
            DMatrix::identity(n, n) * k,
            DMatrix::identity(n, n) * (2.0 * k.sqrt()),
        )
    }

    pub fn new(stiffness: DMatrix<f64>, damping: DMatrix<f64>) -> Result<Self> {
        let n = stiffness.nrows();
        check_dim("stiffness columns", n, stiffness.ncols())?;
        check_dim("damping rows", n, damping.nrows())?;
        check_dim("damping columns", n, damping.ncols())?;
        for (name, m) in [("stiffness", &stiffness), ("damping", &damping)] {
            if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
                return Err(invalid(format!("{name} matrix must be symmetric")));
            }
            if m.clone().cholesky().is_none() {
                return Err(invalid(format!("{name} matrix must be positive definite")));
            }
        }
        Ok(Self { stiffness, damping })
    }

    pub fn dofs(&self) -> usize {
        self.stiffness.nrows()
    }
}

/// Training hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingOptions {
    pub kernels: usize,
    pub width_factor: f64,
    /// Ridge added to the acceleration Gram matrix, relative to its mean
    /// diagonal.
    pub ridge: f64,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        Self {
            kernels: 30,
            width_factor: 1.5,
            ridge: 1e-6,
        }
    }
}

/// Fit quality of the trained weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub max_residual: f64,
    pub rms_residual: f64,
}

/// Least-squares weights `W0` and the prior covariance `P0`.
///
/// Non-uniform demonstrations are resampled to uniform phase first.
pub fn train_ls(
    demo: &Demonstration,
    basis: &BasisModel,
    ridge: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, TrainReport)> {
    let k = basis.len();
    if demo.len() < k {
        return Err(Error::Training(format!(
            "{} samples cannot determine {k} weights",
            demo.len()
        )));
    }
    let demo = if demo.is_uniform() {
        demo.clone()
    } else {
        demo.resampled(demo.len())?
    };
    let phases = demo.phases();
    let design = basis.design(&phases);

    let rank = linalg::numerical_rank(&design, 1e-12);
    if rank < k {
        let uncovered: Vec<usize> = (0..k).filter(|&i| design.row(i).amax() < 1e-6).collect();
        return Err(Error::Training(format!(
            "design matrix has rank {rank} < {k}; uncovered kernels: {uncovered:?}"
        )));
    }

    let targets = demo.positions().transpose();
    let weights = linalg::lstsq_svd(&design.transpose(), &targets, 1e-14)?;
    let fit = design.transpose() * &weights - &targets;
    let max_residual = fit.amax();
    let rms_residual = (fit.norm_squared() / fit.len() as f64).sqrt();

    let prior = prior_covariance(basis, demo.len(), ridge)?;
    Ok((
        weights,
        prior,
        TrainReport {
            max_residual,
            rms_residual,
        },
    ))
}

/// Mean acceleration Gram matrix `G = (1/m) sum phi''(s_i) phi''(s_i)^T` on a
/// uniform phase grid.
pub fn acceleration_gram(basis: &BasisModel, samples: usize) -> DMatrix<f64> {
    let phases = uniform_phases(samples);
    let d2 = basis.design_d2(&phases);
    let mut g = &d2 * d2.transpose() / samples as f64;
    symmetrize(&mut g);
    g
}

/// Absolute ridge `lambda = ridge * mean(diag G)`.
pub fn absolute_ridge(gram: &DMatrix<f64>, ridge: f64) -> f64 {
    ridge * gram.diagonal().mean()
}

/// `P0 = (G + lambda I)^{-1}`.
pub fn prior_covariance(basis: &BasisModel, samples: usize, ridge: f64) -> Result<DMatrix<f64>> {
    if !(ridge > 0.0) {
        return Err(invalid("the prior ridge must be positive"));
    }
    let gram = acceleration_gram(basis, samples);
    let lambda = absolute_ridge(&gram, ridge);
    let k = basis.len();
    let reg = &gram + DMatrix::identity(k, k) * lambda;
    let eig = reg.clone().symmetric_eigen().eigenvalues;
    let cond = eig.max() / eig.min();
    if cond > 1e12 {
        log::warn!("prior information matrix is ill-conditioned (condition {cond:.3e})");
    }
    let chol = reg.cholesky().ok_or_else(|| {
        Error::Training("prior information matrix is not positive definite".into())
    })?;
    let mut p = chol.inverse();
    symmetrize(&mut p);
    Ok(p)
}

pub fn uniform_phases(samples: usize) -> Vec<f64> {
    (0..samples)
        .map(|i| i as f64 / (samples - 1) as f64)
        .collect()
}

/// A trained primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct DmpModel {
    basis: BasisModel,
    weights: DMatrix<f64>,
    prior_cov: DMatrix<f64>,
    duration: f64,
    gains: Gains,
    space: Space,
    accel_samples: usize,
    ridge: f64,
}

impl DmpModel {
    pub fn train(
        demo: &Demonstration,
        options: &TrainingOptions,
        gains: Gains,
    ) -> Result<(Self, TrainReport)> {
        check_dim("gain dimension", demo.dofs(), gains.dofs())?;
        let basis = BasisModel::new(options.kernels, options.width_factor)?;
        let (weights, prior_cov, report) = train_ls(demo, &basis, options.ridge)?;
        Ok((
            Self {
                basis,
                weights,
                prior_cov,
                duration: demo.duration(),
                gains,
                space: demo.space(),
                accel_samples: demo.len(),
                ridge: options.ridge,
            },
            report,
        ))
    }

    /// Rebuilds a model from stored parameters, recomputing `P0`.
    pub fn from_parts(
        basis: BasisModel,
        weights: DMatrix<f64>,
        duration: f64,
        gains: Gains,
        space: Space,
        accel_samples: usize,
        ridge: f64,
    ) -> Result<Self> {
        check_dim("weight rows", basis.len(), weights.nrows())?;
        check_dim("gain dimension", weights.ncols(), gains.dofs())?;
        if space == Space::Orientation {
            check_dim("orientation dofs", 3, weights.ncols())?;
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(invalid("duration must be positive"));
        }
        if accel_samples < 2 {
            return Err(invalid("at least two acceleration samples are required"));
        }
        let prior_cov = prior_covariance(&basis, accel_samples, ridge)?;
        Ok(Self {
            basis,
            weights,
            prior_cov,
            duration,
            gains,
            space,
            accel_samples,
            ridge,
        })
    }

    pub fn basis(&self) -> &BasisModel {
        &self.basis
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn prior_covariance(&self) -> &DMatrix<f64> {
        &self.prior_cov
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn gains(&self) -> &Gains {
        &self.gains
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn accel_samples(&self) -> usize {
        self.accel_samples
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn dofs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn kernels(&self) -> usize {
        self.basis.len()
    }

    pub fn with_gains(mut self, gains: Gains) -> Result<Self> {
        check_dim("gain dimension", self.dofs(), gains.dofs())?;
        self.gains = gains;
        Ok(self)
    }

    /// Reference `y_s = W^T phi`, `dy_s = W^T phi' sd`,
    /// `ddy_s = W^T (phi'' sd^2 + phi' sdd)`.
    pub fn evaluate_reference(
        &self,
        weights: &DMatrix<f64>,
        s: f64,
        sd: f64,
        sdd: f64,
    ) -> StateTriplet {
        reference_from_values(weights, &self.basis.eval(s), sd, sdd)
    }
}

/// Reference triplet from precomputed basis values.
pub fn reference_from_values(
    weights: &DMatrix<f64>,
    values: &BasisValues,
    sd: f64,
    sdd: f64,
) -> StateTriplet {
    let y = weights.tr_mul(&values.value);
    let d1 = weights.tr_mul(&values.d1);
    let d2 = weights.tr_mul(&values.d2);
    StateTriplet {
        y,
        dy: &d1 * sd,
        ddy: d2 * (sd * sd) + d1 * sdd,
    }
}
