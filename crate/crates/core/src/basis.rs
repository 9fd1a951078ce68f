//! Normalised Gaussian kernels over the phase variable and their analytic
//! first and second derivatives.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// Floor for the kernel sum. The max-shift below keeps the sum `>= 1`, so
/// this only matters for non-finite inputs.
const SUM_FLOOR: f64 = 1e-300;

/// `K` Gaussian kernels with equally spaced centres on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisModel {
    centers: Vec<f64>,
    inverse_widths: Vec<f64>,
    width_factor: f64,
}

/// `phi(s)`, `phi'(s)` and `phi''(s)` with respect to the phase.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisValues {
    pub value: DVector<f64>,
    pub d1: DVector<f64>,
    pub d2: DVector<f64>,
}

impl BasisValues {
    pub fn zeros(kernels: usize) -> Self {
        Self {
            value: DVector::zeros(kernels),
            d1: DVector::zeros(kernels),
            d2: DVector::zeros(kernels),
        }
    }

    /// Velocity regressor in time units, `phi' * sd`.
    pub fn velocity_column(&self, sd: f64) -> DVector<f64> {
        &self.d1 * sd
    }

    /// Acceleration regressor in time units, `phi'' * sd^2 + phi' * sdd`.
    pub fn acceleration_column(&self, sd: f64, sdd: f64) -> DVector<f64> {
        &self.d2 * (sd * sd) + &self.d1 * sdd
    }

    /// `[phi, phi' sd, phi'' sd^2 + phi' sdd]` written into the three columns
    /// of `out`.
    pub fn write_time_block(&self, sd: f64, sdd: f64, out: &mut DMatrix<f64>) {
        let k = self.value.len();
        let sd2 = sd * sd;
        for i in 0..k {
            out[(i, 0)] = self.value[i];
            out[(i, 1)] = self.d1[i] * sd;
            out[(i, 2)] = self.d2[i] * sd2 + self.d1[i] * sdd;
        }
    }
}

impl BasisModel {
    /// Builds `kernels` kernels with `h_i = 1 / (a_h (c_{i+1} - c_i))^2`; the
    /// last kernel reuses the previous spacing.
    pub fn new(kernels: usize, width_factor: f64) -> Result<Self> {
        if kernels < 2 {
            return Err(invalid(alloc::format!(
                "at least 2 kernels are required, got {kernels}"
            )));
        }
        if !(width_factor > 0.0) || !width_factor.is_finite() {
            return Err(invalid(alloc::format!(
                "width factor must be positive and finite, got {width_factor}"
            )));
        }
        let step = 1.0 / (kernels - 1) as f64;
        let centers: Vec<f64> = (0..kernels).map(|i| i as f64 * step).collect();
        let inverse_widths = (0..kernels)
            .map(|i| {
                let spacing = if i + 1 < kernels {
                    centers[i + 1] - centers[i]
                } else {
                    centers[i] - centers[i - 1]
                };
                let w = width_factor * spacing;
                1.0 / (w * w)
            })
            .collect();
        Ok(Self {
            centers,
            inverse_widths,
            width_factor,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn inverse_widths(&self) -> &[f64] {
        &self.inverse_widths
    }

    pub fn width_factor(&self) -> f64 {
        self.width_factor
    }

    /// Normalised kernel values `phi(s)`.
    pub fn phi(&self, s: f64) -> DVector<f64> {
        self.eval(s).value
    }

    /// `phi`, `phi'` and `phi''` at `s`.
    pub fn eval(&self, s: f64) -> BasisValues {
        let mut out = BasisValues::zeros(self.len());
        self.eval_into(s, &mut out);
        out
    }

    /// Allocation-free variant of [`BasisModel::eval`].
    pub fn eval_into(&self, s: f64, out: &mut BasisValues) {
        let k = self.len();
        debug_assert_eq!(out.value.len(), k);

        // Exponents first so the largest one can be shifted to zero.
        let mut max_exp = f64::NEG_INFINITY;
        for i in 0..k {
            let d = s - self.centers[i];
            let e = -self.inverse_widths[i] * d * d;
            out.value[i] = e;
            max_exp = max_exp.max(e);
        }

        // psi, psi', psi'' (all scaled by the same exp(-max_exp)).
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for i in 0..k {
            let h = self.inverse_widths[i];
            let d = s - self.centers[i];
            let psi = (out.value[i] - max_exp).exp();
            let dpsi = -2.0 * h * d * psi;
            let ddpsi = (-2.0 * h + 4.0 * h * h * d * d) * psi;
            out.value[i] = psi;
            out.d1[i] = dpsi;
            out.d2[i] = ddpsi;
            s0 += psi;
            s1 += dpsi;
            s2 += ddpsi;
        }
        let inv = 1.0 / s0.max(SUM_FLOOR);
        for i in 0..k {
            let phi = out.value[i] * inv;
            let dphi = (out.d1[i] - phi * s1) * inv;
            let ddphi = (out.d2[i] - 2.0 * dphi * s1 - phi * s2) * inv;
            out.value[i] = phi;
            out.d1[i] = dphi;
            out.d2[i] = ddphi;
        }
    }

    /// Boundary regressor `A(s) = [phi(s), phi'(s), phi''(s)]` (`K x 3`).
    pub fn block_a(&self, s: f64) -> DMatrix<f64> {
        let v = self.eval(s);
        DMatrix::from_columns(&[v.value, v.d1, v.d2])
    }

    /// State-history regressor `C_j = [phi(s_j), phi'(s_j), phi''(s_{j-1})]`.
    pub fn block_c(&self, s_j: f64, s_prev: f64) -> DMatrix<f64> {
        let now = self.eval(s_j);
        let prev = self.eval(s_prev);
        DMatrix::from_columns(&[now.value, now.d1, prev.d2])
    }

    /// Design matrix with `phi(s_i)` in column `i`.
    pub fn design(&self, phases: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.len(), phases.len());
        let mut buf = BasisValues::zeros(self.len());
        for (j, &s) in phases.iter().enumerate() {
            self.eval_into(s, &mut buf);
            m.set_column(j, &buf.value);
        }
        m
    }

    /// Second-derivative design matrix with `phi''(s_i)` in column `i`.
    pub fn design_d2(&self, phases: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.len(), phases.len());
        let mut buf = BasisValues::zeros(self.len());
        for (j, &s) in phases.iter().enumerate() {
            self.eval_into(s, &mut buf);
            m.set_column(j, &buf.d2);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fd1(b: &BasisModel, s: f64, h: f64) -> DVector<f64> {
        (b.phi(s + h) - b.phi(s - h)) / (2.0 * h)
    }

    #[test]
    fn widths_follow_spacing() {
        let b = BasisModel::new(30, 1.5).unwrap();
        let expected = 1.0 / (1.5f64 * (1.0 / 29.0)).powi(2);
        for &h in b.inverse_widths() {
            assert_relative_eq!(h, expected, max_relative = 1e-12);
        }
        assert_eq!(b.centers()[0], 0.0);
        assert_relative_eq!(b.centers()[29], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn partition_of_unity_and_derivative_sums() {
        let b = BasisModel::new(17, 1.5).unwrap();
        for i in 0..=200 {
            let s = i as f64 / 200.0;
            let v = b.eval(s);
            assert_relative_eq!(v.value.sum(), 1.0, epsilon = 1e-12);
            assert!(v.d1.sum().abs() < 1e-9);
            assert!(v.d2.sum().abs() < 1e-6 * v.d2.amax().max(1.0));
            assert!(v.value.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = BasisModel::new(10, 1.5).unwrap();
        let h = 1e-5;
        for i in 1..50 {
            let s = i as f64 / 50.0;
            let v = b.eval(s);
            let fd = fd1(&b, s, h);
            assert_relative_eq!(v.d1, fd, epsilon = 1e-6 * v.d1.amax().max(1.0));
            let fd2 = (b.eval(s + h).d1 - b.eval(s - h).d1) / (2.0 * h);
            assert_relative_eq!(v.d2, fd2, epsilon = 1e-6 * v.d2.amax().max(1.0));
        }
    }

    #[test]
    fn narrow_kernels_stay_finite() {
        let b = BasisModel::new(200, 0.05).unwrap();
        for i in 0..=100 {
            let v = b.eval(i as f64 / 100.0);
            assert!(v
                .value
                .iter()
                .chain(v.d1.iter())
                .chain(v.d2.iter())
                .all(|x| x.is_finite()));
            assert_relative_eq!(v.value.sum(), 1.0, epsilon = 1e-12);
        }
        let at_center = b.phi(b.centers()[57]);
        assert_eq!(at_center.imax(), 57);
    }

    #[test]
    fn block_c_mixes_phases() {
        let b = BasisModel::new(8, 1.5).unwrap();
        let c = b.block_c(0.4, 0.39);
        assert_eq!(c.column(0), b.phi(0.4).column(0));
        assert_eq!(c.column(2), b.eval(0.39).d2.column(0));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(BasisModel::new(1, 1.0).is_err());
        assert!(BasisModel::new(5, 0.0).is_err());
        assert!(BasisModel::new(5, f64::NAN).is_err());
    }
}
