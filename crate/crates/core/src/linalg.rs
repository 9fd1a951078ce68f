//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Replaces `m` by `(m + m^T) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// In-place lower Cholesky factorisation of a small symmetric matrix.
///
/// Only the lower triangle is read and written. Returns `false` when a pivot
/// is not strictly positive.
pub fn cholesky_in_place(a: &mut DMatrix<f64>) -> bool {
    let n = a.nrows();
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= a[(j, k)] * a[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[(j, j)] = d;
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= a[(i, k)] * a[(j, k)];
            }
            a[(i, j)] = v / d;
        }
    }
    true
}

/// Ratio of the largest to smallest squared pivot of a factor produced by
/// [`cholesky_in_place`]; a cheap lower bound on the 2-norm condition number.
pub fn cholesky_condition_estimate(l: &DMatrix<f64>) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..l.nrows() {
        let d = l[(i, i)] * l[(i, i)];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    hi / lo
}

/// Overwrites each row `r` of `b` with `r S^{-1}` given the lower factor of
/// `S = L L^T`, i.e. computes `B S^{-1}` in place.
pub fn solve_right_in_place(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    let rows = b.nrows();
    debug_assert_eq!(b.ncols(), n);
    // Column-wise substitution over contiguous storage: column i of B is
    // updated from the columns already solved.
    let data = b.as_mut_slice();
    for i in 0..n {
        let (done, rest) = data.split_at_mut(i * rows);
        let col = &mut rest[..rows];
        for k in 0..i {
            let c = l[(i, k)];
            for (x, y) in col.iter_mut().zip(&done[k * rows..(k + 1) * rows]) {
                *x -= c * y;
            }
        }
        let d = l[(i, i)];
        col.iter_mut().for_each(|x| *x /= d);
    }
    for i in (0..n).rev() {
        let (head, solved) = data.split_at_mut((i + 1) * rows);
        let col = &mut head[i * rows..];
        for k in (i + 1)..n {
            let c = l[(k, i)];
            let off = (k - i - 1) * rows;
            for (x, y) in col.iter_mut().zip(&solved[off..off + rows]) {
                *x -= c * y;
            }
        }
        let d = l[(i, i)];
        col.iter_mut().for_each(|x| *x /= d);
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.max()
}

/// `||a - b||_F / max(||b||_F, tiny)`.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Least-squares solution of `a x = b` through the SVD.
///
/// Singular values below `rcond * sigma_max` are treated as zero.
pub fn lstsq_svd(a: &DMatrix<f64>, b: &DMatrix<f64>, rcond: f64) -> Result<DMatrix<f64>> {
    let svd = a.clone().svd(true, true);
    let tol = rcond * svd.singular_values.max();
    svd.solve(b, tol).map_err(|e| Error::Oracle(e.into()))
}

/// Number of singular values of `a` above `rcond * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>, rcond: f64) -> usize {
    let sv = a.clone().singular_values();
    let tol = rcond * sv.max();
    sv.iter().filter(|&&v| v > tol).count()
}

/// Euclidean norm of each column.
pub fn column_norms(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.norm()))
}

/// Skew-symmetric cross-product matrix `[v]x`.
pub fn skew(v: &nalgebra::Vector3<f64>) -> nalgebra::Matrix3<f64> {
    nalgebra::Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spd(n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 5) as f64 + 0.1 * i as f64);
        &a * a.transpose() + DMatrix::identity(n, n)
    }

    #[test]
    fn cholesky_matches_nalgebra() {
        let s = spd(4);
        let mut l = s.clone();
        assert!(cholesky_in_place(&mut l));
        let reference = s.clone().cholesky().unwrap().l();
        for i in 0..4 {
            for j in 0..=i {
                assert_relative_eq!(l[(i, j)], reference[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(!cholesky_in_place(&mut m));
    }

    #[test]
    fn solve_right_matches_inverse() {
        let s = spd(3);
        let b = DMatrix::from_fn(5, 3, |i, j| (i as f64 - 2.0) * 0.3 + j as f64);
        let mut l = s.clone();
        assert!(cholesky_in_place(&mut l));
        let mut x = b.clone();
        solve_right_in_place(&l, &mut x);
        let expected = &b * s.try_inverse().unwrap();
        assert_relative_eq!(x, expected, epsilon = 1e-10);
    }

    #[test]
    fn skew_is_cross_product() {
        let a = nalgebra::Vector3::new(0.3, -1.2, 2.0);
        let b = nalgebra::Vector3::new(-0.7, 0.4, 0.9);
        assert_relative_eq!(skew(&a) * b, a.cross(&b), epsilon = 1e-15);
    }

    #[test]
    fn lstsq_recovers_exact_solution() {
        let a = DMatrix::from_fn(6, 3, |i, j| 1.0 / (1.0 + i as f64 + 2.0 * j as f64));
        let x = DMatrix::from_row_slice(3, 2, &[1.0, -1.0, 0.5, 2.0, -0.25, 0.0]);
        let b = &a * &x;
        let sol = lstsq_svd(&a, &b, 1e-14).unwrap();
        assert_relative_eq!(sol, x, epsilon = 1e-9);
    }
}
