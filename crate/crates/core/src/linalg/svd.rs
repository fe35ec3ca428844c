//! Truncated-SVD pseudoinverse of one-body MFS blocks.

use faer::{Mat, MatRef};

use crate::error::{check_len, invalid, Error, Result};
use crate::kernels::DenseBlock;
use crate::linalg::dense::{gemm, gemv};
use crate::scalar::{lit, Mat3, Real};

pub const DEFAULT_TRUNC_EPS: f64 = 1e-14;

/// SVD `S = U diag(sigma) V^T` of a one-body block, with singular values
/// below `sigma_1 * trunc_eps` inverted as zero.
#[derive(Clone, Debug)]
pub struct OneBodyFactor<T> {
    pub left: Mat<T>,
    pub singular_values: Vec<T>,
    pub right: Mat<T>,
    pub trunc_eps: T,
    /// Number of singular values at or above the threshold.
    pub rank: usize,
    /// Components per node (1 for Laplace, 3 for Stokes blocks).
    pub components: usize,
}

/// Factorizes a block whose rows and columns carry `components` values per node.
pub fn factorize_with_components<T: Real>(block: MatRef<'_, T>, trunc_eps: T, components: usize) -> Result<OneBodyFactor<T>> {
    if !(trunc_eps >= T::epsilon() && trunc_eps <= lit::<T>(1e-2)) {
        return Err(invalid(format!("trunc_eps {trunc_eps} outside [machine epsilon, 1e-2]")));
    }
    let (m, n) = (block.nrows(), block.ncols());
    if m == 0 || n == 0 {
        return Err(invalid("cannot factorize an empty block"));
    }
    if m % components != 0 || n % components != 0 {
        return Err(invalid("block dimensions are not multiples of the component count"));
    }
    for j in 0..n {
        for i in 0..m {
            if !block[(i, j)].is_finite() {
                return Err(Error::Numerical(format!("non-finite block entry at ({i}, {j})")));
            }
        }
    }
    let svd = block.thin_svd().map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let k = m.min(n);
    let s = svd.S().column_vector();
    let singular_values: Vec<T> = (0..k).map(|i| s[i]).collect();
    let threshold = singular_values[0] * trunc_eps;
    let rank = singular_values.iter().take_while(|&&x| x >= threshold && x > T::zero()).count();
    Ok(OneBodyFactor {
        left: svd.U().to_owned(),
        singular_values,
        right: svd.V().to_owned(),
        trunc_eps,
        rank,
        components,
    })
}

/// Factorizes a dense one-body block.
pub fn factorize<T: Real>(block: &DenseBlock<T>, trunc_eps: T) -> Result<OneBodyFactor<T>> {
    factorize_with_components(block.matrix.as_ref(), trunc_eps, 1)
}

impl<T: Real> OneBodyFactor<T> {
    pub fn rows(&self) -> usize {
        self.left.nrows()
    }

    pub fn cols(&self) -> usize {
        self.right.nrows()
    }

    /// Whether singular value `i` is inverted as zero.
    pub fn is_truncated(&self, i: usize) -> bool {
        i >= self.rank
    }

    pub fn condition_number(&self) -> T {
        self.singular_values[0] / *self.singular_values.last().unwrap()
    }

    fn scale_coefficients(&self, c: &mut [T]) {
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = if i < self.rank { *ci / self.singular_values[i] } else { T::zero() };
        }
    }

    /// `V Sigma^+ (U^T rhs)`, with the middle vector formed explicitly.
    pub fn apply_pinv(&self, rhs: &[T]) -> Result<Vec<T>> {
        check_len(self.rows(), rhs.len())?;
        let mut coeffs = vec![T::zero(); self.singular_values.len()];
        gemv(self.left.as_ref(), rhs, &mut coeffs, true);
        self.scale_coefficients(&mut coeffs);
        let mut out = vec![T::zero(); self.cols()];
        gemv(self.right.as_ref(), &coeffs, &mut out, false);
        Ok(out)
    }

    /// Column-wise [`apply_pinv`](Self::apply_pinv) of a block of right-hand sides.
    pub fn apply_pinv_many(&self, rhs: MatRef<'_, T>) -> Result<Mat<T>> {
        check_len(self.rows(), rhs.nrows())?;
        let k = self.singular_values.len();
        let mut coeffs = Mat::<T>::zeros(k, rhs.ncols());
        gemm(coeffs.as_mut(), self.left.as_ref().transpose(), rhs, T::one(), false);
        for j in 0..rhs.ncols() {
            for i in 0..k {
                coeffs[(i, j)] = if i < self.rank { coeffs[(i, j)] / self.singular_values[i] } else { T::zero() };
            }
        }
        let mut out = Mat::<T>::zeros(self.cols(), rhs.ncols());
        gemm(out.as_mut(), self.right.as_ref(), coeffs.as_ref(), T::one(), false);
        Ok(out)
    }

    /// `U Sigma V^T x`, the factored block applied to `x`.
    pub fn apply_block(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.cols(), x.len())?;
        let mut coeffs = vec![T::zero(); self.singular_values.len()];
        gemv(self.right.as_ref(), x, &mut coeffs, true);
        for (c, s) in coeffs.iter_mut().zip(&self.singular_values) {
            *c = *c * *s;
        }
        let mut out = vec![T::zero(); self.rows()];
        gemv(self.left.as_ref(), &coeffs, &mut out, false);
        Ok(out)
    }
}

/// Applies `rotation` (or its transpose) to every consecutive 3-vector of `v`.
pub fn rotate_blocks<T: Real>(rotation: &Mat3<T>, v: &mut [T], transpose: bool) {
    for c in v.chunks_exact_mut(3) {
        let x = crate::scalar::Vec3::new(c[0], c[1], c[2]);
        let y = if transpose { rotation.tr_mul_vec(x) } else { rotation.mul_vec(x) };
        c.copy_from_slice(&y.0);
    }
}

/// Pseudoinverse of the rotated block `R_M S R_N^T` applied to `rhs`:
/// `R_N V Sigma^+ U^T R_M^T rhs`.
pub fn rotated_pinv_apply<T: Real>(base: &OneBodyFactor<T>, rotation: &Mat3<T>, rhs: &[T]) -> Result<Vec<T>> {
    if base.components != 3 {
        return Err(invalid(
            "rotation reuse needs a vector (Stokes) factor; a scalar factor is only valid for the reference node order",
        ));
    }
    check_len(base.rows(), rhs.len())?;
    let mut local = rhs.to_vec();
    rotate_blocks(rotation, &mut local, true);
    let mut out = base.apply_pinv(&local)?;
    rotate_blocks(rotation, &mut out, false);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn block(m: Mat<f64>) -> DenseBlock<f64> {
        DenseBlock { matrix: m }
    }

    fn random(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_factor() {
        let f = factorize(&block(Mat::identity(3, 3)), 1e-14).unwrap();
        assert_eq!(f.singular_values, vec![1.0, 1.0, 1.0]);
        assert_eq!(f.apply_pinv(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn truncation_flag() {
        let mut m = Mat::<f64>::zeros(2, 2);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 1e-16;
        let f = factorize(&block(m), 1e-12).unwrap();
        assert!(!f.is_truncated(0));
        assert!(f.is_truncated(1));
        assert_eq!(f.singular_values.len(), 2);
        let x = f.apply_pinv(&[1.0, 1.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && x[1] == 0.0);
    }

    #[test]
    fn threshold_value_is_kept() {
        let mut m = Mat::<f64>::zeros(2, 2);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 0.5;
        let f = factorize(&block(m), 0.5).err();
        assert!(f.is_some(), "eps above 1e-2 must be rejected");
        let mut m = Mat::<f64>::zeros(2, 2);
        m[(0, 0)] = 1024.0;
        m[(1, 1)] = 1024.0 * 0.0078125;
        let f = factorize(&block(m), 0.0078125).unwrap();
        assert_eq!(f.rank, 2);
    }

    #[test]
    fn diagonal_inverse() {
        let mut m = Mat::<f64>::zeros(2, 2);
        m[(0, 0)] = 2.0;
        m[(1, 1)] = 4.0;
        let f = factorize(&block(m), 1e-14).unwrap();
        let x = f.apply_pinv(&[2.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_eps_and_dims() {
        let b = block(Mat::identity(3, 3));
        assert!(factorize(&b, 1e-20).is_err());
        let f = factorize(&b, 1e-14).unwrap();
        assert!(matches!(f.apply_pinv(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn normal_equations() {
        let a = random(10, 7, 3);
        let f = factorize(&block(a.clone()), 1e-14).unwrap();
        let b: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let x = f.apply_pinv(&b).unwrap();
        // A^T (A x - b) computed with plain loops.
        for j in 0..7 {
            let mut g = 0.0;
            for i in 0..10 {
                let mut ax = 0.0;
                for k in 0..7 {
                    ax += a[(i, k)] * x[k];
                }
                g += a[(i, j)] * (ax - b[i]);
            }
            assert!(g.abs() < 1e-10, "gradient {g}");
        }
    }

    #[test]
    fn descending_values_and_orthonormal_columns() {
        let a = random(30, 20, 9);
        let f = factorize(&block(a), 1e-14).unwrap();
        assert!(f.singular_values.windows(2).all(|w| w[0] >= w[1]));
        for m in [&f.left, &f.right] {
            for i in 0..m.ncols() {
                for j in 0..m.ncols() {
                    let d: f64 = (0..m.nrows()).map(|r| m[(r, i)] * m[(r, j)]).sum();
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((d - e).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn row_space_identity() {
        let a = random(20, 15, 5);
        let f = factorize(&block(a.clone()), 1e-14).unwrap();
        let x: Vec<f64> = (0..15).map(|i| (0.3 * i as f64).cos()).collect();
        let mut y = vec![0.0; 20];
        gemv(a.as_ref(), &x, &mut y, false);
        let back = f.apply_pinv(&y).unwrap();
        for (p, q) in back.iter().zip(&x) {
            assert!((p - q).abs() < 1e-8);
        }
        let many = f.apply_pinv_many(faer::ColRef::from_slice(&y).as_mat()).unwrap();
        for i in 0..15 {
            assert!((many[(i, 0)] - back[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn scalar_factor_rejects_rotation() {
        let f = factorize(&block(Mat::identity(3, 3)), 1e-14).unwrap();
        assert!(rotated_pinv_apply(&f, &Mat3::identity(), &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn identity_rotation_matches_plain_apply() {
        let a = random(12, 9, 1);
        let f = factorize_with_components(a.as_ref(), 1e-14, 3).unwrap();
        let b: Vec<f64> = (0..12).map(|i| i as f64 - 4.0).collect();
        assert_eq!(rotated_pinv_apply(&f, &Mat3::identity(), &b).unwrap(), f.apply_pinv(&b).unwrap());
    }
}
