//! Non-restarted GMRES with modified Gram–Schmidt and Givens rotations.

use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::dense::{axpy, dot, norm2};
use crate::scalar::{to_f64, Real};

/// A square linear operator.
pub trait LinearOperator<T> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()>;
}

/// Dense matrices act as operators, mostly for tests.
impl<T: Real> LinearOperator<T> for faer::Mat<T> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()> {
        crate::linalg::dense::gemv(self.as_ref(), x, y, false);
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct GmresReport {
    /// Krylov dimension at exit.
    pub iterations: usize,
    /// Relative residual estimates, starting with the initial one (length `iterations + 1`).
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// `|b - A x| / |b|` recomputed from the returned iterate.
    pub final_residual: f64,
}

/// Solves `A x = b` from a zero initial guess, stopping when the relative
/// residual drops to `rel_tol` or after `max_iters` iterations. Without
/// convergence the last iterate is returned with `converged = false`.
pub fn gmres<T: Real, A: LinearOperator<T> + ?Sized>(op: &A, b: &[T], rel_tol: f64, max_iters: usize) -> Result<(Vec<T>, GmresReport)> {
    let n = op.dim();
    check_len(n, b.len())?;
    if !(rel_tol > 0.0) {
        return Err(invalid("GMRES tolerance must be positive"));
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite right-hand side".into()));
    }
    let beta = norm2(b);
    if beta == T::zero() {
        let report = GmresReport { iterations: 0, residual_history: vec![0.0], converged: true, final_residual: 0.0 };
        return Ok((vec![T::zero(); n], report));
    }
    let tol = T::from_f64(rel_tol).unwrap_or(T::epsilon());
    let max_iters = max_iters.min(n).max(1);

    let mut basis: Vec<Vec<T>> = vec![b.iter().map(|&x| x / beta).collect()];
    // Column j of the Hessenberg matrix, already rotated.
    let mut h: Vec<Vec<T>> = Vec::new();
    let mut cs: Vec<T> = Vec::new();
    let mut sn: Vec<T> = Vec::new();
    let mut g: Vec<T> = vec![beta];
    let mut history = vec![1.0];
    let mut converged = false;
    let mut w = vec![T::zero(); n];

    for j in 0..max_iters {
        op.apply(&basis[j], &mut w)?;
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("operator produced non-finite values at iteration {}", j + 1)));
        }
        let mut col = vec![T::zero(); j + 2];
        for (i, v) in basis.iter().enumerate() {
            let hij = dot(&w, v);
            col[i] = hij;
            axpy(-hij, v, &mut w);
        }
        let hnext = norm2(&w);
        col[j + 1] = hnext;
        for i in 0..j {
            let t = cs[i] * col[i] + sn[i] * col[i + 1];
            col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
            col[i] = t;
        }
        let (c, s) = givens(col[j], col[j + 1]);
        col[j] = c * col[j] + s * col[j + 1];
        col[j + 1] = T::zero();
        cs.push(c);
        sn.push(s);
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s * gj);
        h.push(col);
        let rel = to_f64(g[j + 1].abs() / beta);
        history.push(rel);
        let breakdown = hnext <= T::epsilon() * beta;
        if g[j + 1].abs() <= tol * beta || breakdown {
            converged = true;
            break;
        }
        if j + 1 < max_iters {
            basis.push(w.iter().map(|&x| x / hnext).collect());
        }
    }

    let k = h.len();
    let mut y = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for l in i + 1..k {
            s = s - h[l][i] * y[l];
        }
        y[i] = s / h[i][i];
    }
    let mut x = vec![T::zero(); n];
    for (yi, v) in y.iter().zip(&basis) {
        axpy(*yi, v, &mut x);
    }
    op.apply(&x, &mut w)?;
    let r: Vec<T> = b.iter().zip(&w).map(|(&bi, &wi)| bi - wi).collect();
    let final_residual = to_f64(norm2(&r) / beta);
    Ok((x, GmresReport { iterations: k, residual_history: history, converged, final_residual }))
}

fn givens<T: Real>(a: T, b: T) -> (T, T) {
    if b == T::zero() {
        return (T::one(), T::zero());
    }
    let r = a.hypot(b);
    (a / r, b / r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::Mat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_one_iteration() {
        let a = Mat::<f64>::identity(5, 5);
        let b = [1.0, -2.0, 3.0, 0.5, 7.0];
        let (x, rep) = gmres(&a, &b, 1e-12, 50).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        for (p, q) in x.iter().zip(&b) {
            assert!((p - q).abs() < 1e-15);
        }
        assert_eq!(rep.residual_history.len(), 2);
    }

    #[test]
    fn diagonal_three() {
        let mut a = Mat::<f64>::zeros(3, 3);
        for i in 0..3 {
            a[(i, i)] = (i + 1) as f64;
        }
        let (x, rep) = gmres(&a, &[1.0, 2.0, 3.0], 1e-12, 50).unwrap();
        assert!(rep.iterations <= 3);
        for v in x {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs() {
        let a = Mat::<f64>::identity(3, 3);
        let (x, rep) = gmres(&a, &[0.0; 3], 1e-8, 10).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.residual_history.len(), 1);
    }

    #[test]
    fn nonconvergence_flagged() {
        // Cyclic shift: GMRES makes no progress until the full dimension.
        let n = 20;
        let a = Mat::<f64>::from_fn(n, n, |i, j| if (i + 1) % n == j { 1.0 } else { 0.0 });
        let mut b = vec![0.0; n];
        b[0] = 1.0;
        let (_, rep) = gmres(&a, &b, 1e-10, 5).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 5);
        assert_eq!(rep.residual_history.len(), 6);
    }

    #[test]
    fn random_well_conditioned_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 60;
        let a = Mat::<f64>::from_fn(n, n, |i, j| if i == j { 3.0 } else { 0.0 } + rng.random_range(-0.1..0.1));
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let (x, rep) = gmres(&a, &b, 1e-12, 100).unwrap();
        assert!(rep.converged);
        assert!(rep.residual_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(rep.final_residual < 1e-11);
        let mut ax = vec![0.0; n];
        a.apply(&x, &mut ax).unwrap();
        for (p, q) in ax.iter().zip(&b) {
            assert!((p - q).abs() < 1e-10);
        }
        assert_eq!(rep.residual_history.len(), rep.iterations + 1);
    }
}
