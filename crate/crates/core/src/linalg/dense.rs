//! Thin wrappers over faer products on plain slices.

use faer::{Accum, ColMut, ColRef, MatMut, MatRef, Par};

use crate::scalar::Real;

/// `out = A x` or `out = A^T x`.
pub fn gemv<T: Real>(a: MatRef<'_, T>, x: &[T], out: &mut [T], transpose: bool) {
    let x = ColRef::from_slice(x);
    let out = ColMut::from_slice_mut(out);
    if transpose {
        faer::linalg::matmul::matmul(out, Accum::Replace, a.transpose(), x, T::one(), Par::Seq);
    } else {
        faer::linalg::matmul::matmul(out, Accum::Replace, a, x, T::one(), Par::Seq);
    }
}

/// `out = alpha A B` or `out = out + alpha A B`.
pub fn gemm<T: Real>(out: MatMut<'_, T>, a: MatRef<'_, T>, b: MatRef<'_, T>, alpha: T, accumulate: bool) {
    let accum = if accumulate { Accum::Add } else { Accum::Replace };
    faer::linalg::matmul::matmul(out, accum, a, b, alpha, Par::Seq);
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    // Scaled to avoid overflow in single precision.
    let scale = norm_inf(a);
    if scale == T::zero() {
        return T::zero();
    }
    let inv = T::one() / scale;
    a.iter().fold(T::zero(), |s, &x| s + (x * inv) * (x * inv)).sqrt() * scale
}

pub fn norm_inf<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}
