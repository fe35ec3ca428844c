//! Laplace and Stokes fundamental solutions and dense block assembly.
//!
//! With `r = x - y`:
//! * Laplace single layer `G = 1 / (4 pi |r|)`;
//! * Stokeslet `G = (I + r r^T / |r|^2) / (8 pi mu |r|)`;
//! * pressure `Pi = 2 r / |r|^3`, so that a Stokeslet of strength `l` carries
//!   pressure `Pi . l / (8 pi)`;
//! * traction `T = -3 (r.n) r r^T / (4 pi |r|^5)`, the stress of that pair
//!   contracted with the normal `n` at `x`.

use faer::Mat;

use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, Mat3, Real, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelKind<T> {
    LaplaceSingle,
    Stokeslet { mu: T },
    StokesPressure,
    StokesTraction { mu: T },
}

impl<T: Real> KernelKind<T> {
    /// Components per source strength.
    pub fn source_dim(&self) -> usize {
        match self {
            KernelKind::LaplaceSingle => 1,
            _ => 3,
        }
    }

    /// Components per target value.
    pub fn target_dim(&self) -> usize {
        match self {
            KernelKind::LaplaceSingle | KernelKind::StokesPressure => 1,
            _ => 3,
        }
    }

    pub fn needs_normals(&self) -> bool {
        matches!(self, KernelKind::StokesTraction { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelKind::Stokeslet { mu } | KernelKind::StokesTraction { mu } if !(mu > T::zero() && mu.is_finite()) => {
                Err(invalid(format!("viscosity must be positive, got {mu}")))
            }
            _ => Ok(()),
        }
    }
}

fn separation<T: Real>(x: Vec3<T>, y: Vec3<T>) -> Result<Vec3<T>> {
    let r = x - y;
    if r.norm_squared() == T::zero() {
        return Err(Error::Singular { target: 0, source_index: 0 });
    }
    Ok(r)
}

fn inv_four_pi<T: Real>() -> T {
    T::one() / (lit::<T>(4.0) * T::PI())
}

pub fn laplace_green<T: Real>(x: Vec3<T>, y: Vec3<T>) -> Result<T> {
    let r = separation(x, y)?;
    Ok(inv_four_pi::<T>() / r.norm())
}

pub fn stokeslet<T: Real>(x: Vec3<T>, y: Vec3<T>, mu: T) -> Result<Mat3<T>> {
    KernelKind::Stokeslet { mu }.validate()?;
    let r = separation(x, y)?;
    let r2 = r.norm_squared();
    let rn = r2.sqrt();
    let scale = T::one() / (lit::<T>(8.0) * T::PI() * mu * rn);
    let mut g = Mat3::outer(r, r).scaled(T::one() / r2);
    for i in 0..3 {
        g.0[i][i] = g.0[i][i] + T::one();
    }
    Ok(g.scaled(scale))
}

pub fn stokes_pressure<T: Real>(x: Vec3<T>, y: Vec3<T>) -> Result<Vec3<T>> {
    let r = separation(x, y)?;
    let rn = r.norm();
    Ok(r * (lit::<T>(2.0) / (rn * rn * rn)))
}

pub fn stokes_traction_kernel<T: Real>(x: Vec3<T>, n: Vec3<T>, y: Vec3<T>, mu: T) -> Result<Mat3<T>> {
    KernelKind::StokesTraction { mu }.validate()?;
    check_normal(n)?;
    let r = separation(x, y)?;
    Ok(traction_unchecked(r, n))
}

pub(crate) fn check_normal<T: Real>(n: Vec3<T>) -> Result<()> {
    let tol: T = if std::mem::size_of::<T>() == 4 { lit::<T>(1e-6) } else { lit::<T>(1e-12) };
    if !((n.norm() - T::one()).abs() <= tol) {
        return Err(invalid(format!("normal {n:?} is not a unit vector")));
    }
    Ok(())
}

#[inline(always)]
fn traction_unchecked<T: Real>(r: Vec3<T>, n: Vec3<T>) -> Mat3<T> {
    let r2 = r.norm_squared();
    let r5 = r2 * r2 * r2.sqrt();
    let c = -lit::<T>(3.0) * inv_four_pi::<T>() * r.dot(n) / r5;
    Mat3::outer(r, r).scaled(c)
}

/// A dense kernel matrix from sources to targets.
///
/// Unknowns are ordered node-major with the Cartesian component innermost, so
/// entry `(3 i + a, 3 j + b)` couples component `b` of source `j` to component
/// `a` of target `i`.
#[derive(Clone, Debug)]
pub struct DenseBlock<T> {
    pub matrix: Mat<T>,
}

impl<T: Real> DenseBlock<T> {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.matrix[(i, j)]
    }

    /// `block * x` into a new vector.
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        crate::error::check_len(self.cols(), x.len())?;
        let mut out = vec![T::zero(); self.rows()];
        crate::linalg::dense::gemv(self.matrix.as_ref(), x, &mut out, false);
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        (0..self.cols()).all(|j| (0..self.rows()).all(|i| self.matrix[(i, j)].is_finite()))
    }
}

/// Assembles the dense matrix of `kind` from `sources` to `targets`.
pub fn assemble_block<T: Real>(
    targets: &[Vec3<T>],
    sources: &[Vec3<T>],
    kind: KernelKind<T>,
    normals: Option<&[Vec3<T>]>,
) -> Result<DenseBlock<T>> {
    kind.validate()?;
    match (kind.needs_normals(), normals) {
        (true, None) => return Err(invalid("traction assembly needs target normals")),
        (false, Some(_)) => return Err(invalid("normals are only used by the traction kernel")),
        (true, Some(n)) => {
            crate::error::check_len(targets.len(), n.len())?;
            for v in n {
                check_normal(*v)?;
            }
        }
        _ => {}
    }
    for (i, x) in targets.iter().enumerate() {
        for (j, y) in sources.iter().enumerate() {
            if x == y {
                return Err(Error::Singular { target: i, source_index: j });
            }
        }
    }
    let td = kind.target_dim();
    let sd = kind.source_dim();
    let mut m = Mat::<T>::zeros(targets.len() * td, sources.len() * sd);
    for (j, &y) in sources.iter().enumerate() {
        for (i, &x) in targets.iter().enumerate() {
            match kind {
                KernelKind::LaplaceSingle => m[(i, j)] = inv_four_pi::<T>() / (x - y).norm(),
                KernelKind::Stokeslet { mu } => {
                    let g = stokeslet(x, y, mu)?;
                    for a in 0..3 {
                        for b in 0..3 {
                            m[(3 * i + a, 3 * j + b)] = g.0[a][b];
                        }
                    }
                }
                KernelKind::StokesPressure => {
                    let p = stokes_pressure(x, y)? * (T::one() / (lit::<T>(8.0) * T::PI()));
                    for b in 0..3 {
                        m[(i, 3 * j + b)] = p[b];
                    }
                }
                KernelKind::StokesTraction { .. } => {
                    let t = traction_unchecked(x - y, normals.unwrap()[i]);
                    for a in 0..3 {
                        for b in 0..3 {
                            m[(3 * i + a, 3 * j + b)] = t.0[a][b];
                        }
                    }
                }
            }
        }
    }
    Ok(DenseBlock { matrix: m })
}
