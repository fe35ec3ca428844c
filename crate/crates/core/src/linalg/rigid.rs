//! Rigid-body matrices, the projectors onto rigid (or constant) strength
//! vectors and the rectangular coupling `L_r`.

use faer::Mat;

use crate::error::{check_len, invalid, Error, Result};
use crate::scalar::{from_usize, lit, to_f64, Real, Vec3};

pub type Six<T> = [T; 6];

/// The `3n x 6` matrix with node blocks `[I_3 | (x - c)_x]`, where
/// `(d)_x` is the skew matrix with `(d)_x w = w x d`, so that
/// `K [v; omega] = v + omega x (x - c)` at every node.
#[derive(Clone, Debug)]
pub struct RigidMatrix<T> {
    pub center: Vec3<T>,
    pub offsets: Vec<Vec3<T>>,
}

pub fn rigid_matrix<T: Real>(nodes: &[Vec3<T>], center: Vec3<T>) -> Result<RigidMatrix<T>> {
    if nodes.is_empty() {
        return Err(invalid("rigid matrix needs at least one node"));
    }
    Ok(RigidMatrix { center, offsets: nodes.iter().map(|&x| x - center).collect() })
}

impl<T: Real> RigidMatrix<T> {
    pub fn nodes(&self) -> usize {
        self.offsets.len()
    }

    /// `K [v; omega]`.
    pub fn apply(&self, motion: &Six<T>) -> Vec<T> {
        let v = Vec3::new(motion[0], motion[1], motion[2]);
        let w = Vec3::new(motion[3], motion[4], motion[5]);
        let mut out = Vec::with_capacity(3 * self.nodes());
        for d in &self.offsets {
            out.extend_from_slice(&(v + w.cross(*d)).0);
        }
        out
    }

    /// `K^T lambda = (sum lambda_i, sum d_i x lambda_i)`.
    pub fn apply_transpose(&self, lambda: &[T]) -> Result<Six<T>> {
        check_len(3 * self.nodes(), lambda.len())?;
        let mut f = Vec3::zero();
        let mut t = Vec3::zero();
        for (d, l) in self.offsets.iter().zip(lambda.chunks_exact(3)) {
            let l = Vec3::new(l[0], l[1], l[2]);
            f += l;
            t += d.cross(l);
        }
        Ok([f[0], f[1], f[2], t[0], t[1], t[2]])
    }

    pub fn dense(&self) -> Mat<T> {
        let n = self.nodes();
        let mut k = Mat::<T>::zeros(3 * n, 6);
        for (i, d) in self.offsets.iter().enumerate() {
            for a in 0..3 {
                k[(3 * i + a, a)] = T::one();
            }
            k[(3 * i, 4)] = d[2];
            k[(3 * i, 5)] = -d[1];
            k[(3 * i + 1, 3)] = -d[2];
            k[(3 * i + 1, 5)] = d[0];
            k[(3 * i + 2, 3)] = d[1];
            k[(3 * i + 2, 4)] = -d[0];
        }
        k
    }

    /// `K^T K`.
    pub fn gram(&self) -> [[T; 6]; 6] {
        let mut g = [[T::zero(); 6]; 6];
        let n = from_usize::<T>(self.nodes());
        for a in 0..3 {
            g[a][a] = n;
        }
        let mut sum = Vec3::zero();
        let mut second = [[T::zero(); 3]; 3];
        for d in &self.offsets {
            sum += *d;
            for a in 0..3 {
                for b in 0..3 {
                    second[a][b] = second[a][b] + d[a] * d[b];
                }
            }
        }
        // Force-torque coupling: sum of [d]_x blocks.
        let s = sum;
        let skew = [[T::zero(), s[2], -s[1]], [-s[2], T::zero(), s[0]], [s[1], -s[0], T::zero()]];
        for a in 0..3 {
            for b in 0..3 {
                g[a][3 + b] = skew[a][b];
                g[3 + b][a] = skew[a][b];
            }
        }
        // Rotational block: sum (|d|^2 I - d d^T).
        let tr = second[0][0] + second[1][1] + second[2][2];
        for a in 0..3 {
            for b in 0..3 {
                g[3 + a][3 + b] = if a == b { tr - second[a][b] } else { -second[a][b] };
            }
        }
        g
    }
}

/// Cholesky factorization and inverse of an SPD 6x6 matrix.
fn spd_inverse<T: Real>(g: &[[T; 6]; 6]) -> Result<[[T; 6]; 6]> {
    let mut l = [[T::zero(); 6]; 6];
    for j in 0..6 {
        let mut d = g[j][j];
        for k in 0..j {
            d = d - l[j][k] * l[j][k];
        }
        if !(d > T::zero()) {
            return Err(Error::DegenerateGeometry("rigid Gram matrix is not positive definite".into()));
        }
        l[j][j] = d.sqrt();
        for i in j + 1..6 {
            let mut s = g[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            l[i][j] = s / l[j][j];
        }
    }
    let mut inv = [[T::zero(); 6]; 6];
    for col in 0..6 {
        let mut y = [T::zero(); 6];
        for i in 0..6 {
            let mut s = if i == col { T::one() } else { T::zero() };
            for k in 0..i {
                s = s - l[i][k] * y[k];
            }
            y[i] = s / l[i][i];
        }
        for i in (0..6).rev() {
            let mut s = y[i];
            for k in i + 1..6 {
                s = s - l[k][i] * inv[k][col];
            }
            inv[i][col] = s / l[i][i];
        }
    }
    Ok(inv)
}

fn mat6_vec<T: Real>(m: &[[T; 6]; 6], v: &Six<T>) -> Six<T> {
    let mut out = [T::zero(); 6];
    for i in 0..6 {
        for j in 0..6 {
            out[i] = out[i] + m[i][j] * v[j];
        }
    }
    out
}

/// Orthogonal projector onto constant (Laplace) or rigid (Stokes) strength vectors.
#[derive(Clone, Debug)]
pub enum ProjectorApplier<T> {
    /// `L = 1 1^T / n`.
    LaplaceMean { n: usize },
    /// `L = K (K^T K)^{-1} K^T`.
    StokesRigid { k: RigidMatrix<T>, gram_inverse: [[T; 6]; 6] },
}

pub fn laplace_projector<T: Real>(n: usize) -> Result<ProjectorApplier<T>> {
    if n == 0 {
        return Err(invalid("projector needs at least one node"));
    }
    Ok(ProjectorApplier::LaplaceMean { n })
}

/// Builds the rigid projector, rejecting Gram matrices with condition above 1e12.
pub fn stokes_projector<T: Real>(k: RigidMatrix<T>) -> Result<ProjectorApplier<T>> {
    let g = k.gram();
    let gm = Mat::<f64>::from_fn(6, 6, |i, j| to_f64(g[i][j]));
    let eig = gm
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigenvalues of the rigid Gram matrix: {e:?}")))?;
    let (min, max) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !(min > 0.0) || max / min > 1e12 {
        return Err(Error::DegenerateGeometry(format!(
            "rigid Gram matrix is singular or ill-conditioned (eigenvalues {min:.3e} .. {max:.3e})"
        )));
    }
    let gram_inverse = spd_inverse(&g)?;
    Ok(ProjectorApplier::StokesRigid { k, gram_inverse })
}

impl<T: Real> ProjectorApplier<T> {
    pub fn dim(&self) -> usize {
        match self {
            ProjectorApplier::LaplaceMean { n } => *n,
            ProjectorApplier::StokesRigid { k, .. } => 3 * k.nodes(),
        }
    }

    /// `L v`.
    pub fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        check_len(self.dim(), v.len())?;
        match self {
            ProjectorApplier::LaplaceMean { n } => {
                let mean = v.iter().fold(T::zero(), |s, &x| s + x) / from_usize::<T>(*n);
                Ok(vec![mean; *n])
            }
            ProjectorApplier::StokesRigid { k, gram_inverse } => {
                let c = mat6_vec(gram_inverse, &k.apply_transpose(v)?);
                Ok(k.apply(&c))
            }
        }
    }

    /// `(I - L) v`.
    pub fn complement(&self, v: &[T]) -> Result<Vec<T>> {
        let lv = self.apply(v)?;
        Ok(v.iter().zip(&lv).map(|(&a, &b)| a - b).collect())
    }

    /// `(I - L) v` in place.
    pub fn complement_in_place(&self, v: &mut [T]) -> Result<()> {
        let lv = self.apply(v)?;
        for (a, b) in v.iter_mut().zip(&lv) {
            *a = *a - *b;
        }
        Ok(())
    }

    /// Minimum-norm strengths carrying the given net load: `q / n` on every
    /// node (Laplace, `load[0] = q`), or `K (K^T K)^{-1} [f; t]` (Stokes).
    pub fn completion(&self, load: &[T]) -> Result<Vec<T>> {
        match self {
            ProjectorApplier::LaplaceMean { n } => {
                check_len(1, load.len())?;
                Ok(vec![load[0] / from_usize::<T>(*n); *n])
            }
            ProjectorApplier::StokesRigid { k, gram_inverse } => {
                check_len(6, load.len())?;
                let l: Six<T> = [load[0], load[1], load[2], load[3], load[4], load[5]];
                Ok(k.apply(&mat6_vec(gram_inverse, &l)))
            }
        }
    }

    /// Largest entry of `|G^{-1} G - I|`, zero for the Laplace projector.
    pub fn gram_defect(&self) -> T {
        match self {
            ProjectorApplier::LaplaceMean { .. } => T::zero(),
            ProjectorApplier::StokesRigid { k, gram_inverse } => {
                let g = k.gram();
                let mut worst = T::zero();
                for i in 0..6 {
                    for j in 0..6 {
                        let mut s = T::zero();
                        for l in 0..6 {
                            s = s + gram_inverse[i][l] * g[l][j];
                        }
                        let e = if i == j { T::one() } else { T::zero() };
                        worst = worst.max((s - e).abs());
                    }
                }
                worst
            }
        }
    }
}

/// The rank-one (Laplace) or rank-six (Stokes) rectangular coupling `L_r`.
#[derive(Clone, Debug)]
pub enum Coupling<T> {
    /// `M x N` matrix with all entries `1 / N`.
    Laplace { m: usize, n: usize },
    /// `K_M K_N^T`.
    Stokes { k_m: RigidMatrix<T>, k_n: RigidMatrix<T> },
}

pub fn coupling_laplace<T: Real>(m: usize, n: usize) -> Coupling<T> {
    Coupling::Laplace { m, n }
}

pub fn coupling_lr<T: Real>(k_m: RigidMatrix<T>, k_n: RigidMatrix<T>) -> Result<Coupling<T>> {
    let scale = k_m.center.max_abs().max(T::one());
    if (k_m.center - k_n.center).max_abs() > lit::<T>(1e-12) * scale {
        return Err(invalid("collocation and proxy rigid matrices must share a center"));
    }
    Ok(Coupling::Stokes { k_m, k_n })
}

impl<T: Real> Coupling<T> {
    pub fn rows(&self) -> usize {
        match self {
            Coupling::Laplace { m, .. } => *m,
            Coupling::Stokes { k_m, .. } => 3 * k_m.nodes(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Coupling::Laplace { n, .. } => *n,
            Coupling::Stokes { k_n, .. } => 3 * k_n.nodes(),
        }
    }

    /// `L_r v`.
    pub fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        check_len(self.cols(), v.len())?;
        match self {
            Coupling::Laplace { m, n } => {
                let s = v.iter().fold(T::zero(), |a, &x| a + x) / from_usize::<T>(*n);
                Ok(vec![s; *m])
            }
            Coupling::Stokes { k_m, k_n } => Ok(k_m.apply(&k_n.apply_transpose(v)?)),
        }
    }

    pub fn dense(&self) -> Mat<T> {
        match self {
            Coupling::Laplace { m, n } => Mat::from_fn(*m, *n, |_, _| T::one() / from_usize::<T>(*n)),
            Coupling::Stokes { k_m, k_n } => {
                let a = k_m.dense();
                let b = k_n.dense();
                let mut out = Mat::<T>::zeros(a.nrows(), b.nrows());
                crate::linalg::dense::gemm(out.as_mut(), a.as_ref(), b.as_ref().transpose(), T::one(), false);
                out
            }
        }
    }
}
