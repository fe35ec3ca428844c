//! Block-system context: one-body factorizations shared across congruent
//! bodies, the flattened node arrays and the preconditioned matvec.

use std::sync::Arc;
use std::time::Instant;

use faer::Mat;

use crate::error::{check_len, invalid, Result};
use crate::evaluator::eval_field;
use crate::geometry::{Cluster, Particle};
use crate::kernels::{assemble_block, KernelKind};
use crate::linalg::dense::gemm;
use crate::linalg::rigid::RigidMatrix;
use crate::linalg::svd::{factorize_with_components, rotate_blocks};
use crate::linalg::{laplace_projector, rigid_matrix, stokes_projector, LinearOperator, OneBodyFactor, ProjectorApplier};
use crate::scalar::{lit, to_f64, Mat3, Real, Vec3};

use super::{ProblemKind, SolverConfig};

/// Body-frame diagonal block of a reference particle and its truncated SVD.
///
/// For Dirichlet problems the factored block is the plain single-layer block
/// `S0`; for completed problems it is `S0 (I - L0) + L_r0`.
#[derive(Debug)]
pub struct ShapeFactor<T> {
    pub template: Particle<T>,
    pub laplace: bool,
    pub completed: bool,
    pub trunc_eps: T,
    pub mu: T,
    /// Plain body-frame block `S0`.
    pub base: Mat<T>,
    pub factor: OneBodyFactor<T>,
}

impl<T: Real> ShapeFactor<T> {
    fn build(template: &Particle<T>, kind: ProblemKind, trunc_eps: T, mu: T) -> Result<(Self, f64, f64)> {
        let t0 = Instant::now();
        let kernel = kernel_for(kind, mu);
        let rel = |x: &Vec3<T>| *x;
        let colloc: Vec<Vec3<T>> = template.body_collocation.iter().map(rel).collect();
        let proxy: Vec<Vec3<T>> = template.body_proxy.iter().map(rel).collect();
        let base = assemble_block(&colloc, &proxy, kernel, None)?.matrix;
        let block = if kind.is_completed() { completed_block(&base, &colloc, &proxy, kind)? } else { base.clone() };
        let assembly = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let factor = factorize_with_components(block.as_ref(), trunc_eps, kind.components())?;
        let factorization = t1.elapsed().as_secs_f64();
        let sf = Self {
            template: template.clone(),
            laplace: kind.is_laplace(),
            completed: kind.is_completed(),
            trunc_eps,
            mu,
            base,
            factor,
        };
        Ok((sf, assembly, factorization))
    }

    /// Scale of `p` relative to the template if this factor can be reused for it.
    fn matches(&self, p: &Particle<T>, kind: ProblemKind, trunc_eps: T, mu: T) -> Option<T> {
        if self.laplace != kind.is_laplace() || self.completed != kind.is_completed() || self.trunc_eps != trunc_eps {
            return None;
        }
        if !self.laplace && self.mu != mu {
            return None;
        }
        let s = p.scale_relative_to(&self.template)?;
        if self.completed && (s - T::one()).abs() > lit::<T>(1e-12) {
            return None;
        }
        Some(s)
    }
}

fn kernel_for<T: Real>(kind: ProblemKind, mu: T) -> KernelKind<T> {
    if kind.is_laplace() {
        KernelKind::LaplaceSingle
    } else {
        KernelKind::Stokeslet { mu }
    }
}

/// `S (I - L) + L_r` in the body frame (center at the origin).
fn completed_block<T: Real>(s: &Mat<T>, colloc: &[Vec3<T>], proxy: &[Vec3<T>], kind: ProblemKind) -> Result<Mat<T>> {
    let (m, n) = (s.nrows(), s.ncols());
    let mut out = s.clone();
    if kind.is_laplace() {
        let inv_n = T::one() / lit::<T>(n as f64);
        for i in 0..m {
            let mean = (0..n).fold(T::zero(), |a, j| a + s[(i, j)]) * inv_n;
            for j in 0..n {
                out[(i, j)] = out[(i, j)] - mean + inv_n;
            }
        }
        return Ok(out);
    }
    let k_n = rigid_matrix(proxy, Vec3::zero())?;
    let k_m = rigid_matrix(colloc, Vec3::zero())?.dense();
    let gram_inverse = match stokes_projector(k_n.clone())? {
        ProjectorApplier::StokesRigid { gram_inverse, .. } => gram_inverse,
        ProjectorApplier::LaplaceMean { .. } => unreachable!(),
    };
    let k_n = k_n.dense();
    let mut sk = Mat::<T>::zeros(m, 6);
    gemm(sk.as_mut(), s.as_ref(), k_n.as_ref(), T::one(), false);
    let g = Mat::<T>::from_fn(6, 6, |i, j| gram_inverse[i][j]);
    // K_M - S K G^{-1}
    let mut coupling = k_m;
    gemm(coupling.as_mut(), sk.as_ref(), g.as_ref(), -T::one(), true);
    gemm(out.as_mut(), coupling.as_ref(), k_n.as_ref().transpose(), T::one(), true);
    Ok(out)
}

/// Factorizations shared across contexts, for instance over the runs of a
/// convergence study.
#[derive(Debug, Default)]
pub struct FactorCache<T> {
    entries: Vec<Arc<ShapeFactor<T>>>,
    /// SVDs computed through this cache.
    pub svd_count: usize,
}

impl<T: Real> FactorCache<T> {
    pub fn new() -> Self {
        Self { entries: Vec::new(), svd_count: 0 }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn find(&self, p: &Particle<T>, kind: ProblemKind, eps: T, mu: T) -> Option<(Arc<ShapeFactor<T>>, T)> {
        self.entries.iter().find_map(|e| e.matches(p, kind, eps, mu).map(|s| (e.clone(), s)))
    }
}

#[derive(Clone, Debug)]
struct BodyEntry<T> {
    group: usize,
    rotation: Mat3<T>,
    scale: T,
    colloc_offset: usize,
    colloc_len: usize,
    proxy_offset: usize,
    proxy_len: usize,
    k_m: Option<RigidMatrix<T>>,
    projector: ProjectorApplier<T>,
}

/// Everything the preconditioned block system needs for one cluster and one
/// problem kind.
#[derive(Debug)]
pub struct BlockSystemContext<T> {
    kind: ProblemKind,
    cluster: Cluster<T>,
    config: SolverConfig<T>,
    groups: Vec<Arc<ShapeFactor<T>>>,
    members: Vec<Vec<usize>>,
    bodies: Vec<BodyEntry<T>>,
    targets: Vec<Vec3<T>>,
    sources: Vec<Vec3<T>>,
    svd_count: usize,
    pub(crate) assembly_seconds: f64,
    pub(crate) factorization_seconds: f64,
}

impl<T: Real> BlockSystemContext<T> {
    pub fn new(kind: ProblemKind, cluster: &Cluster<T>, config: SolverConfig<T>) -> Result<Self> {
        let mut cache = FactorCache::new();
        Self::with_cache(kind, cluster, config, &mut cache)
    }

    /// Builds the context, reusing and extending `cache`.
    pub fn with_cache(kind: ProblemKind, cluster: &Cluster<T>, config: SolverConfig<T>, cache: &mut FactorCache<T>) -> Result<Self> {
        if cluster.is_empty() {
            return Err(invalid("cluster has no particles"));
        }
        config.evaluator.validate()?;
        let eps = config.trunc_eps;
        if !(eps >= T::epsilon() && eps <= lit::<T>(1e-2)) {
            return Err(invalid(format!("truncation threshold {} outside [machine epsilon, 1e-2]", to_f64(eps))));
        }
        let tol = config.tolerance_for(kind);
        if !(tol > 0.0 && tol < 1.0) {
            return Err(invalid(format!("GMRES tolerance {tol} outside (0, 1)")));
        }
        if config.max_iters == 0 {
            return Err(invalid("max_iters must be positive"));
        }
        if !kind.is_laplace() {
            kernel_for(kind, config.mu).validate()?;
        }
        let c = kind.components();
        let mut assembly = 0.0;
        let mut factorization = 0.0;
        let mut svd_count = 0;
        let mut groups: Vec<Arc<ShapeFactor<T>>> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut bodies = Vec::with_capacity(cluster.len());
        let (mut colloc_offset, mut proxy_offset) = (0, 0);
        for (k, p) in cluster.particles.iter().enumerate() {
            let t0 = Instant::now();
            let local = groups.iter().position(|g| g.matches(p, kind, eps, config.mu).is_some());
            let (group, scale) = match local {
                Some(g) => (g, groups[g].matches(p, kind, eps, config.mu).unwrap_or(T::one())),
                None => {
                    let (sf, s) = match cache.find(p, kind, eps, config.mu) {
                        Some(found) => found,
                        None => {
                            let (sf, a, f) = ShapeFactor::build(p, kind, eps, config.mu)?;
                            assembly += a;
                            factorization += f;
                            svd_count += 1;
                            cache.svd_count += 1;
                            let sf = Arc::new(sf);
                            cache.entries.push(sf.clone());
                            (sf, T::one())
                        }
                    };
                    groups.push(sf);
                    members.push(Vec::new());
                    (groups.len() - 1, s)
                }
            };
            members[group].push(k);
            let rotation = p.rotation;
            let proxy_nodes: Vec<Vec3<T>> = p.proxy.iter().copied().collect();
            let (k_m, projector) = if kind.is_laplace() {
                (None, laplace_projector(p.n())?)
            } else {
                let colloc_nodes: Vec<Vec3<T>> = p.collocation.iter().copied().collect();
                (Some(rigid_matrix(&colloc_nodes, p.center)?), stokes_projector(rigid_matrix(&proxy_nodes, p.center)?)?)
            };
            bodies.push(BodyEntry {
                group,
                rotation,
                scale,
                colloc_offset,
                colloc_len: c * p.m(),
                proxy_offset,
                proxy_len: c * p.n(),
                k_m,
                projector,
            });
            colloc_offset += c * p.m();
            proxy_offset += c * p.n();
            assembly += t0.elapsed().as_secs_f64();
        }
        let targets = cluster.particles.iter().flat_map(|p| p.collocation.iter().copied()).collect();
        let sources = cluster.particles.iter().flat_map(|p| p.proxy.iter().copied()).collect();
        Ok(Self {
            kind,
            cluster: cluster.clone(),
            config,
            groups,
            members,
            bodies,
            targets,
            sources,
            svd_count,
            assembly_seconds: assembly,
            factorization_seconds: factorization,
        })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn cluster(&self) -> &Cluster<T> {
        &self.cluster
    }

    pub fn config(&self) -> &SolverConfig<T> {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bodies.is_empty()
    }

    /// SVDs computed while building this context (cache hits excluded).
    pub fn svd_count(&self) -> usize {
        self.svd_count
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn body_group(&self, k: usize) -> usize {
        self.bodies[k].group
    }

    /// Body-frame scale of particle `k` relative to its group template.
    pub fn body_scale(&self, k: usize) -> T {
        self.bodies[k].scale
    }

    pub fn factor(&self, group: usize) -> &OneBodyFactor<T> {
        &self.groups[group].factor
    }

    pub fn projector(&self, k: usize) -> &ProjectorApplier<T> {
        &self.bodies[k].projector
    }

    pub fn collocation_rigid(&self, k: usize) -> Option<&RigidMatrix<T>> {
        self.bodies[k].k_m.as_ref()
    }

    pub fn collocation_range(&self, k: usize) -> std::ops::Range<usize> {
        let b = &self.bodies[k];
        b.colloc_offset..b.colloc_offset + b.colloc_len
    }

    pub fn proxy_range(&self, k: usize) -> std::ops::Range<usize> {
        let b = &self.bodies[k];
        b.proxy_offset..b.proxy_offset + b.proxy_len
    }

    /// Length of the stacked collocation vector (size of the square system).
    pub fn unknowns(&self) -> usize {
        self.bodies.last().map_or(0, |b| b.colloc_offset + b.colloc_len)
    }

    /// Length of the stacked strength vector.
    pub fn strength_len(&self) -> usize {
        self.bodies.last().map_or(0, |b| b.proxy_offset + b.proxy_len)
    }

    pub fn targets(&self) -> &[Vec3<T>] {
        &self.targets
    }

    pub fn sources(&self) -> &[Vec3<T>] {
        &self.sources
    }

    pub fn kernel(&self) -> KernelKind<T> {
        kernel_for(self.kind, self.config.mu)
    }

    /// Per-body application of `B^(k)+`, the pseudoinverse of the factored
    /// diagonal block, batched over each group.
    pub fn apply_pinv(&self, gamma: &[T]) -> Result<Vec<T>> {
        check_len(self.unknowns(), gamma.len())?;
        let mut out = vec![T::zero(); self.strength_len()];
        let vector = !self.kind.is_laplace();
        for (g, members) in self.members.iter().enumerate() {
            let factor = &self.groups[g].factor;
            let rows = factor.rows();
            let mut rhs = Mat::<T>::zeros(rows, members.len());
            for (j, &k) in members.iter().enumerate() {
                let b = &self.bodies[k];
                let mut col = gamma[b.colloc_offset..b.colloc_offset + b.colloc_len].to_vec();
                if vector {
                    rotate_blocks(&b.rotation, &mut col, true);
                }
                for (i, v) in col.into_iter().enumerate() {
                    rhs[(i, j)] = v;
                }
            }
            let sol = factor.apply_pinv_many(rhs.as_ref())?;
            for (j, &k) in members.iter().enumerate() {
                let b = &self.bodies[k];
                let dst = &mut out[b.proxy_offset..b.proxy_offset + b.proxy_len];
                for (i, d) in dst.iter_mut().enumerate() {
                    *d = sol[(i, j)] * b.scale;
                }
                if vector {
                    rotate_blocks(&b.rotation, dst, false);
                }
            }
        }
        Ok(out)
    }

    /// `(I - L^(k))` applied to every body's strengths in place.
    pub fn project_out(&self, strengths: &mut [T]) -> Result<()> {
        check_len(self.strength_len(), strengths.len())?;
        for b in &self.bodies {
            b.projector.complement_in_place(&mut strengths[b.proxy_offset..b.proxy_offset + b.proxy_len])?;
        }
        Ok(())
    }

    /// Stacked `S^(kk) lambda^(k)` with the plain single-layer diagonal blocks.
    pub fn apply_self_blocks(&self, strengths: &[T]) -> Result<Vec<T>> {
        check_len(self.strength_len(), strengths.len())?;
        let mut out = vec![T::zero(); self.unknowns()];
        let vector = !self.kind.is_laplace();
        for (g, members) in self.members.iter().enumerate() {
            let base = &self.groups[g].base;
            let mut x = Mat::<T>::zeros(base.ncols(), members.len());
            for (j, &k) in members.iter().enumerate() {
                let b = &self.bodies[k];
                let mut col = strengths[b.proxy_offset..b.proxy_offset + b.proxy_len].to_vec();
                if vector {
                    rotate_blocks(&b.rotation, &mut col, true);
                }
                for (i, v) in col.into_iter().enumerate() {
                    x[(i, j)] = v;
                }
            }
            let mut y = Mat::<T>::zeros(base.nrows(), members.len());
            gemm(y.as_mut(), base.as_ref(), x.as_ref(), T::one(), false);
            for (j, &k) in members.iter().enumerate() {
                let b = &self.bodies[k];
                let dst = &mut out[b.colloc_offset..b.colloc_offset + b.colloc_len];
                let inv = T::one() / b.scale;
                for (i, d) in dst.iter_mut().enumerate() {
                    *d = y[(i, j)] * inv;
                }
                if vector {
                    rotate_blocks(&b.rotation, dst, false);
                }
            }
        }
        Ok(out)
    }

    /// Field of all proxy sources at all collocation nodes, self terms included.
    pub fn eval_all(&self, strengths: &[T]) -> Result<Vec<T>> {
        check_len(self.strength_len(), strengths.len())?;
        eval_field(self.kernel(), &self.sources, strengths, &self.targets, None, &self.config.evaluator)
    }

    /// Field at all collocation nodes of every body except the target's own:
    /// the global sum minus the diagonal-block products.
    pub fn off_diagonal_field(&self, strengths: &[T]) -> Result<Vec<T>> {
        if self.bodies.len() == 1 {
            check_len(self.strength_len(), strengths.len())?;
            return Ok(vec![T::zero(); self.unknowns()]);
        }
        let mut all = self.eval_all(strengths)?;
        let own = self.apply_self_blocks(strengths)?;
        for (a, o) in all.iter_mut().zip(&own) {
            *a = *a - *o;
        }
        Ok(all)
    }

    /// Strengths represented by `gamma`: `B^(k)+ gamma^(k)`, followed by
    /// `(I - L)` for completed problems.
    pub fn strengths_from(&self, gamma: &[T]) -> Result<Vec<T>> {
        let mut lam = self.apply_pinv(gamma)?;
        if self.kind.is_completed() {
            self.project_out(&mut lam)?;
        }
        Ok(lam)
    }

    /// The preconditioned operator `gamma + sum_{l != k} S^(kl) lambda^(l)`.
    pub fn matvec(&self, gamma: &[T]) -> Result<Vec<T>> {
        let lam = self.strengths_from(gamma)?;
        let mut y = self.off_diagonal_field(&lam)?;
        for (a, g) in y.iter_mut().zip(gamma) {
            *a = *a + *g;
        }
        Ok(y)
    }
}

/// The preconditioned block system as a [`LinearOperator`].
pub struct PreconditionedOperator<'a, T> {
    pub ctx: &'a BlockSystemContext<T>,
}

impl<T: Real> LinearOperator<T> for PreconditionedOperator<'_, T> {
    fn dim(&self) -> usize {
        self.ctx.unknowns()
    }

    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()> {
        check_len(self.dim(), y.len())?;
        y.copy_from_slice(&self.ctx.matvec(x)?);
        Ok(())
    }
}
