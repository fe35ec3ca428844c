//! Bulk kernel summation from many sources to many targets.
//!
//! The direct backend sums every source-target pair. Each target keeps
//! `LANES` partial sums that visit sources in a fixed interleaved order, so
//! results do not depend on how targets are split across threads.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{check_len, invalid, Error, Result};
use crate::kernels::{check_normal, KernelKind};
use crate::scalar::{lit, Real, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Backend<T> {
    Direct,
    /// Tolerance-bounded summation. The provided implementation tiles the
    /// direct sum over sources for cache reuse and is exact to rounding.
    Accelerated { tolerance: T },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvaluatorConfig<T> {
    pub backend: Backend<T>,
    /// Worker threads; `None` uses rayon's global pool.
    pub threads: Option<usize>,
}

impl<T: Real> Default for EvaluatorConfig<T> {
    fn default() -> Self {
        Self { backend: Backend::Direct, threads: None }
    }
}

impl<T: Real> EvaluatorConfig<T> {
    pub fn direct() -> Self {
        Self::default()
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Backend::Accelerated { tolerance } = self.backend {
            if !(tolerance >= lit::<T>(1e-14) && tolerance <= lit::<T>(1e-2)) {
                return Err(invalid(format!("accelerated tolerance {tolerance} outside [1e-14, 1e-2]")));
            }
        }
        if self.threads == Some(0) {
            return Err(invalid("thread count must be positive"));
        }
        Ok(())
    }
}

fn pool(threads: usize) -> Result<Arc<rayon::ThreadPool>> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<rayon::ThreadPool>>>> = OnceLock::new();
    let mut map = POOLS.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
    if let Some(p) = map.get(&threads) {
        return Ok(p.clone());
    }
    let p = Arc::new(
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?,
    );
    map.insert(threads, p.clone());
    Ok(p)
}

/// Runs `f` inside the configured thread pool.
pub(crate) fn in_pool<T: Real, R: Send>(cfg: &EvaluatorConfig<T>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match cfg.threads {
        None => Ok(f()),
        Some(n) => Ok(pool(n)?.install(f)),
    }
}

const LANES: usize = 8;
const TARGET_CHUNK: usize = 64;
const SOURCE_TILE: usize = 2048;

/// Sources in structure-of-arrays form, padded to a multiple of `LANES`
/// with zero-strength sources at a far-away point.
struct Sources<T> {
    x: Vec<T>,
    y: Vec<T>,
    z: Vec<T>,
    s: [Vec<T>; 3],
}

impl<T: Real> Sources<T> {
    fn new(points: &[Vec3<T>], strengths: &[T], dim: usize) -> Self {
        let len = points.len();
        let padded = len.div_ceil(LANES) * LANES;
        let far = T::max_value().sqrt() * lit::<T>(0.25);
        let mut x = Vec::with_capacity(padded);
        let mut y = Vec::with_capacity(padded);
        let mut z = Vec::with_capacity(padded);
        let mut s = [Vec::with_capacity(padded), Vec::with_capacity(padded), Vec::with_capacity(padded)];
        for (j, p) in points.iter().enumerate() {
            x.push(p[0]);
            y.push(p[1]);
            z.push(p[2]);
            for c in 0..3 {
                s[c].push(if c < dim { strengths[dim * j + c] } else { T::zero() });
            }
        }
        for _ in len..padded {
            x.push(far);
            y.push(far);
            z.push(far);
            for c in s.iter_mut() {
                c.push(T::zero());
            }
        }
        Self { x, y, z, s }
    }
}

/// Lane accumulators for one target.
#[derive(Clone, Copy)]
struct Acc<T> {
    v: [[T; LANES]; 3],
}

impl<T: Real> Acc<T> {
    fn zero() -> Self {
        Self { v: [[T::zero(); LANES]; 3] }
    }

    fn reduce(&self, c: usize) -> T {
        let l = &self.v[c];
        ((l[0] + l[1]) + (l[2] + l[3])) + ((l[4] + l[5]) + (l[6] + l[7]))
    }
}

#[inline(always)]
fn lanes<T>(v: &[T], start: usize, end: usize) -> std::slice::ChunksExact<'_, T> {
    v[start..end].chunks_exact(LANES)
}

#[inline(always)]
fn arr<T: Copy>(c: &[T]) -> &[T; LANES] {
    c.try_into().expect("lane chunk")
}

/// Adds the contributions of sources `[start, end)` (multiples of `LANES`) to `acc`.
#[inline(always)]
fn accumulate<T: Real>(kind: &KernelKind<T>, src: &Sources<T>, t: Vec3<T>, n: Vec3<T>, start: usize, end: usize, acc: &mut Acc<T>) {
    let (tx, ty, tz) = (t[0], t[1], t[2]);
    let xs = lanes(&src.x, start, end);
    let ys = lanes(&src.y, start, end);
    let zs = lanes(&src.z, start, end);
    let [mut b0, mut b1, mut b2] = acc.v;
    let (a0, a1, a2) = (&mut b0, &mut b1, &mut b2);
    match kind {
        KernelKind::LaplaceSingle => {
            for ((x, y), (z, q)) in xs.zip(ys).zip(zs.zip(lanes(&src.s[0], start, end))) {
                let (x, y, z, q) = (arr(x), arr(y), arr(z), arr(q));
                for l in 0..LANES {
                    let rx = tx - x[l];
                    let ry = ty - y[l];
                    let rz = tz - z[l];
                    let r2 = rx * rx + ry * ry + rz * rz;
                    a0[l] = a0[l] + q[l] / r2.sqrt();
                }
            }
        }
        KernelKind::Stokeslet { .. } => {
            let ss = lanes(&src.s[0], start, end).zip(lanes(&src.s[1], start, end)).zip(lanes(&src.s[2], start, end));
            for (((x, y), z), ((sx, sy), sz)) in xs.zip(ys).zip(zs).zip(ss) {
                let (x, y, z, sx, sy, sz) = (arr(x), arr(y), arr(z), arr(sx), arr(sy), arr(sz));
                for l in 0..LANES {
                    let rx = tx - x[l];
                    let ry = ty - y[l];
                    let rz = tz - z[l];
                    let r2 = rx * rx + ry * ry + rz * rz;
                    let inv_r = T::one() / r2.sqrt();
                    let inv_r2 = inv_r * inv_r;
                    let proj = (rx * sx[l] + ry * sy[l] + rz * sz[l]) * inv_r2;
                    a0[l] = a0[l] + (sx[l] + rx * proj) * inv_r;
                    a1[l] = a1[l] + (sy[l] + ry * proj) * inv_r;
                    a2[l] = a2[l] + (sz[l] + rz * proj) * inv_r;
                }
            }
        }
        KernelKind::StokesPressure => {
            let ss = lanes(&src.s[0], start, end).zip(lanes(&src.s[1], start, end)).zip(lanes(&src.s[2], start, end));
            for (((x, y), z), ((sx, sy), sz)) in xs.zip(ys).zip(zs).zip(ss) {
                let (x, y, z, sx, sy, sz) = (arr(x), arr(y), arr(z), arr(sx), arr(sy), arr(sz));
                for l in 0..LANES {
                    let rx = tx - x[l];
                    let ry = ty - y[l];
                    let rz = tz - z[l];
                    let r2 = rx * rx + ry * ry + rz * rz;
                    let inv_r = T::one() / r2.sqrt();
                    a0[l] = a0[l] + (rx * sx[l] + ry * sy[l] + rz * sz[l]) * inv_r * inv_r * inv_r;
                }
            }
        }
        KernelKind::StokesTraction { .. } => {
            let (nx, ny, nz) = (n[0], n[1], n[2]);
            let ss = lanes(&src.s[0], start, end).zip(lanes(&src.s[1], start, end)).zip(lanes(&src.s[2], start, end));
            for (((x, y), z), ((sx, sy), sz)) in xs.zip(ys).zip(zs).zip(ss) {
                let (x, y, z, sx, sy, sz) = (arr(x), arr(y), arr(z), arr(sx), arr(sy), arr(sz));
                for l in 0..LANES {
                    let rx = tx - x[l];
                    let ry = ty - y[l];
                    let rz = tz - z[l];
                    let r2 = rx * rx + ry * ry + rz * rz;
                    let inv_r = T::one() / r2.sqrt();
                    let inv_r2 = inv_r * inv_r;
                    let w = (rx * nx + ry * ny + rz * nz) * (rx * sx[l] + ry * sy[l] + rz * sz[l]) * inv_r2 * inv_r2 * inv_r;
                    a0[l] = a0[l] + rx * w;
                    a1[l] = a1[l] + ry * w;
                    a2[l] = a2[l] + rz * w;
                }
            }
        }
    }
    acc.v = [b0, b1, b2];
}

struct TargetBlock<'a, T> {
    targets: &'a [Vec3<T>],
    normals: Option<&'a [Vec3<T>]>,
}

#[inline(always)]
fn accumulate_block_generic<T: Real>(kind: &KernelKind<T>, src: &Sources<T>, tb: &TargetBlock<'_, T>, start: usize, end: usize, accs: &mut [Acc<T>]) {
    for (i, acc) in accs.iter_mut().enumerate() {
        let n = tb.normals.map_or(Vec3::zero(), |n| n[i]);
        accumulate(kind, src, tb.targets[i], n, start, end, acc);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn accumulate_block_avx512<T: Real>(kind: &KernelKind<T>, src: &Sources<T>, tb: &TargetBlock<'_, T>, start: usize, end: usize, accs: &mut [Acc<T>]) {
    accumulate_block_generic(kind, src, tb, start, end, accs)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn accumulate_block_avx2<T: Real>(kind: &KernelKind<T>, src: &Sources<T>, tb: &TargetBlock<'_, T>, start: usize, end: usize, accs: &mut [Acc<T>]) {
    accumulate_block_generic(kind, src, tb, start, end, accs)
}

/// Dispatches to the widest vector instruction set available at run time.
/// Every path performs the same IEEE operations in the same order (no
/// contraction into fused multiply-adds), so results are identical.
fn accumulate_block<T: Real>(kind: &KernelKind<T>, src: &Sources<T>, tb: &TargetBlock<'_, T>, start: usize, end: usize, accs: &mut [Acc<T>]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx512f") {
            // SAFETY: the required CPU feature was detected above.
            return unsafe { accumulate_block_avx512(kind, src, tb, start, end, accs) };
        }
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: as above.
            return unsafe { accumulate_block_avx2(kind, src, tb, start, end, accs) };
        }
    }
    accumulate_block_generic(kind, src, tb, start, end, accs)
}

fn prefactor<T: Real>(kind: &KernelKind<T>) -> T {
    let four_pi = lit::<T>(4.0) * T::PI();
    match *kind {
        KernelKind::LaplaceSingle | KernelKind::StokesPressure => T::one() / four_pi,
        KernelKind::Stokeslet { mu } => T::one() / (lit::<T>(2.0) * four_pi * mu),
        KernelKind::StokesTraction { .. } => -lit::<T>(3.0) / four_pi,
    }
}

fn find_coincident<T: Real>(targets: &[Vec3<T>], sources: &[Vec3<T>], ti: usize) -> Error {
    match sources.iter().position(|s| *s == targets[ti]) {
        Some(j) => Error::Singular { target: ti, source_index: j },
        None => Error::Numerical(format!("non-finite field value at target {ti}")),
    }
}

/// Evaluates the field of `kind` generated by `strengths` at `sources`, at every target.
///
/// `strengths` holds `kind.source_dim()` values per source; the result holds
/// `kind.target_dim()` values per target. `normals` are required exactly for
/// the traction kernel.
pub fn eval_field<T: Real>(
    kind: KernelKind<T>,
    sources: &[Vec3<T>],
    strengths: &[T],
    targets: &[Vec3<T>],
    normals: Option<&[Vec3<T>]>,
    cfg: &EvaluatorConfig<T>,
) -> Result<Vec<T>> {
    kind.validate()?;
    cfg.validate()?;
    let sd = kind.source_dim();
    let td = kind.target_dim();
    check_len(sources.len() * sd, strengths.len())?;
    match (kind.needs_normals(), normals) {
        (true, None) => return Err(invalid("traction evaluation needs target normals")),
        (false, Some(_)) => return Err(invalid("normals are only used by the traction kernel")),
        (true, Some(n)) => {
            check_len(targets.len(), n.len())?;
            for v in n {
                check_normal(*v)?;
            }
        }
        _ => {}
    }
    let src = Sources::new(sources, strengths, sd);
    let padded = src.x.len();
    let scale = prefactor(&kind);
    let tile = match cfg.backend {
        Backend::Direct => padded.max(LANES),
        Backend::Accelerated { .. } => SOURCE_TILE,
    };
    let mut out = vec![T::zero(); targets.len() * td];
    let result: Result<()> = in_pool(cfg, || {
        out.par_chunks_mut(TARGET_CHUNK * td).enumerate().try_for_each(|(chunk, values)| {
            let first = chunk * TARGET_CHUNK;
            let count = values.len() / td;
            let mut accs = [Acc::<T>::zero(); TARGET_CHUNK];
            let mut start = 0;
            while start < padded {
                let end = (start + tile).min(padded);
                let tn = TargetBlock { targets: &targets[first..first + count], normals: normals.map(|n| &n[first..first + count]) };
                accumulate_block(&kind, &src, &tn, start, end, &mut accs[..count]);
                start = end;
            }
            for i in 0..count {
                for c in 0..td {
                    let v = accs[i].reduce(c) * scale;
                    if !v.is_finite() {
                        return Err(find_coincident(targets, sources, first + i));
                    }
                    values[i * td + c] = v;
                }
            }
            Ok(())
        })
    })?;
    result?;
    Ok(out)
}

/// Field of `strengths` at every collocation node of `ctx`, with each body's
/// own contribution removed by subtracting its diagonal-block product.
pub fn eval_with_self_correction<T: Real>(ctx: &crate::solvers::BlockSystemContext<T>, strengths: &[T]) -> Result<Vec<T>> {
    ctx.off_diagonal_field(strengths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::assemble_block;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64, center: Vec3<f64>) -> Vec<Vec3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| center + Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn values(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn point_charge() {
        let u = eval_field(
            KernelKind::LaplaceSingle,
            &[Vec3::zero()],
            &[4.0 * std::f64::consts::PI],
            &[Vec3::new(2.0, 0.0, 0.0)],
            None,
            &EvaluatorConfig::direct(),
        )
        .unwrap();
        assert!((u[0] - 0.5).abs() < 1e-15);
    }

    fn dense_check(kind: KernelKind<f64>, ns: usize, nt: usize, seed: u64, backend: Backend<f64>) {
        let s = cloud(ns, seed, Vec3::zero());
        let t = cloud(nt, seed + 100, Vec3::new(0.5, 0.0, 0.0));
        let normals: Vec<Vec3<f64>> = cloud(nt, seed + 7, Vec3::zero()).iter().map(|v| v.normalized()).collect();
        let nref = if kind.needs_normals() { Some(&normals[..]) } else { None };
        let q = values(ns * kind.source_dim(), seed + 1);
        let cfg = EvaluatorConfig { backend, threads: None };
        let fast = eval_field(kind, &s, &q, &t, nref, &cfg).unwrap();
        let block = assemble_block(&t, &s, kind, nref).unwrap();
        let slow = block.apply(&q).unwrap();
        let scale = slow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-13 * scale.max(1.0), "{kind:?}: {a} vs {b}");
        }
    }

    #[test]
    fn matches_dense_blocks() {
        for kind in [
            KernelKind::LaplaceSingle,
            KernelKind::Stokeslet { mu: 0.7 },
            KernelKind::StokesPressure,
            KernelKind::StokesTraction { mu: 1.0 },
        ] {
            dense_check(kind, 3, 2, 1, Backend::Direct);
            dense_check(kind, 37, 150, 2, Backend::Direct);
            dense_check(kind, 4100, 70, 3, Backend::Accelerated { tolerance: 1e-10 });
        }
    }

    #[test]
    fn far_field_monopole() {
        let s = cloud(200, 5, Vec3::zero());
        let q: Vec<f64> = values(200, 6).iter().map(|v| v + 1.0).collect();
        let total: f64 = q.iter().sum();
        let r = 100.0 * 2.0 * 3f64.sqrt();
        let t = [Vec3::new(r, 0.0, 0.0), Vec3::new(0.0, -r, 0.0), Vec3::new(0.0, 0.6 * r, 0.8 * r)];
        let u = eval_field(KernelKind::LaplaceSingle, &s, &q, &t, None, &EvaluatorConfig::direct()).unwrap();
        let mono = total / (4.0 * std::f64::consts::PI * r);
        for v in u {
            assert!((v - mono).abs() <= 1e-3 * mono.abs());
        }
    }

    #[test]
    fn thread_count_independent() {
        let s = cloud(500, 9, Vec3::zero());
        let t = cloud(300, 10, Vec3::new(3.0, 0.0, 0.0));
        let q = values(1500, 11);
        let kind = KernelKind::Stokeslet { mu: 1.0 };
        let one = eval_field(kind, &s, &q, &t, None, &EvaluatorConfig::direct().with_threads(1)).unwrap();
        let three = eval_field(kind, &s, &q, &t, None, &EvaluatorConfig::direct().with_threads(3)).unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn source_order_invariance() {
        let s = cloud(101, 12, Vec3::zero());
        let t = cloud(17, 13, Vec3::new(2.5, 0.0, 0.0));
        let q = values(303, 14);
        let kind = KernelKind::Stokeslet { mu: 1.0 };
        let a = eval_field(kind, &s, &q, &t, None, &EvaluatorConfig::direct()).unwrap();
        let perm: Vec<usize> = (0..101).rev().collect();
        let s2: Vec<_> = perm.iter().map(|&j| s[j]).collect();
        let q2: Vec<f64> = perm.iter().flat_map(|&j| [q[3 * j], q[3 * j + 1], q[3 * j + 2]]).collect();
        let b = eval_field(kind, &s2, &q2, &t, None, &EvaluatorConfig::direct()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn coincident_points_reported() {
        let s = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0)];
        let t = vec![Vec3::new(5.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0)];
        match eval_field(KernelKind::LaplaceSingle, &s, &[1.0, 1.0], &t, None, &EvaluatorConfig::direct()) {
            Err(Error::Singular { target, source_index }) => assert_eq!((target, source_index), (1, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let bad = EvaluatorConfig { backend: Backend::Accelerated { tolerance: 0.5f64 }, threads: None };
        assert!(bad.validate().is_err());
        let bad = EvaluatorConfig::<f64> { backend: Backend::Direct, threads: Some(0) };
        assert!(bad.validate().is_err());
    }
}
