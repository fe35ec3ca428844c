#![allow(dead_code)]
//! Dense oracles shared by the integration tests.

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use mfs_core::geometry::{Cluster, Particle};
use mfs_core::kernels::{assemble_block, KernelKind};
use mfs_core::solvers::ProblemKind;
use mfs_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
    Vec3::new(x, y, z)
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn nodes(set: &mfs_core::geometry::NodeSet<f64>) -> Vec<Vec3<f64>> {
    set.iter().copied().collect()
}

pub fn kernel(kind: ProblemKind) -> KernelKind<f64> {
    if kind.is_laplace() {
        KernelKind::LaplaceSingle
    } else {
        KernelKind::Stokeslet { mu: 1.0 }
    }
}

/// Rigid-mode basis (`3n x 6`) or the constant vector (`n x 1`).
pub fn modes(kind: ProblemKind, pts: &[Vec3<f64>], c: Vec3<f64>) -> Mat<f64> {
    if kind.is_laplace() {
        return Mat::from_fn(pts.len(), 1, |_, _| 1.0);
    }
    let mut k = Mat::zeros(3 * pts.len(), 6);
    for (i, p) in pts.iter().enumerate() {
        let d = *p - c;
        for a in 0..3 {
            k[(3 * i + a, a)] = 1.0;
            for w in 0..3 {
                let e = Vec3::<f64>::unit(w).cross(d);
                k[(3 * i + a, 3 + w)] = e[a];
            }
        }
    }
    k
}

pub fn lstsq(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    a.qr().solve_lstsq(b)
}

/// Orthogonal projector onto the span of `k`.
pub fn projector(k: &Mat<f64>) -> Mat<f64> {
    let g = k.transpose() * k;
    let x = lstsq(&g, &k.transpose().to_owned());
    k * &x
}

/// World-frame diagonal block (plain or completed) and its projector.
pub fn oracle_block(kind: ProblemKind, p: &Particle<f64>) -> (Mat<f64>, Mat<f64>) {
    let s = assemble_block(&nodes(&p.collocation), &nodes(&p.proxy), kernel(kind), None).unwrap().matrix;
    let n = s.ncols();
    let k_n = modes(kind, &nodes(&p.proxy), p.center);
    let l = projector(&k_n);
    if !kind.is_completed() {
        return (s, Mat::zeros(n, n));
    }
    let k_m = modes(kind, &nodes(&p.collocation), p.center);
    let g = k_n.transpose() * &k_n;
    let lr = &k_m * lstsq(&g, &k_n.transpose().to_owned());
    let eye = Mat::<f64>::identity(n, n);
    (&s * (&eye - &l) + lr, l)
}

pub fn preconditioned_oracle(kind: ProblemKind, cluster: &Cluster<f64>, gamma: &[f64]) -> Vec<f64> {
    let c = kind.components();
    let parts = &cluster.particles;
    let mut lam = Vec::new();
    let mut offs = vec![0];
    for p in parts {
        let o = *offs.last().unwrap();
        offs.push(o + c * p.m());
    }
    for (k, p) in parts.iter().enumerate() {
        let (b, l) = oracle_block(kind, p);
        let g = Mat::from_fn(b.nrows(), 1, |i, _| gamma[offs[k] + i]);
        let mut x = lstsq(&b, &g);
        if kind.is_completed() {
            x = &x - &l * &x;
        }
        lam.push(x);
    }
    let mut out = gamma.to_vec();
    for (k, pk) in parts.iter().enumerate() {
        for (l, pl) in parts.iter().enumerate() {
            if k == l {
                continue;
            }
            let s = assemble_block(&nodes(&pk.collocation), &nodes(&pl.proxy), kernel(kind), None).unwrap().matrix;
            let y = &s * &lam[l];
            for i in 0..y.nrows() {
                out[offs[k] + i] += y[(i, 0)];
            }
        }
    }
    out
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    num / den
}

