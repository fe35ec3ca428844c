//! Field evaluation from a solved representation.

use crate::error::{check_len, invalid, Error, Result};
use crate::evaluator::{eval_field, EvaluatorConfig};
use crate::geometry::Cluster;
use crate::kernels::KernelKind;
use crate::scalar::{lit, Real, Vec3};

use super::Solution;

/// What to evaluate.
#[derive(Clone, Debug)]
pub enum FieldRequest<T> {
    /// Laplace potential.
    Potential,
    /// Stokes velocity and pressure.
    VelocityPressure,
    /// Stokes traction on planes with the given unit normals.
    Traction(Vec<Vec3<T>>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldValues<T> {
    Potential(Vec<T>),
    VelocityPressure { velocity: Vec<Vec3<T>>, pressure: Vec<T> },
    Traction(Vec<Vec3<T>>),
}

impl<T: Real> FieldValues<T> {
    pub fn len(&self) -> usize {
        match self {
            FieldValues::Potential(v) => v.len(),
            FieldValues::VelocityPressure { velocity, .. } => velocity.len(),
            FieldValues::Traction(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn to_vecs<T: Real>(flat: &[T]) -> Vec<Vec3<T>> {
    flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

/// Rejects points strictly inside any particle; surface points are allowed.
pub(crate) fn check_exterior<T: Real>(cluster: &Cluster<T>, points: &[Vec3<T>]) -> Result<()> {
    let margin = lit::<T>(1e-9);
    for (i, &x) in points.iter().enumerate() {
        if !x.is_finite() {
            return Err(invalid(format!("point {i} is not finite")));
        }
        for (k, p) in cluster.particles.iter().enumerate() {
            if (x - p.center).norm() <= p.bounding_radius() && p.contains(x, margin) {
                return Err(Error::Domain { index: i, particle: k });
            }
        }
    }
    Ok(())
}

/// Evaluates the field of `solution` (computed on `cluster`) at exterior `points`.
pub fn evaluate_solution<T: Real>(
    solution: &Solution<T>,
    cluster: &Cluster<T>,
    points: &[Vec3<T>],
    request: &FieldRequest<T>,
    cfg: &EvaluatorConfig<T>,
) -> Result<FieldValues<T>> {
    check_len(cluster.len(), solution.effective_strengths.len())?;
    for (p, s) in cluster.particles.iter().zip(&solution.effective_strengths) {
        check_len(solution.kind.components() * p.n(), s.len())?;
    }
    check_exterior(cluster, points)?;
    let sources: Vec<Vec3<T>> = cluster.particles.iter().flat_map(|p| p.proxy.iter().copied()).collect();
    let strengths = solution.stacked_effective();
    let laplace = solution.kind.is_laplace();
    match request {
        FieldRequest::Potential if laplace => {
            Ok(FieldValues::Potential(eval_field(KernelKind::LaplaceSingle, &sources, &strengths, points, None, cfg)?))
        }
        FieldRequest::VelocityPressure if !laplace => {
            let u = eval_field(KernelKind::Stokeslet { mu: solution.mu }, &sources, &strengths, points, None, cfg)?;
            let p = eval_field(KernelKind::StokesPressure, &sources, &strengths, points, None, cfg)?;
            Ok(FieldValues::VelocityPressure { velocity: to_vecs(&u), pressure: p })
        }
        FieldRequest::Traction(normals) if !laplace => {
            let t = eval_field(KernelKind::StokesTraction { mu: solution.mu }, &sources, &strengths, points, Some(normals), cfg)?;
            Ok(FieldValues::Traction(to_vecs(&t)))
        }
        _ => Err(invalid(format!("field request does not match a {} solution", solution.kind.name()))),
    }
}
