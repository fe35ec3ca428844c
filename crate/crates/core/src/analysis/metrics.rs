//! 2-way error and surface residuals.

use crate::error::{invalid, Result};
use crate::evaluator::eval_field;
use crate::geometry::Cluster;
use crate::kernels::KernelKind;
use crate::scalar::{lit, to_f64, Real, Vec3};
use crate::solvers::field::check_exterior;
use crate::solvers::{BlockSystemContext, BoundaryData, FactorCache, ProblemKind, RigidMotion, SolveReport, Solution, SolverConfig};

/// Proxy offset of the mobility leg relative to the resistance leg.
pub const MOBILITY_DELTA_FACTOR: f64 = 1.05;

#[derive(Clone, Debug)]
pub struct TwoWayReport<T> {
    /// `|U - U_ref|_inf / |U_ref|_inf`.
    pub error: f64,
    pub motions: Vec<RigidMotion<f64>>,
    pub resistance: SolveReport,
    pub mobility: SolveReport,
    /// Both legs converged.
    pub converged: bool,
    /// The rediscretized cluster of the mobility leg and its solution.
    pub mobility_cluster: Cluster<T>,
    pub mobility_solution: Solution<T>,
}

/// Resistance solve with `u_ref` on `cluster`, then a mobility solve with the
/// resulting loads on the same poses with the proxy offset scaled by
/// [`MOBILITY_DELTA_FACTOR`].
pub fn two_way_error<T: Real>(
    cluster: &Cluster<T>,
    u_ref: &[RigidMotion<T>],
    config: SolverConfig<T>,
    cache: Option<&mut FactorCache<T>>,
) -> Result<TwoWayReport<T>> {
    let scale = u_ref.iter().flat_map(|u| u.to_six()).fold(0.0f64, |m, x| m.max(to_f64(x.abs())));
    if !(scale > 0.0) {
        return Err(invalid("2-way error needs a non-zero reference motion"));
    }
    let mut local = FactorCache::new();
    let cache = cache.unwrap_or(&mut local);
    let res_ctx = BlockSystemContext::with_cache(ProblemKind::Resistance, cluster, config, cache)?;
    let res = res_ctx.solve(&BoundaryData::Motions(u_ref.to_vec()))?;
    drop(res_ctx);
    let mob_cluster = cluster.rediscretized(lit::<T>(MOBILITY_DELTA_FACTOR), None)?;
    let mob_ctx = BlockSystemContext::with_cache(ProblemKind::Mobility, &mob_cluster, config, cache)?;
    let mob = mob_ctx.solve(&BoundaryData::Loads(res.loads()))?;
    let motions = mob.motions();
    let mut worst = 0.0f64;
    for (u, r) in motions.iter().zip(u_ref) {
        for (a, b) in u.to_six().iter().zip(r.to_six()) {
            worst = worst.max(to_f64((*a - b).abs()));
        }
    }
    let to64 = |m: &RigidMotion<T>| RigidMotion::new(Vec3(m.v.to_f64()), Vec3(m.omega.to_f64()));
    Ok(TwoWayReport {
        error: worst / scale,
        motions: motions.iter().map(to64).collect(),
        converged: res.report.converged && mob.report.converged,
        resistance: res.report,
        mobility: mob.report.clone(),
        mobility_cluster: mob_cluster,
        mobility_solution: mob,
    })
}

/// Boundary-condition error on dense surface test points.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub points: Vec<Vec3<f64>>,
    pub normals: Vec<Vec3<f64>>,
    pub body: Vec<usize>,
    /// Relative residual `|u - g| / |g|` (Stokes) or absolute `|u - phi|` (Laplace).
    pub values: Vec<f64>,
    /// Points where `g` vanishes and the residual is reported absolutely.
    pub absolute: Vec<bool>,
    pub max: f64,
}

/// Evaluates the representation at `multiplier * M` test points per body and
/// compares it with the boundary data implied by the solution (prescribed or
/// computed voltages and rigid motions).
pub fn surface_residual<T: Real>(solution: &Solution<T>, cluster: &Cluster<T>, multiplier: T, config: &SolverConfig<T>) -> Result<ResidualReport> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut body = Vec::new();
    for (k, p) in cluster.particles.iter().enumerate() {
        let (pts, nrm) = p.test_points(multiplier)?;
        body.extend(std::iter::repeat_n(k, pts.len()));
        points.extend(pts);
        normals.extend(nrm);
    }
    check_exterior(cluster, &points)?;
    let sources: Vec<Vec3<T>> = cluster.particles.iter().flat_map(|p| p.proxy.iter().copied()).collect();
    let strengths = solution.stacked_effective();
    let laplace = solution.kind.is_laplace();
    let kernel = if laplace { KernelKind::LaplaceSingle } else { KernelKind::Stokeslet { mu: solution.mu } };
    let u = eval_field(kernel, &sources, &strengths, &points, None, &config.evaluator)?;
    let mut values = Vec::with_capacity(points.len());
    let mut absolute = Vec::with_capacity(points.len());
    if laplace {
        let phi = solution.voltages();
        for (i, &k) in body.iter().enumerate() {
            values.push(to_f64((u[i] - phi[k]).abs()));
            absolute.push(true);
        }
    } else {
        let motions = solution.motions();
        let g: Vec<Vec3<T>> = body
            .iter()
            .zip(&points)
            .map(|(&k, &x)| cluster.particles[k].rigid_velocity(motions[k].v, motions[k].omega, x))
            .collect();
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(to_f64(v.norm())));
        for (i, gi) in g.iter().enumerate() {
            let ui = Vec3::new(u[3 * i], u[3 * i + 1], u[3 * i + 2]);
            let diff = to_f64((ui - *gi).norm());
            let gn = to_f64(gi.norm());
            if gn > 1e-14 * gmax {
                values.push(diff / gn);
                absolute.push(false);
            } else {
                values.push(diff);
                absolute.push(true);
            }
        }
    }
    let max = values.iter().fold(0.0f64, |m, &x| m.max(x));
    Ok(ResidualReport {
        points: points.iter().map(|p| Vec3(p.to_f64())).collect(),
        normals: normals.iter().map(|p| Vec3(p.to_f64())).collect(),
        body,
        values,
        absolute,
        max,
    })
}
