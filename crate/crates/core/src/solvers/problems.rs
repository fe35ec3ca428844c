//! Right-hand sides, GMRES driver and recovery of per-body quantities.

use std::time::Instant;

use crate::error::{check_len, invalid, Result};
use crate::evaluator::eval_field;
use crate::geometry::Cluster;
use crate::linalg::gmres;
use crate::scalar::{from_usize, lit, to_f64, Real};

use super::context::{BlockSystemContext, PreconditionedOperator};
use super::{BodyOutput, BoundaryData, NetLoad, ProblemKind, RigidMotion, SolveReport, Solution, SolverConfig, Timings};

/// Stacked completion strengths `alpha0` (elastance) or `lambda0` (mobility);
/// zero for Dirichlet problems.
pub fn completion_strengths<T: Real>(ctx: &BlockSystemContext<T>, data: &BoundaryData<T>) -> Result<Vec<T>> {
    check_data(ctx, data)?;
    let mut out = vec![T::zero(); ctx.strength_len()];
    match data {
        BoundaryData::Charges(q) => {
            for (k, &qk) in q.iter().enumerate() {
                let v = ctx.projector(k).completion(&[qk])?;
                out[ctx.proxy_range(k)].copy_from_slice(&v);
            }
        }
        BoundaryData::Loads(l) => {
            for (k, lk) in l.iter().enumerate() {
                let v = ctx.projector(k).completion(&lk.to_six())?;
                out[ctx.proxy_range(k)].copy_from_slice(&v);
            }
        }
        _ => {}
    }
    Ok(out)
}

fn check_data<T: Real>(ctx: &BlockSystemContext<T>, data: &BoundaryData<T>) -> Result<()> {
    if data.kind() != ctx.kind() {
        return Err(invalid(format!("{} data given to a {} context", data.kind().name(), ctx.kind().name())));
    }
    check_len(ctx.len(), data.len())?;
    if !data.is_finite() {
        return Err(invalid("boundary data must be finite"));
    }
    Ok(())
}

fn right_hand_side<T: Real>(ctx: &BlockSystemContext<T>, data: &BoundaryData<T>, completion: &[T]) -> Result<Vec<T>> {
    let mut rhs = vec![T::zero(); ctx.unknowns()];
    match data {
        BoundaryData::Voltages(phi) => {
            for (k, &p) in phi.iter().enumerate() {
                rhs[ctx.collocation_range(k)].iter_mut().for_each(|x| *x = p);
            }
        }
        BoundaryData::Motions(u) => {
            for (k, uk) in u.iter().enumerate() {
                let k_m = ctx.collocation_rigid(k).ok_or_else(|| invalid("missing rigid matrix"))?;
                rhs[ctx.collocation_range(k)].copy_from_slice(&k_m.apply(&uk.to_six()));
            }
        }
        BoundaryData::Charges(_) | BoundaryData::Loads(_) => {
            let u0 = eval_field(ctx.kernel(), ctx.sources(), completion, ctx.targets(), None, &ctx.config().evaluator)?;
            for (r, u) in rhs.iter_mut().zip(&u0) {
                *r = -*u;
            }
        }
    }
    Ok(rhs)
}

impl<T: Real> BlockSystemContext<T> {
    /// Solves the problem posed by `data` on this context's cluster.
    pub fn solve(&self, data: &BoundaryData<T>) -> Result<Solution<T>> {
        check_data(self, data)?;
        let kind = self.kind();
        let tol = self.config().tolerance_for(kind);
        let t0 = Instant::now();
        let completion = completion_strengths(self, data)?;
        let rhs = right_hand_side(self, data, &completion)?;
        let rhs_time = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let op = PreconditionedOperator { ctx: self };
        let (gamma, report) = gmres(&op, &rhs, tol, self.config().max_iters)?;
        let gmres_time = t1.elapsed().as_secs_f64();

        let t2 = Instant::now();
        let raw = self.apply_pinv(&gamma)?;
        let mut effective = raw.clone();
        if kind.is_completed() {
            self.project_out(&mut effective)?;
            for (e, c) in effective.iter_mut().zip(&completion) {
                *e = *e + *c;
            }
        }
        let mut strengths = Vec::with_capacity(self.len());
        let mut effective_strengths = Vec::with_capacity(self.len());
        let mut surface_values = Vec::with_capacity(self.len());
        let mut outputs = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            let r = self.proxy_range(k);
            let alpha = &raw[r.clone()];
            outputs.push(match kind {
                ProblemKind::Capacitance => BodyOutput::Charge(alpha.iter().fold(T::zero(), |s, &x| s + x)),
                ProblemKind::Elastance => {
                    let mean = alpha.iter().fold(T::zero(), |s, &x| s + x) / from_usize::<T>(alpha.len());
                    BodyOutput::Voltage(-mean)
                }
                ProblemKind::Resistance => {
                    let k_n = rigid_of(self, k)?;
                    BodyOutput::Load(NetLoad::from_six(&k_n.apply_transpose(alpha)?))
                }
                ProblemKind::Mobility => {
                    let k_n = rigid_of(self, k)?;
                    let s = k_n.apply_transpose(alpha)?;
                    BodyOutput::Motion(RigidMotion::from_six(&s.map(|x| -x)))
                }
            });
            strengths.push(alpha.to_vec());
            effective_strengths.push(effective[r].to_vec());
            surface_values.push(gamma[self.collocation_range(k)].to_vec());
        }
        let max_strength = effective.iter().fold(0.0f64, |m, &x| m.max(to_f64(x.abs())));
        let recover_time = t2.elapsed().as_secs_f64();
        Ok(Solution {
            kind,
            inputs: data.clone(),
            strengths,
            effective_strengths,
            surface_values,
            outputs,
            report: SolveReport {
                iterations: report.iterations,
                residual_history: report.residual_history,
                converged: report.converged,
                final_residual: report.final_residual,
                tolerance: tol,
                max_strength,
                svd_count: self.svd_count(),
                timings: Timings {
                    assembly: self.assembly_seconds,
                    factorization: self.factorization_seconds,
                    rhs: rhs_time,
                    gmres: gmres_time,
                    recover: recover_time,
                },
            },
            mu: if kind.is_laplace() { lit::<T>(1.0) } else { self.config().mu },
        })
    }
}

fn rigid_of<T: Real>(ctx: &BlockSystemContext<T>, k: usize) -> Result<&crate::linalg::RigidMatrix<T>> {
    match ctx.projector(k) {
        crate::linalg::ProjectorApplier::StokesRigid { k, .. } => Ok(k),
        _ => Err(invalid("rigid matrix requested for a Laplace problem")),
    }
}

pub fn solve_capacitance<T: Real>(cluster: &Cluster<T>, voltages: &[T], config: SolverConfig<T>) -> Result<Solution<T>> {
    BlockSystemContext::new(ProblemKind::Capacitance, cluster, config)?.solve(&BoundaryData::Voltages(voltages.to_vec()))
}

pub fn solve_elastance<T: Real>(cluster: &Cluster<T>, charges: &[T], config: SolverConfig<T>) -> Result<Solution<T>> {
    BlockSystemContext::new(ProblemKind::Elastance, cluster, config)?.solve(&BoundaryData::Charges(charges.to_vec()))
}

pub fn solve_resistance<T: Real>(cluster: &Cluster<T>, motions: &[RigidMotion<T>], config: SolverConfig<T>) -> Result<Solution<T>> {
    BlockSystemContext::new(ProblemKind::Resistance, cluster, config)?.solve(&BoundaryData::Motions(motions.to_vec()))
}

pub fn solve_mobility<T: Real>(cluster: &Cluster<T>, loads: &[NetLoad<T>], config: SolverConfig<T>) -> Result<Solution<T>> {
    BlockSystemContext::new(ProblemKind::Mobility, cluster, config)?.solve(&BoundaryData::Loads(loads.to_vec()))
}
