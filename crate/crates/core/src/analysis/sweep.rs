//! Convergence studies over a discretization parameter.

use std::time::Instant;

use crate::error::{invalid, Result};
use crate::geometry::Cluster;
use crate::scalar::{to_f64, Real};
use crate::solvers::{BlockSystemContext, BoundaryData, FactorCache, Solution, SolverConfig};

use super::metrics::surface_residual;
use super::rates::{fit_root_exponential, RateFit};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    /// Test points per collocation node for the surface residual.
    pub test_multiplier: f64,
    /// Residuals below this are plateau points; `None` means ten times the GMRES tolerance.
    pub residual_floor: Option<f64>,
    /// Output errors below this are plateau points.
    pub output_floor: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { test_multiplier: 2.0, residual_floor: None, output_floor: 1e-13 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    /// Proxy nodes of the first particle, the abscissa of the rate fit.
    pub n: usize,
    pub max_residual: f64,
    /// Relative max-norm error of the per-body outputs against the finest
    /// point; `None` for the reference itself.
    pub output_error: Option<f64>,
    pub iterations: usize,
    pub max_strength: f64,
    pub seconds: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct ConvergenceRecord {
    pub variable: String,
    pub points: Vec<SweepPoint>,
    pub residual_fit: Option<RateFit>,
    pub output_fit: Option<RateFit>,
    pub warnings: Vec<String>,
}

fn outputs<T: Real>(s: &Solution<T>) -> Vec<f64> {
    use crate::solvers::ProblemKind::*;
    let v: Vec<T> = match s.kind {
        Capacitance => s.charges(),
        Elastance => s.voltages(),
        Resistance => s.loads().iter().flat_map(|l| l.to_six()).collect(),
        Mobility => s.motions().iter().flat_map(|m| m.to_six()).collect(),
    };
    v.into_iter().map(to_f64).collect()
}

/// Solves the problem posed by `data` on `build(value)` for every sweep
/// value and fits root-exponential rates to the residual and output errors.
/// The finest (last) point serves as the output reference.
pub fn convergence_sweep<T: Real, F>(
    variable: &str,
    values: &[f64],
    mut build: F,
    data: &BoundaryData<T>,
    config: SolverConfig<T>,
    options: SweepOptions,
) -> Result<ConvergenceRecord>
where
    F: FnMut(f64) -> Result<Cluster<T>>,
{
    if values.len() < 4 {
        return Err(invalid(format!("a convergence sweep needs at least 4 points, got {}", values.len())));
    }
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(invalid("sweep values must be strictly monotone"));
    }
    let kind = data.kind();
    let mut cache = FactorCache::new();
    let mut points = Vec::with_capacity(values.len());
    let mut outs = Vec::with_capacity(values.len());
    let mut warnings = Vec::new();
    for &value in values {
        let cluster = build(value)?;
        let t0 = Instant::now();
        let ctx = BlockSystemContext::with_cache(kind, &cluster, config, &mut cache)?;
        let sol = ctx.solve(data)?;
        let seconds = t0.elapsed().as_secs_f64();
        let residual = surface_residual(&sol, &cluster, T::from(options.test_multiplier).unwrap_or(T::one() + T::one()), &config)?;
        if !sol.report.converged {
            warnings.push(format!("{variable} = {value}: GMRES did not converge; point excluded from fits"));
        }
        points.push(SweepPoint {
            value,
            n: cluster.particles[0].n(),
            max_residual: residual.max,
            output_error: None,
            iterations: sol.report.iterations,
            max_strength: sol.report.max_strength,
            seconds,
            converged: sol.report.converged,
        });
        outs.push(outputs(&sol));
    }
    let reference = outs.last().cloned().unwrap_or_default();
    let scale = reference.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let last = points.len() - 1;
    for (p, o) in points.iter_mut().zip(&outs).take(last) {
        let diff = o.iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        p.output_error = Some(if scale > 0.0 { diff / scale } else { diff });
    }

    let floor = options.residual_floor.unwrap_or(10.0 * config.tolerance_for(kind));
    let usable: Vec<&SweepPoint> = points.iter().filter(|p| p.converged).collect();
    let ns: Vec<f64> = usable.iter().map(|p| p.n as f64).collect();
    let res: Vec<f64> = usable.iter().map(|p| p.max_residual).collect();
    let residual_fit = match fit_root_exponential(&ns, &res, floor) {
        Ok(f) => Some(f),
        Err(e) => {
            warnings.push(format!("residual fit rejected: {e}"));
            None
        }
    };
    let with_err: Vec<&&SweepPoint> = usable.iter().filter(|p| p.output_error.is_some()).collect();
    let ns: Vec<f64> = with_err.iter().map(|p| p.n as f64).collect();
    let errs: Vec<f64> = with_err.iter().map(|p| p.output_error.unwrap_or(0.0)).collect();
    let output_fit = match fit_root_exponential(&ns, &errs, options.output_floor) {
        Ok(f) => Some(f),
        Err(e) => {
            warnings.push(format!("output fit rejected: {e}"));
            None
        }
    };
    Ok(ConvergenceRecord { variable: variable.to_string(), points, residual_fit, output_fit, warnings })
}
