//! Dense capacitance, resistance and mobility matrices by unit-column solves.

use faer::Mat;

use crate::error::{Error, Result};
use crate::geometry::Cluster;
use crate::scalar::{to_f64, Real};
use crate::solvers::{BlockSystemContext, BoundaryData, NetLoad, ProblemKind, RigidMotion, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixKind {
    Capacitance,
    Resistance,
    Mobility,
}

#[derive(Clone, Debug)]
pub struct ExtractedMatrix {
    pub kind: MatrixKind,
    pub matrix: Mat<f64>,
    /// `|A - A^T|_F / |A|_F`.
    pub asymmetry: f64,
    /// Smallest eigenvalue of `(A + A^T) / 2`.
    pub min_eigenvalue: f64,
    /// Every column solve converged.
    pub converged: bool,
    pub iterations: Vec<usize>,
}

/// Builds the `P x P` (capacitance) or `6P x 6P` (resistance, mobility)
/// matrix one column at a time. Meant for small clusters.
pub fn extract_matrix<T: Real>(cluster: &Cluster<T>, which: MatrixKind, config: SolverConfig<T>) -> Result<ExtractedMatrix> {
    let kind = match which {
        MatrixKind::Capacitance => ProblemKind::Capacitance,
        MatrixKind::Resistance => ProblemKind::Resistance,
        MatrixKind::Mobility => ProblemKind::Mobility,
    };
    let ctx = BlockSystemContext::new(kind, cluster, config)?;
    let p = cluster.len();
    let dim = if kind.is_laplace() { p } else { 6 * p };
    let mut a = Mat::<f64>::zeros(dim, dim);
    let mut converged = true;
    let mut iterations = Vec::with_capacity(dim);
    for j in 0..dim {
        let unit = |i: usize| if i == j { T::one() } else { T::zero() };
        let six = |k: usize| -> [T; 6] { std::array::from_fn(|c| unit(6 * k + c)) };
        let data = match kind {
            ProblemKind::Capacitance => BoundaryData::Voltages((0..p).map(unit).collect()),
            ProblemKind::Resistance => BoundaryData::Motions((0..p).map(|k| RigidMotion::from_six(&six(k))).collect()),
            _ => BoundaryData::Loads((0..p).map(|k| NetLoad::from_six(&six(k))).collect()),
        };
        let sol = ctx.solve(&data)?;
        converged &= sol.report.converged;
        iterations.push(sol.report.iterations);
        let column: Vec<T> = match kind {
            ProblemKind::Capacitance => sol.charges(),
            ProblemKind::Resistance => sol.loads().iter().flat_map(|l| l.to_six()).collect(),
            _ => sol.motions().iter().flat_map(|m| m.to_six()).collect(),
        };
        for (i, v) in column.into_iter().enumerate() {
            a[(i, j)] = to_f64(v);
        }
    }
    let norm = a.norm_l2();
    let diff = (&a - a.transpose()).norm_l2();
    let sym = Mat::<f64>::from_fn(dim, dim, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let eig = sym
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigenvalues of the extracted matrix: {e:?}")))?;
    let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ExtractedMatrix {
        kind: which,
        matrix: a,
        asymmetry: if norm > 0.0 { diff / norm } else { 0.0 },
        min_eigenvalue,
        converged,
        iterations,
    })
}
