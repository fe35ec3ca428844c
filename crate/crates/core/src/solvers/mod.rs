//! Capacitance, elastance, resistance and mobility solvers built on the
//! one-body-preconditioned block system.

pub mod context;
pub mod field;
pub mod problems;

use crate::evaluator::EvaluatorConfig;
use crate::scalar::{lit, Real, Vec3};

pub use context::{BlockSystemContext, FactorCache, PreconditionedOperator};
pub use field::{evaluate_solution, FieldRequest, FieldValues};
pub use problems::{completion_strengths, solve_capacitance, solve_elastance, solve_mobility, solve_resistance};

/// The four boundary-value problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    /// Voltages to charges (Laplace, Dirichlet).
    Capacitance,
    /// Charges to voltages (Laplace, completed representation).
    Elastance,
    /// Rigid motions to forces and torques (Stokes, Dirichlet).
    Resistance,
    /// Forces and torques to rigid motions (Stokes, completed representation).
    Mobility,
}

impl ProblemKind {
    pub fn is_laplace(self) -> bool {
        matches!(self, ProblemKind::Capacitance | ProblemKind::Elastance)
    }

    /// Whether the diagonal blocks carry the projector and rigid coupling.
    pub fn is_completed(self) -> bool {
        matches!(self, ProblemKind::Elastance | ProblemKind::Mobility)
    }

    /// Values per node.
    pub fn components(self) -> usize {
        if self.is_laplace() {
            1
        } else {
            3
        }
    }

    pub fn default_tolerance(self) -> f64 {
        if self.is_laplace() {
            1e-8
        } else {
            1e-7
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Capacitance => "capacitance",
            ProblemKind::Elastance => "elastance",
            ProblemKind::Resistance => "resistance",
            ProblemKind::Mobility => "mobility",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "capacitance" => Some(ProblemKind::Capacitance),
            "elastance" => Some(ProblemKind::Elastance),
            "resistance" => Some(ProblemKind::Resistance),
            "mobility" => Some(ProblemKind::Mobility),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig<T> {
    /// GMRES relative tolerance; `None` picks 1e-8 (Laplace) or 1e-7 (Stokes).
    pub tolerance: Option<f64>,
    pub max_iters: usize,
    pub trunc_eps: T,
    pub mu: T,
    pub evaluator: EvaluatorConfig<T>,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            tolerance: None,
            max_iters: 300,
            trunc_eps: lit::<T>(crate::linalg::DEFAULT_TRUNC_EPS).max(T::epsilon()),
            mu: T::one(),
            evaluator: EvaluatorConfig::default(),
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self
    }

    pub fn tolerance_for(&self, kind: ProblemKind) -> f64 {
        self.tolerance.unwrap_or(kind.default_tolerance())
    }
}

/// Translational and angular velocity of a rigid body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidMotion<T> {
    pub v: Vec3<T>,
    pub omega: Vec3<T>,
}

/// Net force and torque on a body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetLoad<T> {
    pub f: Vec3<T>,
    pub t: Vec3<T>,
}

macro_rules! six_vector {
    ($ty:ident, $a:ident, $b:ident) => {
        impl<T: Real> $ty<T> {
            pub fn new($a: Vec3<T>, $b: Vec3<T>) -> Self {
                Self { $a, $b }
            }

            pub fn zero() -> Self {
                Self { $a: Vec3::zero(), $b: Vec3::zero() }
            }

            pub fn to_six(&self) -> [T; 6] {
                [self.$a[0], self.$a[1], self.$a[2], self.$b[0], self.$b[1], self.$b[2]]
            }

            pub fn from_six(s: &[T; 6]) -> Self {
                Self { $a: Vec3::new(s[0], s[1], s[2]), $b: Vec3::new(s[3], s[4], s[5]) }
            }

            pub fn is_finite(&self) -> bool {
                self.$a.is_finite() && self.$b.is_finite()
            }
        }
    };
}

six_vector!(RigidMotion, v, omega);
six_vector!(NetLoad, f, t);

/// Prescribed data, one entry per particle.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryData<T> {
    Voltages(Vec<T>),
    Charges(Vec<T>),
    Motions(Vec<RigidMotion<T>>),
    Loads(Vec<NetLoad<T>>),
}

impl<T: Real> BoundaryData<T> {
    pub fn kind(&self) -> ProblemKind {
        match self {
            BoundaryData::Voltages(_) => ProblemKind::Capacitance,
            BoundaryData::Charges(_) => ProblemKind::Elastance,
            BoundaryData::Motions(_) => ProblemKind::Resistance,
            BoundaryData::Loads(_) => ProblemKind::Mobility,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            BoundaryData::Voltages(v) | BoundaryData::Charges(v) => v.len(),
            BoundaryData::Motions(v) => v.len(),
            BoundaryData::Loads(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        match self {
            BoundaryData::Voltages(v) | BoundaryData::Charges(v) => v.iter().all(|x| x.is_finite()),
            BoundaryData::Motions(v) => v.iter().all(|x| x.is_finite()),
            BoundaryData::Loads(v) => v.iter().all(|x| x.is_finite()),
        }
    }
}

/// Computed per-particle quantity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BodyOutput<T> {
    Voltage(T),
    Charge(T),
    Motion(RigidMotion<T>),
    Load(NetLoad<T>),
}

/// Wall-clock seconds per solve phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    pub assembly: f64,
    pub factorization: f64,
    pub rhs: f64,
    pub gmres: f64,
    pub recover: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residuals, starting with the initial one; length `iterations + 1`.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Relative residual of the returned iterate, recomputed.
    pub final_residual: f64,
    pub tolerance: f64,
    /// Largest magnitude among the representation strengths.
    pub max_strength: f64,
    /// One-body SVDs computed while building the context.
    pub svd_count: usize,
    pub timings: Timings,
}

#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub kind: ProblemKind,
    pub inputs: BoundaryData<T>,
    /// Per-body solution of the square system (`alpha` or `lambda`).
    pub strengths: Vec<Vec<T>>,
    /// Per-body strengths of the final representation: equal to `strengths`
    /// for Dirichlet problems, `(I - L) strengths + completion` otherwise.
    pub effective_strengths: Vec<Vec<T>>,
    /// Per-body preconditioned unknowns `gamma`.
    pub surface_values: Vec<Vec<T>>,
    pub outputs: Vec<BodyOutput<T>>,
    pub report: SolveReport,
    pub mu: T,
}

impl<T: Real> Solution<T> {
    pub fn stacked_effective(&self) -> Vec<T> {
        self.effective_strengths.iter().flatten().copied().collect()
    }

    pub fn voltages(&self) -> Vec<T> {
        self.outputs
            .iter()
            .zip(self.input_scalars())
            .map(|(o, i)| match o {
                BodyOutput::Voltage(v) => *v,
                _ => i,
            })
            .collect()
    }

    pub fn charges(&self) -> Vec<T> {
        self.outputs
            .iter()
            .zip(self.input_scalars())
            .map(|(o, i)| match o {
                BodyOutput::Charge(q) => *q,
                _ => i,
            })
            .collect()
    }

    /// Rigid motions: computed (mobility) or prescribed (resistance).
    pub fn motions(&self) -> Vec<RigidMotion<T>> {
        match (&self.inputs, self.kind) {
            (BoundaryData::Motions(m), _) => m.clone(),
            _ => self
                .outputs
                .iter()
                .map(|o| match o {
                    BodyOutput::Motion(m) => *m,
                    _ => RigidMotion::zero(),
                })
                .collect(),
        }
    }

    /// Loads: computed (resistance) or prescribed (mobility).
    pub fn loads(&self) -> Vec<NetLoad<T>> {
        match &self.inputs {
            BoundaryData::Loads(l) => l.clone(),
            _ => self
                .outputs
                .iter()
                .map(|o| match o {
                    BodyOutput::Load(l) => *l,
                    _ => NetLoad::zero(),
                })
                .collect(),
        }
    }

    fn input_scalars(&self) -> Vec<T> {
        match &self.inputs {
            BoundaryData::Voltages(v) | BoundaryData::Charges(v) => v.clone(),
            _ => vec![T::zero(); self.outputs.len()],
        }
    }
}
