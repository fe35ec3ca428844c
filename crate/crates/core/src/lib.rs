//! Method of fundamental solutions for exterior Laplace and Stokes problems
//! over many smooth rigid particles.
//!
//! The four boundary-value problems are capacitance (voltages to charges),
//! elastance (charges to voltages), resistance (rigid motions to forces and
//! torques) and mobility (forces and torques to rigid motions). All are solved
//! through a square, one-body-preconditioned system with GMRES; elastance and
//! mobility use a completed representation whose unknown strengths carry no
//! net charge or load, so no extra constraints are needed.
//!
//! Everything is generic over the scalar type ([`Real`], `f32` or `f64`);
//! the aliases at the crate root fix it to `f64` or `f32`.

pub mod analysis;
pub mod error;
pub mod evaluator;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use scalar::{Mat3, Quaternion, Real, Vec3};

pub type Vec3F64 = Vec3<f64>;
pub type Mat3F64 = Mat3<f64>;
pub type ShapeF64 = geometry::Shape<f64>;
pub type ParticleF64 = geometry::Particle<f64>;
pub type ClusterF64 = geometry::Cluster<f64>;
pub type EvaluatorConfigF64 = evaluator::EvaluatorConfig<f64>;
pub type SolutionF64 = solvers::Solution<f64>;
pub type SolverConfigF64 = solvers::SolverConfig<f64>;
pub type ContextF64 = solvers::BlockSystemContext<f64>;

pub type Vec3F32 = Vec3<f32>;
pub type ParticleF32 = geometry::Particle<f32>;
pub type ClusterF32 = geometry::Cluster<f32>;
pub type SolutionF32 = solvers::Solution<f32>;
