pub mod dense;
pub mod gmres;
pub mod rigid;
pub mod svd;

pub use gmres::{gmres, GmresReport, LinearOperator};
pub use rigid::{coupling_laplace, coupling_lr, laplace_projector, rigid_matrix, stokes_projector, Coupling, ProjectorApplier, RigidMatrix};
pub use svd::{factorize, rotated_pinv_apply, OneBodyFactor, DEFAULT_TRUNC_EPS};
