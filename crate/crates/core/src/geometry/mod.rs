pub mod cluster;
pub mod distance;
pub mod nodes;
pub mod particle;
pub mod shape;

pub use cluster::{grow_cluster, Cluster, GrowthMode, OrientationPolicy};
pub use distance::{pair_distance, PosedShape};
pub use nodes::{ellipsoid_grid, fibonacci_sphere_nodes, load_point_set, NodeSet};
pub use particle::{default_rectangularity, transform_particle, NodeRule, Particle, PointSet};
pub use shape::Shape;
