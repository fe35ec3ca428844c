//! Cluster files: one `[[particle]]` table per body.
//!
//! ```toml
//! min_separation = 0.2
//!
//! [[particle]]
//! shape = "sphere"
//! semiaxes = [1.0, 1.0, 1.0]
//! center = [0.0, 0.0, 0.0]
//! quaternion = [1.0, 0.0, 0.0, 0.0]
//! n = 686
//! delta_sep = 0.3
//! rectangularity = 1.2
//! ```
//!
//! Spheres carry `n` (Fibonacci) or `point_set`; ellipsoids carry `nv`.

use std::path::{Path, PathBuf};

use mfs_core::geometry::{Cluster, NodeRule, Particle, PointSet, Shape};
use mfs_core::{Quaternion, Vec3};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterDocument {
    pub min_separation: f64,
    #[serde(rename = "particle")]
    pub particles: Vec<ParticleRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleRecord {
    pub shape: String,
    pub semiaxes: [f64; 3],
    pub center: [f64; 3],
    /// `[w, x, y, z]`.
    pub quaternion: [f64; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nv: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point_set: Option<PathBuf>,
    pub delta_sep: f64,
    pub rectangularity: f64,
}

impl ClusterDocument {
    pub fn from_cluster(c: &Cluster<f64>) -> Self {
        let particles = c
            .particles
            .iter()
            .map(|p| {
                let (shape, semiaxes) = match p.shape {
                    Shape::Sphere { radius } => ("sphere", [radius; 3]),
                    Shape::Ellipsoid { a, b, c } => ("ellipsoid", [a, b, c]),
                };
                let q = p.orientation;
                let (n, nv, point_set) = match &p.rule {
                    NodeRule::Fibonacci(n) => (Some(*n), None, None),
                    NodeRule::Grid(nv) => (None, Some(*nv), None),
                    NodeRule::PointSet(s) => (None, None, Some(s.path.clone())),
                };
                ParticleRecord {
                    shape: shape.to_string(),
                    semiaxes,
                    center: p.center.0,
                    quaternion: [q.w, q.x, q.y, q.z],
                    n,
                    nv,
                    point_set,
                    delta_sep: p.delta_sep,
                    rectangularity: p.rectangularity,
                }
            })
            .collect();
        Self { min_separation: c.min_separation, particles }
    }

    /// Rebuilds the particles. Records with identical shape and
    /// discretization share one body-frame template.
    pub fn to_cluster(&self) -> Result<Cluster<f64>, CliError> {
        let mut templates: Vec<(ParticleRecord, Particle<f64>)> = Vec::new();
        let mut particles = Vec::with_capacity(self.particles.len());
        for (i, r) in self.particles.iter().enumerate() {
            let key = ParticleRecord { center: [0.0; 3], quaternion: [1.0, 0.0, 0.0, 0.0], ..r.clone() };
            let template = match templates.iter().find(|(k, _)| *k == key) {
                Some((_, t)) => t.clone(),
                None => {
                    let t = build_template(r).map_err(|e| CliError::Config(format!("particle {i}: {e}")))?;
                    templates.push((key, t.clone()));
                    t
                }
            };
            let [w, x, y, z] = r.quaternion;
            let rotation = Quaternion::new(w, x, y, z).to_rotation();
            particles.push(template.placed(Vec3(r.center), rotation).map_err(|e| CliError::Config(format!("particle {i}: {e}")))?);
        }
        let cluster = Cluster::new(particles, self.min_separation);
        cluster.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cluster)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Runtime(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

fn build_template(r: &ParticleRecord) -> Result<Particle<f64>, String> {
    let [a, b, c] = r.semiaxes;
    let shape = match r.shape.as_str() {
        "sphere" => Shape::sphere(a),
        "ellipsoid" => Shape::ellipsoid(a, b, c),
        s => return Err(format!("unknown shape {s:?}")),
    };
    let rule = match (r.n, r.nv, &r.point_set) {
        (Some(n), None, None) => NodeRule::Fibonacci(n),
        (None, Some(nv), None) => NodeRule::Grid(nv),
        (None, None, Some(p)) => NodeRule::PointSet(PointSet::load(p.clone()).map_err(|e| e.to_string())?),
        _ => return Err("exactly one of n, nv, point_set is required".into()),
    };
    Particle::with_rule(shape, Vec3::zero(), mfs_core::Mat3::identity(), rule, r.delta_sep, r.rectangularity).map_err(|e| e.to_string())
}
