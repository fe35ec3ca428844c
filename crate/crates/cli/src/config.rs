//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Option<String>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub discretization: DiscretizationConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub evaluator: EvaluatorSection,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub sweep: Option<SweepConfig>,
    pub targets: Option<TargetConfig>,
    /// Solution file written by `solve`, for `eval-field`.
    pub solution: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Cluster file; excludes the growth parameters below.
    pub file: Option<PathBuf>,
    pub count: Option<usize>,
    /// Minimum surface separation of grown clusters.
    pub delta: Option<f64>,
    pub shape: Option<ShapeConfig>,
    /// `fixed` or `random`.
    pub orientation: Option<String>,
    /// `exact` or `bounding-spheres`.
    pub mode: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ShapeConfig {
    Sphere { radius: f64 },
    Ellipsoid { axes: [f64; 3] },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub n: Option<usize>,
    pub nv: Option<usize>,
    pub point_set: Option<PathBuf>,
    pub delta_sep: Option<f64>,
    /// Proxy radius of spheres; `delta_sep = radius - rp`.
    pub rp: Option<f64>,
    pub rectangularity: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tolerance: Option<f64>,
    pub max_iters: Option<usize>,
    pub trunc_eps: Option<f64>,
    pub mu: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorSection {
    /// `direct` or `accelerated`.
    pub backend: Option<String>,
    pub tolerance: Option<f64>,
    pub threads: Option<usize>,
}

/// Boundary data. Per-body lists of length one are broadcast.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub values: Option<Vec<f64>>,
    pub forces: Option<Vec<[f64; 3]>>,
    pub torques: Option<Vec<[f64; 3]>>,
    pub velocities: Option<Vec<[f64; 3]>>,
    pub angular_velocities: Option<Vec<[f64; 3]>>,
    /// Uniform data in [-1, 1] drawn from the run seed.
    #[serde(default)]
    pub random: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "yes")]
    pub strengths: bool,
    /// Test points per collocation node for the reported residual; 0 skips it.
    #[serde(default = "two")]
    pub residual_multiplier: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { strengths: true, residual_multiplier: 2.0 }
    }
}

fn yes() -> bool {
    true
}

fn two() -> f64 {
    2.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// `n`, `nv`, `delta_sep`, `rp` or `delta`.
    pub variable: String,
    pub values: Vec<f64>,
    pub output_floor: Option<f64>,
    pub residual_floor: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    #[serde(default)]
    pub points: Vec<[f64; 3]>,
    pub line: Option<LineProbe>,
    pub plane: Option<PlaneProbe>,
    /// Surface test grid with this many points per collocation node.
    pub surface_multiplier: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineProbe {
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub count: usize,
}

/// Grid `origin + i/(nu-1) u + j/(nv-1) v`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneProbe {
    pub origin: [f64; 3],
    pub u: [f64; 3],
    pub v: [f64; 3],
    pub nu: usize,
    pub nv: usize,
}

impl RunConfig {
    /// Reads a config and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        resolve(&mut cfg.geometry.file);
        resolve(&mut cfg.discretization.point_set);
        resolve(&mut cfg.solution);
        for p in [&cfg.geometry.file, &cfg.discretization.point_set, &cfg.solution].into_iter().flatten() {
            if !p.is_file() {
                return Err(CliError::Config(format!("file not found: {}", p.display())));
            }
        }
        Ok(cfg)
    }
}
