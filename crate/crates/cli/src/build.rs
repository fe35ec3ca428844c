//! Turning a [`RunConfig`] into library inputs.

use mfs_core::evaluator::{Backend, EvaluatorConfig};
use mfs_core::geometry::{default_rectangularity, grow_cluster, Cluster, GrowthMode, NodeRule, OrientationPolicy, Particle, PointSet, Shape};
use mfs_core::solvers::{BoundaryData, NetLoad, ProblemKind, RigidMotion, SolverConfig};
use mfs_core::{Mat3, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cluster_file::ClusterDocument;
use crate::config::{DiscretizationConfig, RunConfig, ShapeConfig};
use crate::CliError;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn problem_kind(cfg: &RunConfig) -> Result<ProblemKind, CliError> {
    let name = cfg.problem.as_deref().ok_or_else(|| config_err("missing `problem`"))?;
    ProblemKind::parse(name).ok_or_else(|| config_err(format!("unknown problem {name:?}")))
}

pub fn solver_config(cfg: &RunConfig, threads: Option<usize>) -> Result<SolverConfig<f64>, CliError> {
    let mut s = SolverConfig::<f64>::default();
    let sec = &cfg.solver;
    if let Some(t) = sec.tolerance {
        if !(t > 0.0 && t < 1.0) {
            return Err(config_err(format!("solver tolerance must lie in (0, 1), got {t}")));
        }
        s = s.with_tolerance(t);
    }
    if let Some(m) = sec.max_iters {
        if m == 0 {
            return Err(config_err("max_iters must be positive"));
        }
        s.max_iters = m;
    }
    if let Some(e) = sec.trunc_eps {
        s.trunc_eps = e;
    }
    if let Some(mu) = sec.mu {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(config_err(format!("viscosity must be positive, got {mu}")));
        }
        s.mu = mu;
    }
    let ev = &cfg.evaluator;
    let mut e = match ev.backend.as_deref().unwrap_or("direct") {
        "direct" => EvaluatorConfig::direct(),
        "accelerated" => EvaluatorConfig { backend: Backend::Accelerated { tolerance: ev.tolerance.unwrap_or(1e-12) }, threads: None },
        b => return Err(config_err(format!("unknown evaluator backend {b:?}"))),
    };
    if let Some(t) = threads.or(ev.threads) {
        e = e.with_threads(t);
    }
    e.validate().map_err(|err| config_err(err.to_string()))?;
    s.evaluator = e;
    Ok(s)
}

fn shape(cfg: &RunConfig) -> Result<Shape<f64>, CliError> {
    let s = match cfg.geometry.shape {
        None => Shape::sphere(1.0),
        Some(ShapeConfig::Sphere { radius }) => Shape::sphere(radius),
        Some(ShapeConfig::Ellipsoid { axes: [a, b, c] }) => Shape::ellipsoid(a, b, c),
    };
    s.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(s)
}

fn delta_sep(d: &DiscretizationConfig, shape: &Shape<f64>) -> Result<f64, CliError> {
    match (d.delta_sep, d.rp) {
        (Some(_), Some(_)) => Err(config_err("give delta_sep or rp, not both")),
        (Some(ds), None) => Ok(ds),
        (None, Some(rp)) => match shape {
            Shape::Sphere { radius } => Ok(radius - rp),
            _ => Err(config_err("rp applies to spheres only")),
        },
        (None, None) => Err(config_err("missing delta_sep (or rp for spheres)")),
    }
}

fn node_rule(d: &DiscretizationConfig, shape: &Shape<f64>) -> Result<NodeRule, CliError> {
    match (shape.is_sphere(), d.n, d.nv, &d.point_set) {
        (true, Some(n), None, None) => Ok(NodeRule::Fibonacci(n)),
        (true, None, None, Some(p)) => Ok(NodeRule::PointSet(PointSet::load(p.clone()).map_err(|e| config_err(e.to_string()))?)),
        (false, None, Some(nv), None) => Ok(NodeRule::Grid(nv)),
        (true, ..) => Err(config_err("spheres need exactly one of n or point_set")),
        (false, ..) => Err(config_err("ellipsoids need nv")),
    }
}

/// Template particle at the origin described by the config.
pub fn template(cfg: &RunConfig) -> Result<Particle<f64>, CliError> {
    let shape = shape(cfg)?;
    let d = &cfg.discretization;
    let rule = node_rule(d, &shape)?;
    let ds = delta_sep(d, &shape)?;
    let rect = d.rectangularity.unwrap_or_else(|| default_rectangularity(&shape));
    Particle::with_rule(shape, Vec3::zero(), Mat3::identity(), rule, ds, rect).map_err(|e| config_err(e.to_string()))
}

/// Geometry of the run: a cluster file (with optional discretization
/// overrides) or a grown cluster.
pub fn cluster(cfg: &RunConfig, seed: u64) -> Result<Cluster<f64>, CliError> {
    let g = &cfg.geometry;
    if let Some(path) = &g.file {
        if g.count.is_some() || g.delta.is_some() || g.shape.is_some() {
            return Err(config_err("geometry.file excludes count, delta and shape"));
        }
        let mut doc = ClusterDocument::read(path)?;
        let d = &cfg.discretization;
        if d.rp.is_some() {
            return Err(config_err("rp cannot override a cluster file; use delta_sep"));
        }
        for r in &mut doc.particles {
            if let Some(n) = d.n {
                (r.n, r.point_set) = (Some(n), None);
            }
            if let Some(nv) = d.nv {
                r.nv = Some(nv);
            }
            if let Some(ds) = d.delta_sep {
                r.delta_sep = ds;
            }
            if let Some(rect) = d.rectangularity {
                r.rectangularity = rect;
            }
        }
        return doc.to_cluster();
    }
    let count = g.count.unwrap_or(1);
    if count == 0 {
        return Err(config_err("geometry.count must be positive"));
    }
    let t = template(cfg)?;
    let delta = match g.delta {
        Some(d) if d > 0.0 && d.is_finite() => d,
        Some(d) => return Err(config_err(format!("geometry.delta must be positive, got {d}"))),
        None if count == 1 => return Ok(Cluster::new(vec![t], 0.0)),
        None => return Err(config_err("geometry.delta is required for more than one particle")),
    };
    let policy = match g.orientation.as_deref().unwrap_or("fixed") {
        "fixed" => OrientationPolicy::Fixed,
        "random" => OrientationPolicy::Random,
        o => return Err(config_err(format!("unknown orientation {o:?}"))),
    };
    let mode = match g.mode.as_deref().unwrap_or("exact") {
        "exact" => GrowthMode::Exact,
        "bounding-spheres" => GrowthMode::BoundingSpheres,
        m => return Err(config_err(format!("unknown growth mode {m:?}"))),
    };
    Ok(grow_cluster(count, delta, &t, policy, mode, seed)?)
}

fn per_body<T: Copy>(name: &str, list: &Option<Vec<T>>, p: usize, zero: T) -> Result<Vec<T>, CliError> {
    match list {
        None => Ok(vec![zero; p]),
        Some(v) if v.len() == 1 => Ok(vec![v[0]; p]),
        Some(v) if v.len() == p => Ok(v.clone()),
        Some(v) => Err(config_err(format!("data.{name} has {} entries for {p} particles", v.len()))),
    }
}

pub fn boundary_data(cfg: &RunConfig, kind: ProblemKind, p: usize, seed: u64) -> Result<BoundaryData<f64>, CliError> {
    let d = &cfg.data;
    let scalars = [&d.values];
    let stokes = [&d.forces, &d.torques, &d.velocities, &d.angular_velocities];
    let (allowed_scalar, allowed) = match kind {
        ProblemKind::Capacitance | ProblemKind::Elastance => (true, [false; 4]),
        ProblemKind::Resistance => (false, [false, false, true, true]),
        ProblemKind::Mobility => (false, [true, true, false, false]),
    };
    if (!allowed_scalar && scalars[0].is_some()) || stokes.iter().zip(allowed).any(|(s, a)| s.is_some() && !a) {
        return Err(config_err(format!("data fields do not match a {} problem", kind.name())));
    }
    if d.random {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed));
        let mut u = || rng.random_range(-1.0..1.0);
        let mut vec = || Vec3::new(u(), u(), u());
        return Ok(match kind {
            ProblemKind::Capacitance => BoundaryData::Voltages((0..p).map(|_| vec().x()).collect()),
            ProblemKind::Elastance => BoundaryData::Charges((0..p).map(|_| vec().x()).collect()),
            ProblemKind::Resistance => BoundaryData::Motions((0..p).map(|_| RigidMotion::new(vec(), vec())).collect()),
            ProblemKind::Mobility => BoundaryData::Loads((0..p).map(|_| NetLoad::new(vec(), vec())).collect()),
        });
    }
    let pair = |a: &Option<Vec<[f64; 3]>>, an: &str, b: &Option<Vec<[f64; 3]>>, bn: &str| -> Result<Vec<(Vec3<f64>, Vec3<f64>)>, CliError> {
        let a = per_body(an, a, p, [0.0; 3])?;
        let b = per_body(bn, b, p, [0.0; 3])?;
        Ok(a.into_iter().zip(b).map(|(x, y)| (Vec3(x), Vec3(y))).collect())
    };
    Ok(match kind {
        ProblemKind::Capacitance => BoundaryData::Voltages(per_body("values", &d.values.clone().or(Some(vec![1.0])), p, 0.0)?),
        ProblemKind::Elastance => BoundaryData::Charges(per_body("values", &d.values.clone().or(Some(vec![1.0])), p, 0.0)?),
        ProblemKind::Resistance => BoundaryData::Motions(
            pair(&d.velocities, "velocities", &d.angular_velocities, "angular_velocities")?.into_iter().map(|(v, w)| RigidMotion::new(v, w)).collect(),
        ),
        ProblemKind::Mobility => {
            BoundaryData::Loads(pair(&d.forces, "forces", &d.torques, "torques")?.into_iter().map(|(f, t)| NetLoad::new(f, t)).collect())
        }
    })
}
