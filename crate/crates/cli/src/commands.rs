//! The four subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mfs_core::analysis::{convergence_sweep, r_acc, surface_residual, RateFit, SweepOptions};
use mfs_core::geometry::Cluster;
use mfs_core::solvers::{
    evaluate_solution, BlockSystemContext, BodyOutput, BoundaryData, FieldRequest, FieldValues, NetLoad, ProblemKind, RigidMotion,
    Solution, SolveReport,
};
use mfs_core::Vec3;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::build;
use crate::cluster_file::ClusterDocument;
use crate::config::{RunConfig, TargetConfig};
use crate::CliError;

pub struct Common<'a> {
    pub config: RunConfig,
    pub out: &'a Path,
    pub threads: Option<usize>,
    pub seed: u64,
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    write(path, &(serde_json::to_string_pretty(v).map_err(|e| CliError::Runtime(e.to_string()))? + "\n"))
}

/// Seventeen significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn fit_json(f: &Option<RateFit>) -> Value {
    match f {
        Some(f) => json!({
            "intercept": f.intercept,
            "slope": f.slope,
            "rate": f.rate,
            "points_used": f.points_used,
            "rms_misfit": f.rms_misfit,
        }),
        None => Value::Null,
    }
}

fn report_json(r: &SolveReport) -> Value {
    json!({
        "converged": r.converged,
        "iterations": r.iterations,
        "residual_history": r.residual_history,
        "final_residual": r.final_residual,
        "tolerance": r.tolerance,
        "max_strength": r.max_strength,
        "svd_count": r.svd_count,
        "timings": {
            "assembly": r.timings.assembly,
            "factorization": r.timings.factorization,
            "rhs": r.timings.rhs,
            "gmres": r.timings.gmres,
            "recover": r.timings.recover,
        },
    })
}

fn outputs_json(s: &Solution<f64>) -> Value {
    if s.kind.is_laplace() {
        let (v, q) = (s.voltages(), s.charges());
        Value::Array(v.iter().zip(&q).enumerate().map(|(k, (v, q))| json!({"body": k, "voltage": v, "charge": q})).collect())
    } else {
        let (m, l) = (s.motions(), s.loads());
        Value::Array(
            m.iter()
                .zip(&l)
                .enumerate()
                .map(|(k, (m, l))| json!({"body": k, "velocity": m.v.0, "angular_velocity": m.omega.0, "force": l.f.0, "torque": l.t.0}))
                .collect(),
        )
    }
}

/// What `eval-field` needs to rebuild a solved representation.
#[derive(Serialize, Deserialize)]
pub struct SolutionFile {
    pub problem: String,
    pub mu: f64,
    pub cluster: ClusterDocument,
    /// Per-body strengths of the final representation.
    pub strengths: Vec<Vec<f64>>,
    pub voltages: Vec<f64>,
    pub charges: Vec<f64>,
    pub motions: Vec<[f64; 6]>,
    pub loads: Vec<[f64; 6]>,
}

impl SolutionFile {
    fn new(s: &Solution<f64>, cluster: &Cluster<f64>) -> Self {
        let laplace = s.kind.is_laplace();
        Self {
            problem: s.kind.name().to_string(),
            mu: s.mu,
            cluster: ClusterDocument::from_cluster(cluster),
            strengths: s.effective_strengths.clone(),
            voltages: if laplace { s.voltages() } else { Vec::new() },
            charges: if laplace { s.charges() } else { Vec::new() },
            motions: if laplace { Vec::new() } else { s.motions().iter().map(|m| m.to_six()).collect() },
            loads: if laplace { Vec::new() } else { s.loads().iter().map(|l| l.to_six()).collect() },
        }
    }

    fn to_solution(&self) -> Result<(Solution<f64>, Cluster<f64>), CliError> {
        let bad = |m: &str| CliError::Config(format!("solution file: {m}"));
        let kind = ProblemKind::parse(&self.problem).ok_or_else(|| bad("unknown problem"))?;
        let cluster = self.cluster.to_cluster()?;
        let p = cluster.len();
        let sizes_ok = if kind.is_laplace() { self.voltages.len() == p && self.charges.len() == p } else { self.motions.len() == p && self.loads.len() == p };
        if !sizes_ok || self.strengths.len() != p {
            return Err(bad("per-body arrays do not match the cluster"));
        }
        let motions: Vec<RigidMotion<f64>> = self.motions.iter().map(RigidMotion::from_six).collect();
        let loads: Vec<NetLoad<f64>> = self.loads.iter().map(NetLoad::from_six).collect();
        let (inputs, outputs) = match kind {
            ProblemKind::Capacitance => (BoundaryData::Voltages(self.voltages.clone()), self.charges.iter().map(|&q| BodyOutput::Charge(q)).collect()),
            ProblemKind::Elastance => (BoundaryData::Charges(self.charges.clone()), self.voltages.iter().map(|&v| BodyOutput::Voltage(v)).collect()),
            ProblemKind::Resistance => (BoundaryData::Motions(motions), loads.iter().map(|&l| BodyOutput::Load(l)).collect()),
            ProblemKind::Mobility => (BoundaryData::Loads(loads), motions.iter().map(|&m| BodyOutput::Motion(m)).collect()),
        };
        let solution = Solution {
            kind,
            inputs,
            strengths: self.strengths.clone(),
            effective_strengths: self.strengths.clone(),
            surface_values: Vec::new(),
            outputs,
            report: SolveReport::default(),
            mu: self.mu,
        };
        Ok((solution, cluster))
    }
}

fn strengths_csv(s: &Solution<f64>, cluster: &Cluster<f64>) -> String {
    let mut out = String::from(if s.kind.is_laplace() { "body,node,x,y,z,strength\n" } else { "body,node,x,y,z,sx,sy,sz\n" });
    let c = s.kind.components();
    for (k, (p, st)) in cluster.particles.iter().zip(&s.effective_strengths).enumerate() {
        for (j, y) in p.proxy.iter().enumerate() {
            let _ = write!(out, "{k},{j},{},{},{}", num(y.0[0]), num(y.0[1]), num(y.0[2]));
            for v in &st[c * j..c * j + c] {
                let _ = write!(out, ",{}", num(*v));
            }
            out.push('\n');
        }
    }
    out
}

pub fn solve(c: Common) -> Result<(), CliError> {
    let kind = build::problem_kind(&c.config)?;
    let solver = build::solver_config(&c.config, c.threads)?;
    let cluster = build::cluster(&c.config, c.seed)?;
    let data = build::boundary_data(&c.config, kind, cluster.len(), c.seed)?;
    let ctx = BlockSystemContext::new(kind, &cluster, solver)?;
    let solution = ctx.solve(&data)?;
    drop(ctx);
    let residual = if c.config.output.residual_multiplier > 0.0 {
        let r = surface_residual(&solution, &cluster, c.config.output.residual_multiplier, &solver)?;
        json!({"max": r.max, "points": r.values.len(), "absolute_points": r.absolute.iter().filter(|a| **a).count()})
    } else {
        Value::Null
    };
    let report = json!({
        "problem": kind.name(),
        "particles": cluster.len(),
        "proxy_nodes": cluster.total_proxy(),
        "collocation_nodes": cluster.total_collocation(),
        "seed": c.seed,
        "solve": report_json(&solution.report),
        "surface_residual": residual,
        "outputs": outputs_json(&solution),
    });
    write_json(&c.out.join("report.json"), &report)?;
    write(&c.out.join("cluster.toml"), &ClusterDocument::from_cluster(&cluster).to_toml()?)?;
    let file = SolutionFile::new(&solution, &cluster);
    write(&c.out.join("solution.json"), &(serde_json::to_string(&file).map_err(|e| CliError::Runtime(e.to_string()))? + "\n"))?;
    if c.config.output.strengths {
        write(&c.out.join("strengths.csv"), &strengths_csv(&solution, &cluster))?;
    }
    println!(
        "{}: {} iterations, relative residual {:.3e}, converged {}",
        kind.name(),
        solution.report.iterations,
        solution.report.final_residual,
        solution.report.converged
    );
    if !solution.report.converged {
        return Err(CliError::Runtime(format!("GMRES did not converge in {} iterations", solution.report.iterations)));
    }
    Ok(())
}

pub fn convergence(c: Common) -> Result<(), CliError> {
    let sweep = c.config.sweep.clone().ok_or_else(|| CliError::Config("missing [sweep] section".into()))?;
    if sweep.values.len() < 4 {
        return Err(CliError::Config(format!("a sweep needs at least 4 values, got {}", sweep.values.len())));
    }
    let kind = build::problem_kind(&c.config)?;
    let solver = build::solver_config(&c.config, c.threads)?;
    let variable = sweep.variable.as_str();
    if !["n", "nv", "delta_sep", "rp", "delta"].contains(&variable) {
        return Err(CliError::Config(format!("unknown sweep variable {variable:?}")));
    }
    let at = |value: f64| -> Result<RunConfig, CliError> {
        let mut cfg = c.config.clone();
        let d = &mut cfg.discretization;
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(CliError::Config(format!("sweep value {value} is not a node count")))
            }
        };
        match variable {
            "n" => d.n = Some(count()?),
            "nv" => d.nv = Some(count()?),
            "delta_sep" => d.delta_sep = Some(value),
            "rp" => d.rp = Some(value),
            _ => cfg.geometry.delta = Some(value),
        }
        Ok(cfg)
    };
    for &v in &sweep.values {
        at(v)?;
    }
    let first = build::cluster(&at(sweep.values[0])?, c.seed)?;
    let data = build::boundary_data(&c.config, kind, first.len(), c.seed)?;
    drop(first);
    let options = SweepOptions {
        residual_floor: sweep.residual_floor,
        output_floor: sweep.output_floor.unwrap_or(SweepOptions::default().output_floor),
        test_multiplier: if c.config.output.residual_multiplier > 0.0 { c.config.output.residual_multiplier } else { 2.0 },
    };
    let build_at = |v: f64| build::cluster(&at(v).map_err(|e| mfs_core::Error::InvalidArgument(e.to_string()))?, c.seed).map_err(|e| match e {
        CliError::Core(e) => e,
        other => mfs_core::Error::InvalidArgument(other.to_string()),
    });
    let record = convergence_sweep(variable, &sweep.values, build_at, &data, solver, options)?;
    let mut csv = String::from("sweep_value,n,max_residual,output_error,iterations,max_strength,seconds,converged\n");
    for p in &record.points {
        let err = p.output_error.map(num).unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{err},{},{},{},{}", num(p.value), p.n, num(p.max_residual), p.iterations, num(p.max_strength), num(p.seconds), p.converged);
    }
    write(&c.out.join("convergence.csv"), &csv)?;
    let accumulation = match (variable, c.config.geometry.delta) {
        ("delta", _) | (_, None) => Value::Null,
        (_, Some(d)) => json!({"delta": d, "r_acc": r_acc(d)?}),
    };
    let report = json!({
        "problem": kind.name(),
        "variable": record.variable,
        "points": record.points.len(),
        "residual_fit": fit_json(&record.residual_fit),
        "output_fit": fit_json(&record.output_fit),
        "accumulation_radius": accumulation,
        "warnings": record.warnings,
    });
    write_json(&c.out.join("report.json"), &report)?;
    for w in &record.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(f) = &record.residual_fit {
        println!("residual rate {:.6} over {} points", f.rate, f.points_used);
    }
    if let Some(f) = &record.output_fit {
        println!("output rate {:.6} over {} points", f.rate, f.points_used);
    }
    Ok(())
}

pub fn cluster(c: Common) -> Result<(), CliError> {
    if c.config.geometry.file.is_some() {
        return Err(CliError::Config("the cluster command grows a cluster; remove geometry.file".into()));
    }
    let cluster = build::cluster(&c.config, c.seed)?;
    let doc = ClusterDocument::from_cluster(&cluster);
    let back = doc.to_cluster()?;
    let text = doc.to_toml()?;
    write(&c.out.join("cluster.toml"), &text)?;
    match back.min_pair_distance()? {
        Some((d, i, j)) => println!("{} particles, min distance {d:.9e} between {i} and {j}", back.len()),
        None => println!("1 particle"),
    }
    Ok(())
}

struct Target {
    x: Vec3<f64>,
    /// Body whose surface this point samples.
    surface: Option<usize>,
    inside: bool,
}

fn targets(t: &TargetConfig, cluster: &Cluster<f64>) -> Result<Vec<Target>, CliError> {
    let mut pts: Vec<(Vec3<f64>, Option<usize>)> = t.points.iter().map(|&p| (Vec3(p), None)).collect();
    if let Some(l) = &t.line {
        let (a, b) = (Vec3(l.start), Vec3(l.end));
        for i in 0..l.count {
            let s = if l.count == 1 { 0.0 } else { i as f64 / (l.count - 1) as f64 };
            pts.push((a + (b - a) * s, None));
        }
    }
    if let Some(p) = &t.plane {
        let (o, u, v) = (Vec3(p.origin), Vec3(p.u), Vec3(p.v));
        let frac = |i: usize, n: usize| if n <= 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
        for j in 0..p.nv {
            for i in 0..p.nu {
                pts.push((o + u * frac(i, p.nu) + v * frac(j, p.nv), None));
            }
        }
    }
    if let Some(m) = t.surface_multiplier {
        if !(m > 0.0) {
            return Err(CliError::Config("surface_multiplier must be positive".into()));
        }
        for (k, p) in cluster.particles.iter().enumerate() {
            let (xs, _) = p.test_points(m)?;
            pts.extend(xs.into_iter().map(|x| (x, Some(k))));
        }
    }
    if pts.iter().any(|(x, _)| !x.is_finite()) {
        return Err(CliError::Config("target points must be finite".into()));
    }
    Ok(pts
        .into_iter()
        .map(|(x, surface)| {
            let inside = surface.is_none() && cluster.particles.iter().any(|p| p.contains(x, 1e-9));
            Target { x, surface, inside }
        })
        .collect())
}

pub fn eval_field(c: Common) -> Result<(), CliError> {
    let path = c.config.solution.clone().ok_or_else(|| CliError::Config("missing `solution` file".into()))?;
    let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let file: SolutionFile = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let (solution, cluster) = file.to_solution()?;
    let evaluator = build::solver_config(&c.config, c.threads)?.evaluator;
    let targets = targets(&c.config.targets.clone().unwrap_or_default(), &cluster)?;
    let exterior: Vec<Vec3<f64>> = targets.iter().filter(|t| !t.inside).map(|t| t.x).collect();
    let laplace = solution.kind.is_laplace();
    let request = if laplace { FieldRequest::Potential } else { FieldRequest::VelocityPressure };
    let values = if exterior.is_empty() {
        if laplace { FieldValues::Potential(Vec::new()) } else { FieldValues::VelocityPressure { velocity: Vec::new(), pressure: Vec::new() } }
    } else {
        evaluate_solution(&solution, &cluster, &exterior, &request, &evaluator)?
    };
    let (voltages, motions) = if laplace { (solution.voltages(), Vec::new()) } else { (Vec::new(), solution.motions()) };
    let mut csv = String::from(if laplace { "x,y,z,inside,potential,residual\n" } else { "x,y,z,inside,ux,uy,uz,p,residual\n" });
    let (mut next, mut flagged, mut max_res) = (0usize, 0usize, 0.0f64);
    for t in &targets {
        let _ = write!(csv, "{},{},{},{}", num(t.x.0[0]), num(t.x.0[1]), num(t.x.0[2]), u8::from(t.inside));
        if t.inside {
            flagged += 1;
            csv.push_str(if laplace { ",,\n" } else { ",,,,,\n" });
            continue;
        }
        let i = next;
        next += 1;
        let residual = match &values {
            FieldValues::Potential(u) => {
                let _ = write!(csv, ",{}", num(u[i]));
                t.surface.map(|k| (u[i] - voltages[k]).abs())
            }
            FieldValues::VelocityPressure { velocity, pressure } => {
                let u = velocity[i];
                let _ = write!(csv, ",{},{},{},{}", num(u.0[0]), num(u.0[1]), num(u.0[2]), num(pressure[i]));
                t.surface.map(|k| {
                    let g = cluster.particles[k].rigid_velocity(motions[k].v, motions[k].omega, t.x);
                    let e = (u - g).norm();
                    if g.norm() > 0.0 { e / g.norm() } else { e }
                })
            }
            FieldValues::Traction(_) => unreachable!(),
        };
        if let Some(r) = residual {
            max_res = max_res.max(r);
            let _ = write!(csv, ",{}", num(r));
        } else {
            csv.push(',');
        }
        csv.push('\n');
    }
    write(&c.out.join("field.csv"), &csv)?;
    let surface = targets.iter().any(|t| t.surface.is_some());
    let report = json!({
        "problem": solution.kind.name(),
        "targets": targets.len(),
        "inside": flagged,
        "max_surface_residual": if surface { json!(max_res) } else { Value::Null },
    });
    write_json(&c.out.join("field_report.json"), &report)?;
    if flagged > 0 {
        eprintln!("warning: {flagged} target(s) lie inside a particle and were not evaluated");
    }
    println!("{} targets evaluated", targets.len() - flagged);
    Ok(())
}
