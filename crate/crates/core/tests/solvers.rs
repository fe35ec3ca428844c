use faer::Mat;
use mfs_core::geometry::{Cluster, Particle, Shape};
use mfs_core::solvers::{
    solve_capacitance, solve_elastance, solve_mobility, solve_resistance, BlockSystemContext, BoundaryData, FactorCache, NetLoad,
    ProblemKind, RigidMotion, SolverConfig,
};
use mfs_core::{Mat3, Vec3};
use std::f64::consts::PI;

mod common;

use common::*;

fn sphere(center: Vec3<f64>, n: usize) -> Particle<f64> {
    Particle::new(Shape::sphere(1.0), center, Mat3::identity(), n, 0.3, 1.2).unwrap()
}

fn ellipsoid(center: Vec3<f64>, rot: Mat3<f64>, nv: usize) -> Particle<f64> {
    Particle::new(Shape::ellipsoid(1.0, 0.8, 0.6), center, rot, nv, 0.2, 1.3).unwrap()
}

#[test]
fn single_body_matvec_is_identity() {
    for kind in [ProblemKind::Capacitance, ProblemKind::Elastance, ProblemKind::Resistance, ProblemKind::Mobility] {
        let cluster = Cluster::new(vec![sphere(Vec3::zero(), 60)], 0.5);
        let ctx = BlockSystemContext::new(kind, &cluster, SolverConfig::default()).unwrap();
        let g = random_vec(ctx.unknowns(), 3);
        assert_eq!(ctx.matvec(&g).unwrap(), g);
    }
}

#[test]
fn two_body_matvec_matches_dense_oracle() {
    let rot = Mat3::rotation_about(v(1.0, 2.0, -0.5), 0.7);
    for kind in [ProblemKind::Capacitance, ProblemKind::Elastance, ProblemKind::Resistance, ProblemKind::Mobility] {
        let cluster = Cluster::new(vec![ellipsoid(Vec3::zero(), Mat3::identity(), 7), ellipsoid(v(2.4, 0.3, 0.1), rot, 7)], 0.3);
        let ctx = BlockSystemContext::new(kind, &cluster, SolverConfig::default()).unwrap();
        assert_eq!(ctx.group_count(), 1);
        let g = random_vec(ctx.unknowns(), 11);
        let got = ctx.matvec(&g).unwrap();
        let want = preconditioned_oracle(kind, &cluster, &g);
        let err = rel_diff(&got, &want);
        assert!(err <= 1e-11, "{kind:?}: {err:e}");
    }
}

#[test]
fn mixed_sphere_pair_matches_oracle() {
    let cluster = Cluster::new(vec![sphere(Vec3::zero(), 80), sphere(v(0.0, 0.0, 2.5), 80)], 0.5);
    let ctx = BlockSystemContext::new(ProblemKind::Resistance, &cluster, SolverConfig::default()).unwrap();
    let g = random_vec(ctx.unknowns(), 5);
    let err = rel_diff(&ctx.matvec(&g).unwrap(), &preconditioned_oracle(ProblemKind::Resistance, &cluster, &g));
    assert!(err <= 1e-11, "{err:e}");
}

#[test]
fn single_sphere_capacitance_and_elastance() {
    let r = 1.5;
    let p = Particle::new(Shape::sphere(r), v(0.3, -0.2, 0.1), Mat3::identity(), 200, 0.4, 1.2).unwrap();
    let cluster = Cluster::new(vec![p], 0.1);
    let cap = solve_capacitance(&cluster, &[2.0], SolverConfig::default()).unwrap();
    assert!(cap.report.converged);
    let q = cap.charges()[0];
    assert!((q - 4.0 * PI * r * 2.0).abs() <= 1e-5 * q, "q = {q}");
    let el = solve_elastance(&cluster, &[3.0], SolverConfig::default()).unwrap();
    let phi = el.voltages()[0];
    let want = 3.0 / (4.0 * PI * r);
    assert!((phi - want).abs() <= 1e-5 * want, "phi = {phi}");
}

#[test]
fn single_sphere_drag_and_mobility() {
    let r = 0.8;
    let mu = 1.3;
    let p = Particle::new(Shape::sphere(r), v(1.0, 2.0, 3.0), Mat3::identity(), 300, 0.25, 1.2).unwrap();
    let cluster = Cluster::new(vec![p], 0.1);
    let cfg = SolverConfig { mu, ..SolverConfig::default() };
    let motion = RigidMotion::new(v(0.2, -0.5, 1.0), v(0.3, 0.1, -0.4));
    let res = solve_resistance(&cluster, &[motion], cfg).unwrap();
    let load = res.loads()[0];
    let f_want = motion.v * (6.0 * PI * mu * r);
    let t_want = motion.omega * (8.0 * PI * mu * r.powi(3));
    assert!((load.f - f_want).norm() <= 1e-4 * f_want.norm(), "{:?}", load.f);
    assert!((load.t - t_want).norm() <= 1e-4 * t_want.norm(), "{:?}", load.t);

    let mob = solve_mobility(&cluster, &[NetLoad::new(f_want, t_want)], cfg).unwrap();
    let u = mob.motions()[0];
    assert!((u.v - motion.v).norm() <= 1e-4 * motion.v.norm(), "{:?}", u.v);
    assert!((u.omega - motion.omega).norm() <= 1e-4 * motion.omega.norm(), "{:?}", u.omega);
}

#[test]
fn rotation_reuse_matches_fresh_factorization() {
    let rot = Mat3::rotation_about(v(0.3, -1.0, 0.4), 2.1);
    let a = ellipsoid(Vec3::zero(), Mat3::identity(), 8);
    let b = ellipsoid(v(3.0, 0.0, 0.0), rot, 8);
    let cluster = Cluster::new(vec![a, b.clone()], 0.3);
    let ctx = BlockSystemContext::new(ProblemKind::Resistance, &cluster, SolverConfig::default()).unwrap();
    assert_eq!(ctx.svd_count(), 1);
    let g = random_vec(ctx.unknowns(), 17);
    let reused = ctx.apply_pinv(&g).unwrap();

    let alone = Cluster::new(vec![b], 0.3);
    let fresh = BlockSystemContext::new(ProblemKind::Resistance, &alone, SolverConfig::default()).unwrap();
    let r = ctx.collocation_range(1);
    let fresh_lam = fresh.apply_pinv(&g[r]).unwrap();
    // an unrotated factorization of the world-frame block
    let (block, _) = oracle_block(ProblemKind::Resistance, &alone.particles[0]);
    let gm = Mat::from_fn(block.nrows(), 1, |i, _| g[ctx.collocation_range(1)][i]);
    let x = lstsq(&block, &gm);
    let direct: Vec<f64> = (0..x.nrows()).map(|i| x[(i, 0)]).collect();
    let got = &reused[ctx.proxy_range(1)];
    assert!(rel_diff(got, &fresh_lam) <= 1e-9);
    assert!(rel_diff(got, &direct) <= 1e-9, "{:e}", rel_diff(got, &direct));
}

#[test]
fn congruent_bodies_share_one_svd() {
    let rot = Mat3::rotation_about(v(0.0, 1.0, 1.0), 1.0);
    let cluster = Cluster::new(
        vec![
            ellipsoid(Vec3::zero(), Mat3::identity(), 6),
            ellipsoid(v(3.0, 0.0, 0.0), rot, 6),
            ellipsoid(v(0.0, 3.0, 0.0), rot.transpose(), 6),
        ],
        0.3,
    );
    for kind in [ProblemKind::Capacitance, ProblemKind::Elastance, ProblemKind::Resistance, ProblemKind::Mobility] {
        let ctx = BlockSystemContext::new(kind, &cluster, SolverConfig::default()).unwrap();
        assert_eq!(ctx.svd_count(), 1, "{kind:?}");
    }
    let different = Cluster::new(vec![ellipsoid(Vec3::zero(), Mat3::identity(), 6), ellipsoid(v(3.0, 0.0, 0.0), rot, 7)], 0.3);
    let ctx = BlockSystemContext::new(ProblemKind::Resistance, &different, SolverConfig::default()).unwrap();
    assert_eq!(ctx.svd_count(), 2);
}

#[test]
fn resized_sphere_reuses_scaled_pinv() {
    let small = Particle::new(Shape::sphere(1.0), Vec3::zero(), Mat3::identity(), 100, 0.3, 1.2).unwrap();
    let big = Particle::new(Shape::sphere(2.5), v(5.0, 0.0, 0.0), Mat3::identity(), 100, 0.75, 1.2).unwrap();
    let cluster = Cluster::new(vec![small, big.clone()], 0.5);
    for kind in [ProblemKind::Capacitance, ProblemKind::Resistance] {
        let ctx = BlockSystemContext::new(kind, &cluster, SolverConfig::default()).unwrap();
        assert_eq!(ctx.svd_count(), 1);
        assert!((ctx.body_scale(1) - 2.5).abs() < 1e-12);
        let g = random_vec(ctx.unknowns(), 23);
        let got = ctx.apply_pinv(&g).unwrap();
        let fresh = BlockSystemContext::new(kind, &Cluster::new(vec![big.clone()], 0.5), SolverConfig::default()).unwrap();
        let want = fresh.apply_pinv(&g[ctx.collocation_range(1)]).unwrap();
        let err = rel_diff(&got[ctx.proxy_range(1)], &want);
        assert!(err <= 1e-12, "{kind:?}: {err:e}");
    }
    // completed problems keep resized bodies in their own groups
    let ctx = BlockSystemContext::new(ProblemKind::Elastance, &cluster, SolverConfig::default()).unwrap();
    assert_eq!(ctx.svd_count(), 2);
}

#[test]
fn factor_cache_is_shared_across_contexts() {
    let mut cache = FactorCache::new();
    let c1 = Cluster::new(vec![sphere(Vec3::zero(), 60)], 0.5);
    let c2 = Cluster::new(vec![sphere(v(1.0, 1.0, 1.0), 60), sphere(v(4.0, 1.0, 1.0), 60)], 0.5);
    let a = BlockSystemContext::with_cache(ProblemKind::Mobility, &c1, SolverConfig::default(), &mut cache).unwrap();
    let b = BlockSystemContext::with_cache(ProblemKind::Mobility, &c2, SolverConfig::default(), &mut cache).unwrap();
    assert_eq!((a.svd_count(), b.svd_count(), cache.svd_count), (1, 0, 1));
    let _ = BlockSystemContext::with_cache(ProblemKind::Resistance, &c2, SolverConfig::default(), &mut cache).unwrap();
    assert_eq!(cache.svd_count, 2);
}

#[test]
fn completed_strengths_carry_the_prescribed_loads() {
    let rot = Mat3::rotation_about(v(1.0, 0.0, 1.0), 0.4);
    let cluster = Cluster::new(vec![ellipsoid(Vec3::zero(), Mat3::identity(), 8), ellipsoid(v(2.2, 0.4, 0.0), rot, 8)], 0.3);
    let loads = vec![NetLoad::new(v(1.0, 0.0, -2.0), v(0.1, 0.5, 0.0)), NetLoad::new(v(-0.3, 1.0, 0.0), v(0.0, 0.0, 0.7))];
    let sol = solve_mobility(&cluster, &loads, SolverConfig::default()).unwrap();
    assert!(sol.report.converged);
    for (k, p) in cluster.particles.iter().enumerate() {
        let lam = &sol.effective_strengths[k];
        let mut f = Vec3::zero();
        let mut t = Vec3::zero();
        for (x, l) in p.proxy.iter().zip(lam.chunks_exact(3)) {
            let l = v(l[0], l[1], l[2]);
            f += l;
            t += (*x - p.center).cross(l);
        }
        assert!((f - loads[k].f).norm() <= 1e-10 * (1.0 + loads[k].f.norm()));
        assert!((t - loads[k].t).norm() <= 1e-10 * (1.0 + loads[k].t.norm()));
    }
    let q = [1.5, -0.5];
    let sol = solve_elastance(&cluster, &q, SolverConfig::default()).unwrap();
    for (k, s) in sol.effective_strengths.iter().enumerate() {
        assert!((s.iter().sum::<f64>() - q[k]).abs() <= 1e-12);
    }
}

#[test]
fn resistance_and_mobility_are_inverse() {
    let rot = Mat3::rotation_about(v(0.2, 0.9, 0.1), 1.2);
    let cluster = Cluster::new(vec![ellipsoid(Vec3::zero(), Mat3::identity(), 9), ellipsoid(v(0.4, 2.0, 0.3), rot, 9)], 0.3);
    let motions = vec![RigidMotion::new(v(1.0, 0.0, 0.0), v(0.0, 0.2, 0.0)), RigidMotion::new(v(0.0, -1.0, 0.5), v(0.3, 0.0, 0.0))];
    let res = solve_resistance(&cluster, &motions, SolverConfig::default()).unwrap();
    let mob = solve_mobility(&cluster, &res.loads(), SolverConfig::default()).unwrap();
    for (a, b) in mob.motions().iter().zip(&motions) {
        assert!((a.v - b.v).norm() + (a.omega - b.omega).norm() <= 1e-3, "{a:?} vs {b:?}");
    }
}

#[test]
fn solve_rejects_mismatched_data() {
    let cluster = Cluster::new(vec![sphere(Vec3::zero(), 40)], 0.5);
    let ctx = BlockSystemContext::new(ProblemKind::Capacitance, &cluster, SolverConfig::default()).unwrap();
    assert!(ctx.solve(&BoundaryData::Charges(vec![1.0])).is_err());
    assert!(ctx.solve(&BoundaryData::Voltages(vec![1.0, 2.0])).is_err());
    assert!(ctx.solve(&BoundaryData::Voltages(vec![f64::NAN])).is_err());
    let zero = ctx.solve(&BoundaryData::Voltages(vec![0.0])).unwrap();
    assert_eq!(zero.report.iterations, 0);
    assert_eq!(zero.charges()[0], 0.0);
    let bad = SolverConfig { trunc_eps: 0.5, ..SolverConfig::default() };
    assert!(BlockSystemContext::new(ProblemKind::Capacitance, &cluster, bad).is_err());
}

#[test]
fn f32_solve_runs() {
    let p = Particle::<f32>::new(Shape::sphere(1.0), Vec3::zero(), Mat3::identity(), 80, 0.3, 1.2).unwrap();
    let cluster = Cluster::new(vec![p], 0.1);
    let cfg = SolverConfig::<f32>::default().with_tolerance(1e-5);
    let sol = solve_capacitance(&cluster, &[1.0f32], cfg).unwrap();
    let q = sol.charges()[0];
    assert!((q - 4.0 * std::f32::consts::PI).abs() <= 1e-3 * q, "{q}");
}

#[test]
fn elastance_monopole_potential() {
    use mfs_core::evaluator::EvaluatorConfig;
    use mfs_core::solvers::{evaluate_solution, FieldRequest, FieldValues};
    let cluster = Cluster::new(vec![sphere(Vec3::zero(), 1000)], 0.1);
    let sol = solve_elastance(&cluster, &[4.0 * PI], SolverConfig::default()).unwrap();
    assert!((sol.voltages()[0] - 1.0).abs() <= 1e-8);
    let pts = [v(2.0, 0.0, 0.0), v(0.0, -1.2, 1.6)];
    match evaluate_solution(&sol, &cluster, &pts, &FieldRequest::Potential, &EvaluatorConfig::default()).unwrap() {
        FieldValues::Potential(u) => {
            for x in u {
                assert!((x - 0.5).abs() <= 1e-8, "{x}");
            }
        }
        other => panic!("{other:?}"),
    }
    let inside = evaluate_solution(&sol, &cluster, &[v(0.1, 0.0, 0.0)], &FieldRequest::Potential, &EvaluatorConfig::default());
    assert!(matches!(inside, Err(mfs_core::Error::Domain { index: 0, particle: 0 })));
    assert!(evaluate_solution(&sol, &cluster, &pts, &FieldRequest::VelocityPressure, &EvaluatorConfig::default()).is_err());
}

#[test]
fn mobility_far_field_is_a_stokeslet() {
    use mfs_core::evaluator::EvaluatorConfig;
    use mfs_core::solvers::{evaluate_solution, FieldRequest, FieldValues};
    let cluster = Cluster::new(vec![ellipsoid(Vec3::zero(), Mat3::rotation_about(v(1.0, 1.0, 0.0), 0.5), 10)], 0.1);
    let f = v(0.3, -0.2, 1.0);
    let sol = solve_mobility(&cluster, &[NetLoad::new(f, v(0.1, 0.0, 0.0))], SolverConfig::default()).unwrap();
    let r = 100.0;
    let dir = v(0.6, 0.0, 0.8);
    let x = dir * r;
    let want = f + dir * dir.dot(f);
    match evaluate_solution(&sol, &cluster, &[x], &FieldRequest::VelocityPressure, &EvaluatorConfig::default()).unwrap() {
        FieldValues::VelocityPressure { velocity, pressure } => {
            let got = velocity[0] * (8.0 * PI * r);
            assert!((got - want).norm() <= 1e-2 * want.norm(), "{got:?}");
            // Stokeslet pressure f.x / (4 pi r^3)
            let p_want = f.dot(x) / (4.0 * PI * r.powi(3));
            assert!((pressure[0] - p_want).abs() <= 1e-2 * p_want.abs());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn surface_traction_integrates_to_net_force() {
    use mfs_core::evaluator::EvaluatorConfig;
    use mfs_core::solvers::{evaluate_solution, FieldRequest, FieldValues};
    let cluster = Cluster::new(vec![sphere(Vec3::zero(), 400)], 0.1);
    let motion = RigidMotion::new(v(0.0, 0.0, 1.0), Vec3::zero());
    let sol = solve_resistance(&cluster, &[motion], SolverConfig::default()).unwrap();
    let (pts, normals) = cluster.particles[0].test_points(4.0).unwrap();
    let vals = evaluate_solution(&sol, &cluster, &pts, &FieldRequest::Traction(normals), &EvaluatorConfig::default()).unwrap();
    let FieldValues::Traction(t) = vals else { panic!() };
    // uniform-weight quadrature on a quasi-uniform sphere lattice
    let w = 4.0 * PI / pts.len() as f64;
    let total = t.iter().fold(Vec3::zero(), |a, &b| a + b) * w;
    let drag = 6.0 * PI;
    assert!((total[2].abs() - drag).abs() <= 1e-2 * drag, "{total:?}");
}
