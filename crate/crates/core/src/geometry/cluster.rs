//! Collections of particles and random cluster growth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::geometry::distance::{posed_distance, PosedShape};
use crate::geometry::particle::{NodeRule, Particle};
use crate::geometry::shape::Shape;
use crate::scalar::{lit, to_f64, Mat3, Quaternion, Real, Vec3};

#[derive(Clone, Debug)]
pub struct Cluster<T> {
    pub particles: Vec<Particle<T>>,
    pub min_separation: T,
}

/// Orientation assigned to grown particles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrientationPolicy {
    /// All particles keep the template orientation.
    Fixed,
    /// Uniformly random rotations.
    Random,
}

/// How grown clusters are placed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthMode {
    /// Bisection with exact shape distances.
    Exact,
    /// Grow a cluster of bounding spheres with separation `delta`, then
    /// inscribe a randomly oriented copy of the shape in each sphere.
    BoundingSpheres,
}

impl<T: Real> Cluster<T> {
    pub fn new(particles: Vec<Particle<T>>, min_separation: T) -> Self {
        Self { particles, min_separation }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Minimum surface distance over all pairs, with the indices of that pair.
    /// Errors on overlap. `None` for fewer than two particles.
    pub fn min_pair_distance(&self) -> Result<Option<(T, usize, usize)>> {
        let posed: Vec<PosedShape<T>> = self.particles.iter().map(PosedShape::of).collect();
        let mut best: Option<(T, usize, usize)> = None;
        for i in 0..posed.len() {
            for j in i + 1..posed.len() {
                let gap_bound = (posed[i].center - posed[j].center).norm()
                    - posed[i].shape.bounding_radius()
                    - posed[j].shape.bounding_radius();
                if let Some((b, _, _)) = best {
                    if gap_bound >= b {
                        continue;
                    }
                }
                let d = posed_distance(&posed[i], &posed[j])?;
                if best.is_none_or(|(b, _, _)| d < b) {
                    best = Some((d, i, j));
                }
            }
        }
        Ok(best)
    }

    /// Checks that every pair is separated by at least `min_separation - 1e-9`.
    pub fn validate(&self) -> Result<()> {
        if let Some((d, i, j)) = self.min_pair_distance()? {
            if d < self.min_separation - lit::<T>(1e-9) {
                return Err(Error::Validation(format!(
                    "particles {i} and {j} are {d} apart, below the minimum separation {}",
                    self.min_separation
                )));
            }
        }
        Ok(())
    }

    /// Translates every particle by `shift`.
    pub fn translated(&self, shift: Vec3<T>) -> Result<Self> {
        let particles = self
            .particles
            .iter()
            .map(|p| p.placed(p.center + shift, p.rotation))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { particles, min_separation: self.min_separation })
    }

    /// Same poses, rediscretized with the proxy offset scaled by `delta_scale`
    /// and, when given, a new node rule.
    pub fn rediscretized(&self, delta_scale: T, rule: Option<NodeRule>) -> Result<Self> {
        let mut done: Vec<Particle<T>> = Vec::new();
        let mut particles = Vec::with_capacity(self.len());
        for p in &self.particles {
            let rule = rule.clone().unwrap_or_else(|| p.rule.clone());
            let delta = p.delta_sep * delta_scale;
            let known = done
                .iter()
                .find(|q| q.shape == p.shape && q.rule == rule && q.delta_sep == delta && q.rectangularity == p.rectangularity);
            let fresh = match known {
                Some(q) => q.placed(p.center, p.rotation)?,
                None => {
                    let q = Particle::with_rule(p.shape, p.center, p.rotation, rule, delta, p.rectangularity)?;
                    done.push(q.clone());
                    q
                }
            };
            particles.push(fresh);
        }
        Ok(Self { particles, min_separation: self.min_separation })
    }

    pub fn total_proxy(&self) -> usize {
        self.particles.iter().map(|p| p.n()).sum()
    }

    pub fn total_collocation(&self) -> usize {
        self.particles.iter().map(|p| p.m()).sum()
    }
}

const MAX_BISECTION: usize = 200;

fn random_direction<T: Real>(rng: &mut ChaCha8Rng) -> Vec3<T> {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let rho = (1.0 - z * z).max(0.0).sqrt();
    Vec3::from_f64([rho * phi.cos(), rho * phi.sin(), z])
}

fn random_rotation<T: Real>(rng: &mut ChaCha8Rng) -> Mat3<T> {
    let u: [f64; 3] = [rng.random(), rng.random(), rng.random()];
    Quaternion::from_uniform(lit::<T>(u[0]), lit::<T>(u[1]), lit::<T>(u[2])).to_rotation()
}

/// Signed clearance of a candidate body from the placed set: the minimum
/// surface distance, or minus the penetration when overlapping.
fn clearance<T: Real>(placed: &[PosedShape<T>], cand: &PosedShape<T>, cutoff: T) -> T {
    let mut best = T::infinity();
    for p in placed {
        let bound = (p.center - cand.center).norm() - p.shape.bounding_radius() - cand.shape.bounding_radius();
        if bound >= best || bound > cutoff {
            continue;
        }
        match posed_distance(p, cand) {
            Ok(d) => best = best.min(d),
            Err(Error::Overlap { penetration }) => return -lit::<T>(penetration.max(1e-300)),
            Err(_) => return -T::one(),
        }
    }
    best
}

/// Grows a cluster of `count` bodies of a given shape. Every body after the
/// first (at the origin) moves in along a random direction until its
/// distance to the set is `delta`.
fn grow_posed<T: Real>(count: usize, delta: T, shape: Shape<T>, random_orientation: bool, rng: &mut ChaCha8Rng) -> Result<Vec<PosedShape<T>>> {
    let tol: T = lit::<T>(1e-8);
    let mut placed = vec![PosedShape { shape, center: Vec3::zero(), rotation: orientation(random_orientation, rng) }];
    let mut extent = shape.bounding_radius();
    for k in 1..count {
        let dir = random_direction::<T>(rng);
        let rotation = orientation(random_orientation, rng);
        let at = |r: T| PosedShape { shape, center: dir * r, rotation };
        let mut lo = T::zero();
        let mut hi = extent + shape.bounding_radius() + delta + T::one();
        let cutoff = delta + T::one();
        let mut placed_ok = false;
        for _ in 0..MAX_BISECTION {
            let mid = (lo + hi) * lit::<T>(0.5);
            let c = clearance(&placed, &at(mid), cutoff);
            if c >= delta {
                hi = mid;
                if c - delta <= tol {
                    placed_ok = true;
                    break;
                }
            } else {
                lo = mid;
            }
            if hi - lo <= T::epsilon() * hi * lit::<T>(4.0) {
                let c = clearance(&placed, &at(hi), cutoff);
                placed_ok = c >= delta && c - delta <= tol;
                break;
            }
        }
        if !placed_ok {
            return Err(Error::Placement(format!("bisection for particle {k} did not reach the target separation")));
        }
        let body = at(hi);
        extent = extent.max(body.center.norm() + shape.bounding_radius());
        placed.push(body);
    }
    Ok(placed)
}

fn orientation<T: Real>(random: bool, rng: &mut ChaCha8Rng) -> Mat3<T> {
    if random {
        random_rotation(rng)
    } else {
        Mat3::identity()
    }
}

/// Grows a cluster of `count` copies of `template` with minimum separation `delta`.
///
/// The first particle sits at the origin; each further particle is placed
/// along a uniformly random direction at the radius where its distance to
/// the existing particles equals `delta` (to 1e-8), found by bisection.
pub fn grow_cluster<T: Real>(
    count: usize,
    delta: T,
    template: &Particle<T>,
    policy: OrientationPolicy,
    mode: GrowthMode,
    seed: u64,
) -> Result<Cluster<T>> {
    if count == 0 {
        return Err(invalid("cluster needs at least one particle"));
    }
    if !(delta > T::zero()) || !delta.is_finite() {
        return Err(invalid(format!("minimum separation must be positive, got {delta}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random = policy == OrientationPolicy::Random;
    let bodies = match mode {
        GrowthMode::Exact => grow_posed(count, delta, template.shape, random, &mut rng)?,
        GrowthMode::BoundingSpheres => {
            let ball = Shape::sphere(template.shape.bounding_radius());
            let mut bodies = grow_posed(count, delta, ball, false, &mut rng)?;
            for b in &mut bodies {
                b.shape = template.shape;
                b.rotation = orientation(random, &mut rng);
            }
            bodies
        }
    };
    let particles = bodies
        .iter()
        .map(|b| template.placed(b.center, b.rotation.mul_mat(&template.rotation)))
        .collect::<Result<Vec<_>>>()?;
    let cluster = Cluster::new(particles, delta);
    cluster.validate()?;
    Ok(cluster)
}

/// Distance summary used in diagnostics.
pub fn describe_separation<T: Real>(c: &Cluster<T>) -> String {
    match c.min_pair_distance() {
        Ok(Some((d, i, j))) => format!("min distance {:.6e} between {i} and {j}", to_f64(d)),
        Ok(None) => "single particle".to_string(),
        Err(e) => e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_sphere() -> Particle<f64> {
        Particle::new(Shape::sphere(1.0), Vec3::zero(), Mat3::identity(), 20, 0.3, 1.2).unwrap()
    }

    fn pairwise_sphere_distances(c: &Cluster<f64>) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                out.push((c.particles[i].center - c.particles[j].center).norm() - 2.0);
            }
        }
        out
    }

    #[test]
    fn single_particle_at_origin() {
        let c = grow_cluster(1, 0.1, &unit_sphere(), OrientationPolicy::Fixed, GrowthMode::Exact, 3).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.particles[0].center, Vec3::zero());
    }

    #[test]
    fn ten_spheres_touch_at_delta() {
        for seed in [0, 1, 7, 42] {
            let c = grow_cluster(10, 0.1, &unit_sphere(), OrientationPolicy::Fixed, GrowthMode::Exact, seed).unwrap();
            let d = pairwise_sphere_distances(&c);
            let min = d.iter().cloned().fold(f64::MAX, f64::min);
            assert!((min - 0.1).abs() <= 1e-6, "seed {seed}: min {min}");
            assert!(d.iter().all(|&x| x >= 0.1 - 1e-6));
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = grow_cluster(5, 0.5, &unit_sphere(), OrientationPolicy::Random, GrowthMode::Exact, 11).unwrap();
        let b = grow_cluster(5, 0.5, &unit_sphere(), OrientationPolicy::Random, GrowthMode::Exact, 11).unwrap();
        for (p, q) in a.particles.iter().zip(&b.particles) {
            assert_eq!(p.center, q.center);
            assert_eq!(p.rotation, q.rotation);
        }
        let c = grow_cluster(5, 0.5, &unit_sphere(), OrientationPolicy::Random, GrowthMode::Exact, 12).unwrap();
        assert_ne!(a.particles[1].center, c.particles[1].center);
    }

    #[test]
    fn ellipsoid_cluster() {
        let t = Particle::new(Shape::ellipsoid(0.4, 0.6, 1.0), Vec3::zero(), Mat3::identity(), 8, 0.1, 1.3).unwrap();
        let c = grow_cluster(8, 0.5, &t, OrientationPolicy::Random, GrowthMode::Exact, 5).unwrap();
        let (d, _, _): (f64, _, _) = c.min_pair_distance().unwrap().unwrap();
        assert!((d - 0.5).abs() < 1e-6, "min distance {d}");
        let bs = grow_cluster(8, 0.5, &t, OrientationPolicy::Random, GrowthMode::BoundingSpheres, 5).unwrap();
        let (d, _, _) = bs.min_pair_distance().unwrap().unwrap();
        assert!(d >= 0.5 - 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(grow_cluster(0, 0.1, &unit_sphere(), OrientationPolicy::Fixed, GrowthMode::Exact, 0).is_err());
        assert!(grow_cluster(3, 0.0, &unit_sphere(), OrientationPolicy::Fixed, GrowthMode::Exact, 0).is_err());
    }

    #[test]
    fn validate_catches_close_pair() {
        let s = unit_sphere();
        let c = Cluster::new(vec![s.clone(), s.placed(Vec3::new(2.05, 0.0, 0.0), Mat3::identity()).unwrap()], 0.1);
        assert!(c.validate().is_err());
    }
}
