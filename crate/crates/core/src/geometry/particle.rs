use std::path::PathBuf;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::geometry::nodes::{ellipsoid_grid, ellipsoid_grid_count, fibonacci_sphere_nodes, read_unit_points, NodeSet};
use crate::geometry::shape::Shape;
use crate::scalar::{from_usize, lit, to_f64, Mat3, Quaternion, Real, Vec3};

/// Unit-sphere points read from a file, used as proxy nodes on spheres.
#[derive(Debug, PartialEq)]
pub struct PointSet {
    pub path: PathBuf,
    pub unit: Vec<[f64; 3]>,
}

impl PointSet {
    pub fn load(path: impl Into<PathBuf>) -> Result<Arc<Self>> {
        let path = path.into();
        let unit = read_unit_points(&path)?;
        Ok(Arc::new(Self { path, unit }))
    }
}

/// How the proxy nodes of a particle are generated.
#[derive(Clone, Debug, PartialEq)]
pub enum NodeRule {
    /// Fibonacci lattice with `n` proxy nodes (spheres).
    Fibonacci(usize),
    /// Proxy nodes from a unit-sphere point set (spheres).
    PointSet(Arc<PointSet>),
    /// Ellipsoid grid with `nv` rings.
    Grid(usize),
}

impl NodeRule {
    /// `N` for sphere rules, `Nv` for the ellipsoid grid.
    pub fn count(&self) -> usize {
        match self {
            NodeRule::Fibonacci(n) | NodeRule::Grid(n) => *n,
            NodeRule::PointSet(p) => p.unit.len(),
        }
    }
}

pub fn default_rectangularity<T: Real>(shape: &Shape<T>) -> T {
    if shape.is_sphere() {
        lit::<T>(1.2)
    } else {
        lit::<T>(1.3)
    }
}

/// A rigid particle: shape, pose and its collocation and proxy node sets.
///
/// Node sets are kept both in the body frame (relative to the center, before
/// rotation) and in world coordinates.
#[derive(Clone, Debug)]
pub struct Particle<T> {
    pub shape: Shape<T>,
    pub center: Vec3<T>,
    pub rotation: Mat3<T>,
    pub orientation: Quaternion<T>,
    pub rule: NodeRule,
    pub delta_sep: T,
    pub rectangularity: T,
    pub body_collocation: NodeSet<T>,
    pub body_proxy: NodeSet<T>,
    pub collocation: NodeSet<T>,
    pub proxy: NodeSet<T>,
    /// Outward unit normals at the world collocation nodes.
    pub collocation_normals: Vec<Vec3<T>>,
}

fn check_rotation<T: Real>(rotation: &Mat3<T>) -> Result<()> {
    let defect = to_f64(rotation.orthogonality_defect());
    let tol = if std::mem::size_of::<T>() == 4 { 1e-6 } else { 1e-12 };
    if !(defect <= tol) {
        return Err(invalid(format!("rotation is not orthogonal (defect {defect:.3e})")));
    }
    if rotation.determinant() < T::zero() {
        return Err(invalid("rotation matrix has negative determinant"));
    }
    Ok(())
}

/// Body-frame collocation and proxy nodes for a shape.
fn discretize<T: Real>(shape: &Shape<T>, rule: &NodeRule, delta_sep: T, rectangularity: T) -> Result<(NodeSet<T>, NodeSet<T>)> {
    shape.validate()?;
    if !(delta_sep > T::zero()) {
        return Err(invalid("delta_sep must be positive"));
    }
    if !(delta_sep < shape.max_delta_sep()) {
        return Err(invalid(format!(
            "delta_sep {delta_sep} too large for {shape:?}: the proxy surface would degenerate (limit {})",
            shape.max_delta_sep()
        )));
    }
    if !(rectangularity > T::one()) {
        return Err(invalid(format!("rectangularity must exceed 1, got {rectangularity}")));
    }
    let zero = Vec3::zero();
    match (shape, rule) {
        (Shape::Sphere { radius }, NodeRule::Fibonacci(_) | NodeRule::PointSet(_)) => {
            let proxy = match rule {
                NodeRule::Fibonacci(n) => fibonacci_sphere_nodes(*n, *radius - delta_sep, zero)?,
                NodeRule::PointSet(p) => {
                    let r = *radius - delta_sep;
                    let set = NodeSet::new(p.unit.iter().map(|&u| Vec3::from_f64(u) * r).collect());
                    set.validate()?;
                    set
                }
                NodeRule::Grid(_) => unreachable!(),
            };
            let n = proxy.len();
            let m = (to_f64(rectangularity) * n as f64).round() as usize;
            if m <= n {
                return Err(invalid("rectangularity too close to 1 for this node count"));
            }
            let colloc = fibonacci_sphere_nodes(m, *radius, zero)?;
            Ok((colloc, proxy))
        }
        (Shape::Ellipsoid { a, b, c }, NodeRule::Grid(nv)) => {
            let surface = ellipsoid_grid(*a, *b, *c, *nv)?;
            let proxy = NodeSet::new(surface.iter().map(|&p| p - shape.normal(p) * delta_sep).collect());
            for (i, p) in proxy.iter().enumerate() {
                if !(shape.level(*p) < T::one()) {
                    return Err(Error::DegenerateGeometry(format!("proxy node {i} is not inside the surface")));
                }
            }
            let n = proxy.len() as f64;
            let target = to_f64(rectangularity) * n;
            let mut nv_m = *nv + 1;
            while (ellipsoid_grid_count(nv_m) as f64) < target {
                nv_m += 1;
            }
            let colloc = ellipsoid_grid(*a, *b, *c, nv_m)?;
            Ok((colloc, proxy))
        }
        _ => Err(invalid(format!("node rule {rule:?} does not apply to {shape:?}"))),
    }
}

impl<T: Real> Particle<T> {
    /// Builds a particle with the default node rule for its shape: a Fibonacci
    /// lattice of `count` proxy nodes for spheres, an ellipsoid grid with
    /// `count` rings otherwise.
    pub fn new(shape: Shape<T>, center: Vec3<T>, rotation: Mat3<T>, count: usize, delta_sep: T, rectangularity: T) -> Result<Self> {
        let rule = if shape.is_sphere() { NodeRule::Fibonacci(count) } else { NodeRule::Grid(count) };
        Self::with_rule(shape, center, rotation, rule, delta_sep, rectangularity)
    }

    pub fn with_rule(shape: Shape<T>, center: Vec3<T>, rotation: Mat3<T>, rule: NodeRule, delta_sep: T, rectangularity: T) -> Result<Self> {
        check_rotation(&rotation)?;
        if !center.is_finite() {
            return Err(invalid("particle center must be finite"));
        }
        let (body_collocation, body_proxy) = discretize(&shape, &rule, delta_sep, rectangularity)?;
        let template = Self {
            shape,
            center: Vec3::zero(),
            rotation: Mat3::identity(),
            orientation: Quaternion::identity(),
            rule,
            delta_sep,
            rectangularity,
            collocation: body_collocation.clone(),
            proxy: body_proxy.clone(),
            collocation_normals: Vec::new(),
            body_collocation,
            body_proxy,
        };
        template.placed(center, rotation)
    }

    /// Copy of this particle with a new pose (reusing the body-frame nodes).
    pub fn placed(&self, center: Vec3<T>, rotation: Mat3<T>) -> Result<Self> {
        check_rotation(&rotation)?;
        let world = |set: &NodeSet<T>| NodeSet::new(set.iter().map(|&p| center + rotation.mul_vec(p)).collect());
        let normals = self.body_collocation.iter().map(|&p| rotation.mul_vec(self.shape.normal(p))).collect();
        Ok(Self {
            center,
            rotation,
            orientation: Quaternion::from_rotation(&rotation),
            collocation: world(&self.body_collocation),
            proxy: world(&self.body_proxy),
            collocation_normals: normals,
            ..self.clone()
        })
    }

    /// Number of proxy nodes `N`.
    pub fn n(&self) -> usize {
        self.proxy.len()
    }

    /// Number of collocation nodes `M`.
    pub fn m(&self) -> usize {
        self.collocation.len()
    }

    pub fn to_body(&self, x: Vec3<T>) -> Vec3<T> {
        self.rotation.tr_mul_vec(x - self.center)
    }

    pub fn to_world(&self, x: Vec3<T>) -> Vec3<T> {
        self.center + self.rotation.mul_vec(x)
    }

    /// Level-set value of a world point: below one inside.
    pub fn level(&self, x: Vec3<T>) -> T {
        self.shape.level(self.to_body(x))
    }

    /// True when `x` lies strictly inside the particle, with a relative margin.
    pub fn contains(&self, x: Vec3<T>, margin: T) -> bool {
        self.level(x) < T::one() - margin
    }

    /// Outward normal at the world surface point closest in parameter to `x`.
    pub fn normal_at(&self, x: Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(self.shape.normal(self.to_body(x)))
    }

    pub fn bounding_radius(&self) -> T {
        self.shape.bounding_radius()
    }

    /// Rigid velocity `v + omega x (x - center)` at world point `x`.
    pub fn rigid_velocity(&self, v: Vec3<T>, omega: Vec3<T>, x: Vec3<T>) -> Vec3<T> {
        v + omega.cross(x - self.center)
    }

    /// Dense surface test points (and outward normals) in world coordinates,
    /// at least `multiplier * M` of them, from the same generator family as
    /// the collocation nodes.
    pub fn test_points(&self, multiplier: T) -> Result<(Vec<Vec3<T>>, Vec<Vec3<T>>)> {
        let target = (to_f64(multiplier) * self.m() as f64).ceil() as usize;
        let body = match self.shape {
            Shape::Sphere { radius } => fibonacci_sphere_nodes(target.max(4), radius, Vec3::zero())?,
            Shape::Ellipsoid { a, b, c } => {
                let mut nv = 4;
                while ellipsoid_grid_count(nv) < target {
                    nv += 1;
                }
                ellipsoid_grid(a, b, c, nv)?
            }
        };
        let pts = body.iter().map(|&p| self.to_world(p)).collect();
        let normals = body.iter().map(|&p| self.rotation.mul_vec(self.shape.normal(p))).collect();
        Ok((pts, normals))
    }

    /// Scale of this particle's body frame relative to `other`, when the two
    /// are scaled copies (same shape up to scale, node rule, relative proxy
    /// offset and rectangularity) with matching body-frame nodes.
    pub fn scale_relative_to(&self, other: &Self) -> Option<T> {
        if self.rule != other.rule || self.rectangularity != other.rectangularity {
            return None;
        }
        let s = self.shape.bounding_radius() / other.shape.bounding_radius();
        let tol: T = lit::<T>(1e-12);
        let close = |x: T, y: T| (x - y).abs() <= tol * x.abs().max(y.abs());
        let e1 = self.shape.semiaxes();
        let e2 = other.shape.semiaxes() * s;
        if self.shape.is_sphere() != other.shape.is_sphere() || !(0..3).all(|i| close(e1[i], e2[i])) {
            return None;
        }
        if !close(self.delta_sep, other.delta_sep * s) || self.n() != other.n() || self.m() != other.m() {
            return None;
        }
        let scale_tol = tol * self.shape.bounding_radius() * lit::<T>(10.0);
        let same = |a: &NodeSet<T>, b: &NodeSet<T>| a.iter().zip(b.iter()).all(|(p, q)| (*p - *q * s).max_abs() <= scale_tol);
        if same(&self.body_proxy, &other.body_proxy) && same(&self.body_collocation, &other.body_collocation) {
            Some(s)
        } else {
            None
        }
    }

    /// Mean proxy spacing, a length scale for tolerances.
    pub fn mean_spacing(&self) -> T {
        let area_scale = self.shape.equivalent_radius();
        area_scale * (lit::<T>(4.0) * T::PI() / from_usize::<T>(self.n())).sqrt()
    }
}

/// Rotates `p` about its own center by `rotation`, then translates it by `shift`.
pub fn transform_particle<T: Real>(p: &Particle<T>, shift: Vec3<T>, rotation: &Mat3<T>) -> Result<Particle<T>> {
    check_rotation(rotation)?;
    p.placed(p.center + shift, rotation.mul_mat(&p.rotation))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(n: usize, delta: f64) -> Particle<f64> {
        Particle::new(Shape::sphere(1.0), Vec3::zero(), Mat3::identity(), n, delta, 1.2).unwrap()
    }

    #[test]
    fn sphere_proxy_radius() {
        let p = sphere(686, 0.41);
        for q in p.proxy.iter() {
            assert!((q.norm() - 0.59).abs() < 1e-14);
        }
        for q in p.collocation.iter() {
            assert!((q.norm() - 1.0).abs() < 1e-14);
        }
        assert!(p.m() > p.n());
    }

    #[test]
    fn sphere_rectangularity() {
        let p = sphere(969, 0.3);
        let m = p.m() as f64;
        assert!((m - 1163.0).abs() <= 0.05 * 1163.0, "M = {m}");
    }

    #[test]
    fn ellipsoid_collocation_count() {
        let p = Particle::<f64>::new(Shape::ellipsoid(0.4, 0.6, 1.0), Vec3::zero(), Mat3::identity(), 40, 0.125, 1.3).unwrap();
        let m = p.m() as f64;
        assert!((m - 1124.0).abs() <= 0.1 * 1124.0, "M = {m}");
        assert!((p.n() as f64 - 864.0).abs() <= 0.1 * 864.0);
        for q in p.proxy.iter() {
            assert!(p.shape.level(*q) < 1.0);
        }
        for q in p.collocation.iter() {
            assert!((p.level(*q) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipsoid_proxy_offset_is_normal_distance() {
        let shape = Shape::<f64>::ellipsoid(0.5, 0.5, 1.0);
        let p = Particle::new(shape, Vec3::zero(), Mat3::identity(), 20, 0.1, 1.3).unwrap();
        let surface = ellipsoid_grid(0.5, 0.5, 1.0, 20).unwrap();
        for (s, q) in surface.iter().zip(p.proxy.iter()) {
            assert!(((*s - *q).norm() - 0.1).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_degenerate_offsets() {
        assert!(Particle::new(Shape::sphere(1.0), Vec3::zero(), Mat3::identity(), 100, 1.0, 1.2).is_err());
        assert!(Particle::new(Shape::sphere(1.0), Vec3::zero(), Mat3::identity(), 100, 0.0, 1.2).is_err());
        assert!(Particle::new(Shape::ellipsoid(0.4, 0.6, 1.0), Vec3::zero(), Mat3::identity(), 20, 0.2, 1.3).is_err());
        assert!(Particle::new(Shape::sphere(1.0), Vec3::zero(), Mat3::identity(), 100, 0.3, 1.0).is_err());
    }

    #[test]
    fn rejects_non_orthogonal_rotation() {
        let mut r = Mat3::<f64>::identity();
        r.0[0][1] = 1e-6;
        assert!(Particle::new(Shape::sphere(1.0), Vec3::zero(), r, 100, 0.3, 1.2).is_err());
        let p = sphere(50, 0.3);
        assert!(transform_particle(&p, Vec3::zero(), &r).is_err());
    }

    #[test]
    fn identity_transform_is_exact() {
        let p = sphere(80, 0.3);
        let q = transform_particle(&p, Vec3::zero(), &Mat3::identity()).unwrap();
        assert_eq!(p.collocation, q.collocation);
        assert_eq!(p.proxy, q.proxy);
    }

    #[test]
    fn quarter_turn() {
        let shape = Shape::sphere(1.0);
        let p = Particle::new(shape, Vec3::zero(), Mat3::identity(), 4, 0.5, 1.5).unwrap();
        let rz = Mat3::rotation_about(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2);
        let q = transform_particle(&p, Vec3::zero(), &rz).unwrap();
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = q.to_world(p.to_body(x));
        assert!((y - Vec3::new(0.0, 1.0, 0.0)).max_abs() < 1e-15);
        for (a, b) in p.collocation.iter().zip(q.collocation.iter()) {
            let expect = Vec3::new(-a[1], a[0], a[2]);
            assert!((expect - *b).max_abs() < 1e-15);
        }
    }

    #[test]
    fn scaled_copies_detected() {
        let a = sphere(100, 0.3);
        let b = Particle::new(Shape::sphere(2.0), Vec3::new(5.0, 0.0, 0.0), Mat3::identity(), 100, 0.6, 1.2).unwrap();
        assert!((b.scale_relative_to(&a).unwrap() - 2.0).abs() < 1e-15);
        let c = Particle::new(Shape::sphere(2.0), Vec3::zero(), Mat3::identity(), 100, 0.5, 1.2).unwrap();
        assert!(c.scale_relative_to(&a).is_none());
    }

    #[test]
    fn test_points_count() {
        let p = sphere(100, 0.3);
        let (pts, normals) = p.test_points(2.0).unwrap();
        assert!(pts.len() >= 2 * p.m());
        for (x, n) in pts.iter().zip(&normals) {
            assert!((x.norm() - 1.0).abs() < 1e-14);
            assert!((*n - *x).max_abs() < 1e-14);
        }
    }
}
