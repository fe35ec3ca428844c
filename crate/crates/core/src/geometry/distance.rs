//! Surface-to-surface distances between particles.

use crate::error::{Error, Result};
use crate::geometry::particle::Particle;
use crate::geometry::shape::Shape;
use crate::scalar::{lit, to_f64, Mat3, Real, Vec3};

/// Shape with a pose; the geometric part of a particle.
#[derive(Clone, Copy, Debug)]
pub struct PosedShape<T> {
    pub shape: Shape<T>,
    pub center: Vec3<T>,
    pub rotation: Mat3<T>,
}

impl<T: Real> PosedShape<T> {
    pub fn of(p: &Particle<T>) -> Self {
        Self { shape: p.shape, center: p.center, rotation: p.rotation }
    }

    fn to_body(&self, x: Vec3<T>) -> Vec3<T> {
        self.rotation.tr_mul_vec(x - self.center)
    }

    fn to_world(&self, x: Vec3<T>) -> Vec3<T> {
        self.center + self.rotation.mul_vec(x)
    }

    pub fn level(&self, x: Vec3<T>) -> T {
        self.shape.level(self.to_body(x))
    }

    /// Closest point of the solid body to `x` (`x` itself when inside).
    pub fn project(&self, x: Vec3<T>) -> Vec3<T> {
        let y = self.to_body(x);
        if self.shape.level(y) <= T::one() {
            return x;
        }
        self.to_world(project_exterior(self.shape.semiaxes(), y))
    }
}

/// Closest point on the ellipsoid with semiaxes `e` to a body-frame point `y`
/// outside it.
///
/// The closest point is `x_i = e_i^2 y_i / (e_i^2 + lambda)` where `lambda > 0`
/// solves `sum (e_i y_i / (e_i^2 + lambda))^2 = 1`. The root is bracketed in
/// `[0, e_max |y|]` and found by Newton's method safeguarded with bisection.
pub fn project_exterior<T: Real>(e: Vec3<T>, y: Vec3<T>) -> Vec3<T> {
    let ey = e.scale_by(y);
    let e2 = e.scale_by(e);
    let f = |lam: T| {
        let mut val = -T::one();
        let mut der = T::zero();
        for i in 0..3 {
            let q = ey[i] / (e2[i] + lam);
            val = val + q * q;
            der = der - lit::<T>(2.0) * q * q / (e2[i] + lam);
        }
        (val, der)
    };
    let mut lo = T::zero();
    let mut hi = e.max_abs() * y.norm();
    let mut lam = lo;
    for _ in 0..200 {
        let (val, der) = f(lam);
        if val > T::zero() {
            lo = lam;
        } else {
            hi = lam;
        }
        if val == T::zero() || hi - lo <= T::epsilon() * hi {
            break;
        }
        let mut next = lam - val / der;
        if !(next > lo && next < hi) {
            next = (lo + hi) * lit::<T>(0.5);
        }
        if (next - lam).abs() <= T::epsilon() * lit::<T>(4.0) * next.abs() {
            lam = next;
            break;
        }
        lam = next;
    }
    Vec3::new(e2[0] * y[0] / (e2[0] + lam), e2[1] * y[1] / (e2[1] + lam), e2[2] * y[2] / (e2[2] + lam))
}

/// Distance from a body-frame point inside the ellipsoid to its surface.
pub fn interior_depth<T: Real>(e: Vec3<T>, y: Vec3<T>) -> T {
    // Here lambda lies in (-e_min^2, 0) and the same secular function is
    // increasing as lambda decreases; bisection is sufficient.
    let e2 = e.scale_by(e);
    let emin2 = e2[0].min(e2[1]).min(e2[2]);
    let f = |lam: T| {
        let mut val = -T::one();
        for i in 0..3 {
            let q = e[i] * y[i] / (e2[i] + lam);
            val = val + q * q;
        }
        val
    };
    let mut lo = -emin2;
    let mut hi = T::zero();
    for _ in 0..200 {
        let mid = (lo + hi) * lit::<T>(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = hi;
    let x = Vec3::new(e2[0] * y[0] / (e2[0] + lam), e2[1] * y[1] / (e2[1] + lam), e2[2] * y[2] / (e2[2] + lam));
    // When y has no component along the shortest axis the root can sit at the
    // pole; the plain semiaxis bound then applies.
    let d = (x - y).norm();
    d.min(e.x().min(e.y()).min(e.z()))
}

/// Result of an alternating projection between two convex bodies.
#[derive(Clone, Copy, Debug)]
pub struct ClosestPair<T> {
    pub distance: T,
    pub on_first: Vec3<T>,
    pub on_second: Vec3<T>,
    pub sweeps: usize,
    pub converged: bool,
}

const MAX_SWEEPS: usize = 200;

/// Minimum distance between two posed shapes, or an overlap error.
pub fn posed_distance<T: Real>(a: &PosedShape<T>, b: &PosedShape<T>) -> Result<T> {
    closest_pair(a, b).map(|c| c.distance)
}

pub fn closest_pair<T: Real>(a: &PosedShape<T>, b: &PosedShape<T>) -> Result<ClosestPair<T>> {
    if let (Shape::Sphere { radius: r1 }, Shape::Sphere { radius: r2 }) = (a.shape, b.shape) {
        let axis = b.center - a.center;
        let dist = axis.norm();
        let gap = dist - r1 - r2;
        if gap < T::zero() {
            return Err(Error::Overlap { penetration: to_f64(-gap) });
        }
        let u = if dist > T::zero() { axis * (T::one() / dist) } else { Vec3::unit(0) };
        return Ok(ClosestPair {
            distance: gap,
            on_first: a.center + u * r1,
            on_second: b.center - u * r2,
            sweeps: 0,
            converged: true,
        });
    }
    overlap_check(a, b.center)?;
    overlap_check(b, a.center)?;
    let tol: T = lit::<T>(1e-10);
    let mut on_first = a.project(b.center);
    let mut on_second = b.project(on_first);
    let mut converged = false;
    let mut sweeps = 0;
    for sweep in 1..=MAX_SWEEPS {
        sweeps = sweep;
        overlap_check(a, on_second)?;
        let next_first = a.project(on_second);
        overlap_check(b, next_first)?;
        let next_second = b.project(next_first);
        let moved = (next_first - on_first).norm().max((next_second - on_second).norm());
        on_first = next_first;
        on_second = next_second;
        if moved < tol {
            converged = true;
            break;
        }
    }
    Ok(ClosestPair { distance: (on_first - on_second).norm(), on_first, on_second, sweeps, converged })
}

/// Errors if `x`, a point of the other body, lies inside `body`.
fn overlap_check<T: Real>(body: &PosedShape<T>, x: Vec3<T>) -> Result<()> {
    let y = body.to_body(x);
    if body.shape.level(y) < T::one() {
        let depth = interior_depth(body.shape.semiaxes(), y);
        return Err(Error::Overlap { penetration: to_f64(depth) });
    }
    Ok(())
}

/// Minimum surface-to-surface distance between two particles.
pub fn pair_distance<T: Real>(p1: &Particle<T>, p2: &Particle<T>) -> Result<T> {
    posed_distance(&PosedShape::of(p1), &PosedShape::of(p2))
}
