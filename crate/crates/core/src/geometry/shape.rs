use crate::error::{invalid, Result};
use crate::scalar::{lit, Real, Vec3};

/// Particle shape in its body frame, centered at the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape<T> {
    Sphere { radius: T },
    /// Semiaxes along the body x, y and z axes.
    Ellipsoid { a: T, b: T, c: T },
}

impl<T: Real> Shape<T> {
    pub fn sphere(radius: T) -> Self {
        Shape::Sphere { radius }
    }

    pub fn ellipsoid(a: T, b: T, c: T) -> Self {
        Shape::Ellipsoid { a, b, c }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Sphere { radius } => radius > T::zero() && radius.is_finite(),
            Shape::Ellipsoid { a, b, c } => [a, b, c].iter().all(|&x| x > T::zero() && x.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("shape lengths must be positive and finite: {self:?}")))
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self, Shape::Sphere { .. })
    }

    /// Semiaxes; all equal for a sphere.
    pub fn semiaxes(&self) -> Vec3<T> {
        match *self {
            Shape::Sphere { radius } => Vec3::new(radius, radius, radius),
            Shape::Ellipsoid { a, b, c } => Vec3::new(a, b, c),
        }
    }

    pub fn min_semiaxis(&self) -> T {
        let e = self.semiaxes();
        e[0].min(e[1]).min(e[2])
    }

    /// Radius of the smallest centered ball containing the shape.
    pub fn bounding_radius(&self) -> T {
        let e = self.semiaxes();
        e[0].max(e[1]).max(e[2])
    }

    /// Smallest principal radius of curvature over the surface.
    pub fn min_curvature_radius(&self) -> T {
        let e = self.semiaxes();
        let mut best = T::infinity();
        for i in 0..3 {
            for j in 0..3 {
                if i != j && e[j] >= e[i] {
                    best = best.min(e[i] * e[i] / e[j]);
                }
            }
        }
        best
    }

    /// Uniformly scaled copy.
    pub fn scaled(&self, s: T) -> Self {
        match *self {
            Shape::Sphere { radius } => Shape::Sphere { radius: radius * s },
            Shape::Ellipsoid { a, b, c } => Shape::Ellipsoid { a: a * s, b: b * s, c: c * s },
        }
    }

    /// `sum (x_i / e_i)^2`: below one inside, one on the surface.
    pub fn level(&self, x: Vec3<T>) -> T {
        let e = self.semiaxes();
        (x[0] / e[0]).powi(2) + (x[1] / e[1]).powi(2) + (x[2] / e[2]).powi(2)
    }

    /// Outward unit normal at a body-frame surface point.
    pub fn normal(&self, x: Vec3<T>) -> Vec3<T> {
        let e = self.semiaxes();
        Vec3::new(x[0] / (e[0] * e[0]), x[1] / (e[1] * e[1]), x[2] / (e[2] * e[2])).normalized()
    }

    /// Largest proxy offset accepted for this shape.
    pub fn max_delta_sep(&self) -> T {
        match *self {
            Shape::Sphere { radius } => radius,
            Shape::Ellipsoid { .. } => self.min_curvature_radius(),
        }
    }

    /// Volume-equivalent sphere radius.
    pub fn equivalent_radius(&self) -> T {
        let e = self.semiaxes();
        (e[0] * e[1] * e[2]).powf(lit::<T>(1.0 / 3.0))
    }
}
