//! Node generators on spheres and ellipsoids, and point-set file loading.

use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::scalar::{Real, Vec3};

/// An ordered set of points in space.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSet<T> {
    pub points: Vec<Vec3<T>>,
}

impl<T: Real> NodeSet<T> {
    pub fn new(points: Vec<Vec3<T>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec3<T>> {
        self.points.iter()
    }

    pub fn centroid(&self) -> Vec3<T> {
        let mut sum = Vec3::zero();
        for p in &self.points {
            sum += *p;
        }
        sum * (T::one() / crate::scalar::from_usize::<T>(self.len()))
    }

    /// Checks finiteness and pairwise distinctness.
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::Validation(format!("node {i} has non-finite coordinates")));
            }
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        let key = |i: usize| self.points[i].0.map(to_bits);
        order.sort_by_key(|&i| key(i));
        for w in order.windows(2) {
            if key(w[0]) == key(w[1]) {
                return Err(Error::Validation(format!("nodes {} and {} coincide", w[0], w[1])));
            }
        }
        Ok(())
    }

    /// For every node, the distance to its nearest neighbour (brute force).
    pub fn nearest_neighbor_distances(&self) -> Vec<T> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut best = T::infinity();
                for j in 0..n {
                    if i != j {
                        best = best.min(self.points[i].distance(self.points[j]));
                    }
                }
                best
            })
            .collect()
    }

    /// Ratio of the largest to the smallest nearest-neighbour distance.
    pub fn spacing_ratio(&self) -> T {
        let d = self.nearest_neighbor_distances();
        let max = d.iter().fold(T::zero(), |a, &b| a.max(b));
        let min = d.iter().fold(T::infinity(), |a, &b| a.min(b));
        max / min
    }
}

fn to_bits<T: Real>(x: T) -> u64 {
    // -0.0 and 0.0 describe the same coordinate.
    let v = crate::scalar::to_f64(x) + 0.0;
    v.to_bits()
}

/// Unit-sphere Fibonacci spiral lattice with `n` points.
fn fibonacci_unit(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            [rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// `n` quasi-uniform points on a sphere from the Fibonacci spiral lattice.
pub fn fibonacci_sphere_nodes<T: Real>(n: usize, radius: T, center: Vec3<T>) -> Result<NodeSet<T>> {
    if n < 4 {
        return Err(invalid(format!("Fibonacci lattice needs at least 4 points, got {n}")));
    }
    if !(radius > T::zero()) {
        return Err(invalid("sphere radius must be positive"));
    }
    Ok(scale_unit(&fibonacci_unit(n), radius, center))
}

fn scale_unit<T: Real>(unit: &[[f64; 3]], radius: T, center: Vec3<T>) -> NodeSet<T> {
    NodeSet::new(unit.iter().map(|&u| Vec3::from_f64(u) * radius + center).collect())
}

/// Reads unit-sphere points (three numbers per line, `#` starts a comment).
pub fn read_unit_points(path: &Path) -> Result<Vec<[f64; 3]>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { path: path.to_path_buf(), line: idx + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(format!("expected 3 coordinates, found {}", fields.len())));
        }
        let mut p = [0.0; 3];
        for (k, f) in fields.iter().enumerate() {
            p[k] = f.parse::<f64>().map_err(|e| parse_err(format!("bad coordinate {f:?}: {e}")))?;
            if !p[k].is_finite() {
                return Err(parse_err(format!("non-finite coordinate {f:?}")));
            }
        }
        let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::Validation(format!(
                "{}:{}: point has norm {norm}, not on the unit sphere",
                path.display(),
                idx + 1
            )));
        }
        out.push(p);
    }
    if out.is_empty() {
        return Err(Error::Validation(format!("{}: no points", path.display())));
    }
    Ok(out)
}

/// Loads a unit-sphere point set and maps it to the sphere of given radius and center.
pub fn load_point_set<T: Real>(path: &Path, radius: T, center: Vec3<T>) -> Result<NodeSet<T>> {
    let unit = read_unit_points(path)?;
    let set = scale_unit(&unit, radius, center);
    set.validate()?;
    Ok(set)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Value and derivative of the Legendre polynomial `P_n` at `z`.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Number of points per latitude ring of the ellipsoid grid at parameter `t`.
fn ring_count(nv: usize, t: f64) -> usize {
    let full = 0.65 * nv as f64 + 7.0;
    ((full * (1.0 - t * t).sqrt()).ceil() as usize).max(3)
}

/// Unit-parameter ellipsoid grid: `(sqrt(1-t^2) cos s, sqrt(1-t^2) sin s, t)` samples.
fn ellipsoid_unit_grid(nv: usize) -> Vec<[f64; 3]> {
    let (ts, _) = gauss_legendre(nv);
    let mut out = Vec::new();
    for (i, &t) in ts.iter().enumerate() {
        let m = ring_count(nv, t);
        let rho = (1.0 - t * t).sqrt();
        let offset = 0.5 * (i % 2) as f64;
        for j in 0..m {
            let s = 2.0 * std::f64::consts::PI * (j as f64 + offset) / m as f64;
            out.push([rho * s.cos(), rho * s.sin(), t]);
        }
    }
    out
}

/// Number of points [`ellipsoid_grid`] returns for `nv` rings.
pub fn ellipsoid_grid_count(nv: usize) -> usize {
    let (ts, _) = gauss_legendre(nv);
    ts.iter().map(|&t| ring_count(nv, t)).sum()
}

/// Quasi-uniform grid on the ellipsoid with semiaxes `a`, `b`, `c`, using `nv`
/// Gauss–Legendre rings in the `c` direction.
pub fn ellipsoid_grid<T: Real>(a: T, b: T, c: T, nv: usize) -> Result<NodeSet<T>> {
    if nv < 4 {
        return Err(invalid(format!("ellipsoid grid needs Nv >= 4, got {nv}")));
    }
    if !(a > T::zero() && b > T::zero() && c > T::zero()) {
        return Err(invalid("ellipsoid semiaxes must be positive"));
    }
    let axes = Vec3::new(a, b, c);
    Ok(NodeSet::new(ellipsoid_unit_grid(nv).into_iter().map(|u| Vec3::from_f64(u).scale_by(axes)).collect()))
}

/// Nominal grid size `17 + 3.9 Nv + 0.44 Nv^2`.
pub fn nominal_ellipsoid_count(nv: usize) -> f64 {
    let v = nv as f64;
    17.0 + 3.9 * v + 0.44 * v * v
}
