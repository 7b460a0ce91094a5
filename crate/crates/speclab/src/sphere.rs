//! Points, grids, caps and rotations on the unit sphere S².

use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::{Rotation3, Unit, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

pub type Point = [f64; 3];
pub type Rotation = Rotation3<f64>;

pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: &Point, b: &Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: &Point) -> Point {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

pub fn neg(a: &Point) -> Point {
    [-a[0], -a[1], -a[2]]
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    norm(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

/// Geodesic distance between unit vectors.
pub fn angle(a: &Point, b: &Point) -> f64 {
    norm(&cross(a, b)).atan2(dot(a, b))
}

/// Angular radius of the cap `S² ∩ B(c, ρ)` for a Euclidean radius `ρ`.
pub fn chord_to_angle(rho: f64) -> f64 {
    2.0 * (rho / 2.0).min(1.0).asin()
}

pub fn angle_to_chord(theta: f64) -> f64 {
    2.0 * (theta / 2.0).sin()
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Point {
    loop {
        let v: Point = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let n = norm(&v);
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Orthonormal pair spanning the tangent plane at `x`.
pub fn tangent_basis(x: &Point) -> (Point, Point) {
    let helper = if x[0].abs() < 0.6 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let t1 = normalize(&cross(x, &helper));
    let t2 = cross(x, &t1);
    (t1, t2)
}

/// Moves `x` along the tangent direction `a·t1 + b·t2` and projects back to the sphere.
pub fn step(x: &Point, t1: &Point, t2: &Point, a: f64, b: f64) -> Point {
    normalize(&[
        x[0] + a * t1[0] + b * t2[0],
        x[1] + a * t1[1] + b * t2[1],
        x[2] + a * t1[2] + b * t2[2],
    ])
}

pub fn rotate(r: &Rotation, p: &Point) -> Point {
    let v = r * Vector3::new(p[0], p[1], p[2]);
    [v.x, v.y, v.z]
}

pub fn rotation_about(axis: &Point, theta: f64) -> Rotation {
    Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(axis[0], axis[1], axis[2])), theta)
}

/// Rotation about `from × to` taking `from` to `to`; a half turn about a perpendicular axis when they are antipodal.
pub fn rotation_sending(from: &Point, to: &Point) -> Rotation {
    let axis = cross(from, to);
    let s = norm(&axis);
    let c = dot(from, to);
    if s < 1e-14 {
        if c > 0.0 {
            return Rotation::identity();
        }
        let (t1, _) = tangent_basis(from);
        return rotation_about(&t1, std::f64::consts::PI);
    }
    rotation_about(&axis, s.atan2(c))
}

pub fn rotation_from_matrix(m: [[f64; 3]; 3]) -> Rotation {
    Rotation::from_matrix_unchecked(nalgebra::Matrix3::from_fn(|i, j| m[i][j]))
}

pub fn rotation_to_matrix(r: &Rotation) -> [[f64; 3]; 3] {
    let m = r.matrix();
    [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]]
}

/// Latitude-ring grid with both ring spacing and in-ring spacing at most `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereGrid {
    h: f64,
    nodes: Vec<Point>,
}

impl SphereGrid {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(contract(format!("grid spacing {h} outside (0, 1]")));
        }
        let rings = (std::f64::consts::PI / h).ceil() as usize;
        let delta = std::f64::consts::PI / rings as f64;
        let mut nodes = Vec::new();
        for i in 0..rings {
            let theta = (i as f64 + 0.5) * delta;
            let count = ((2.0 * std::f64::consts::PI * theta.sin() / delta).ceil() as usize).max(3);
            let offset = if i % 2 == 0 { 0.0 } else { 0.5 };
            for j in 0..count {
                let phi = 2.0 * std::f64::consts::PI * (j as f64 + offset) / count as f64;
                nodes.push([theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]);
            }
        }
        Ok(Self { h: delta, nodes })
    }

    /// Every point of the sphere lies within this geodesic distance of a node.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Bucket index over points for fixed-radius neighbor queries.
pub struct PointIndex {
    cell: f64,
    buckets: HashMap<(i64, i64, i64), Vec<usize>>,
    points: Vec<Point>,
}

impl PointIndex {
    pub fn new(points: &[Point], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(key(p, cell)).or_default().push(i);
        }
        Self { cell, buckets, points: points.to_vec() }
    }

    /// Indices of points within Euclidean distance `radius ≤ cell` of `x`, in increasing order.
    pub fn within(&self, x: &Point, radius: f64) -> Vec<usize> {
        debug_assert!(radius <= self.cell * (1.0 + 1e-12));
        let (a, b, c) = key(x, self.cell);
        let mut out = Vec::new();
        for da in -1..=1 {
            for db in -1..=1 {
                for dc in -1..=1 {
                    if let Some(v) = self.buckets.get(&(a + da, b + db, c + dc)) {
                        out.extend(v.iter().copied().filter(|&i| distance(&self.points[i], x) <= radius));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn key(p: &Point, cell: f64) -> (i64, i64, i64) {
    ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64, (p[2] / cell).floor() as i64)
}

/// Greedy merge: keeps the first point of every cluster closer than `radius`.
pub fn dedup_points(points: &[Point], radius: f64) -> Vec<Point> {
    let mut kept: Vec<Point> = Vec::new();
    let mut index: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let cell = radius.max(1e-12);
    for p in points {
        let (a, b, c) = key(p, cell);
        let mut dup = false;
        'outer: for da in -1..=1 {
            for db in -1..=1 {
                for dc in -1..=1 {
                    if let Some(v) = index.get(&(a + da, b + db, c + dc)) {
                        if v.iter().any(|&i| distance(&kept[i], p) < radius) {
                            dup = true;
                            break 'outer;
                        }
                    }
                }
            }
        }
        if !dup {
            index.entry((a, b, c)).or_default().push(kept.len());
            kept.push(*p);
        }
    }
    kept
}

/// `x,y,z` rows with 17 significant digits.
pub fn write_points_csv<W: Write>(points: &[Point], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "z"])?;
    for p in points {
        w.write_record(p.iter().map(|v| format!("{v:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points_csv<R: Read>(input: R) -> Result<Vec<Point>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        let (x, y, z): (f64, f64, f64) = rec?;
        out.push([x, y, z]);
    }
    Ok(out)
}

/// Closed geodesic cap `{x : angle(x, center) ≤ radius}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cap {
    pub center: Point,
    pub radius: f64,
}

impl Cap {
    pub fn new(center: Point, radius: f64) -> Self {
        Self { center: normalize(&center), radius }
    }

    pub fn contains(&self, x: &Point) -> bool {
        angle(&self.center, x) <= self.radius
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CapFamily {
    pub caps: Vec<Cap>,
}

impl CapFamily {
    pub fn new(caps: Vec<Cap>) -> Self {
        Self { caps }
    }

    pub fn from_points(points: &[Point], radius: f64) -> Self {
        Self { caps: points.iter().map(|p| Cap::new(*p, radius)).collect() }
    }

    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.caps.iter().any(|c| c.contains(x))
    }

    pub fn extend(&mut self, other: &CapFamily) {
        self.caps.extend_from_slice(&other.caps);
    }

    pub fn rotated(&self, r: &Rotation) -> Self {
        Self { caps: self.caps.iter().map(|c| Cap { center: rotate(r, &c.center), radius: c.radius }).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn grid_covers_sphere() {
        let g = SphereGrid::new(0.1).unwrap();
        assert!(g.h() <= 0.1);
        let idx = PointIndex::new(g.nodes(), 2.0 * g.h());
        let mut s = rng::stream(5, 0);
        for _ in 0..2000 {
            let x = random_unit(&mut s);
            let near = idx.within(&x, angle_to_chord(g.h()));
            assert!(!near.is_empty(), "{x:?}");
        }
        assert!(g.nodes().iter().all(|p| (norm(p) - 1.0).abs() < 1e-14));
    }

    #[test]
    fn rotations() {
        let e2 = [0.0, 1.0, 0.0];
        let e = normalize(&[0.3, -0.2, 0.9]);
        let r = rotation_sending(&e2, &e);
        assert!(distance(&rotate(&r, &e2), &e) < 1e-14);
        let anti = rotation_sending(&e2, &neg(&e2));
        assert!(distance(&rotate(&anti, &e2), &neg(&e2)) < 1e-14);
        assert!((angle(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((chord_to_angle(angle_to_chord(0.3)) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn dedup_and_csv() {
        let pts = vec![[1.0, 0.0, 0.0], [1.0, 1e-9, 0.0], [0.0, 1.0, 0.0]];
        let d = dedup_points(&pts, 1e-6);
        assert_eq!(d.len(), 2);
        let mut buf = Vec::new();
        write_points_csv(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,z\n1.0000000000000000e0,"));
        assert_eq!(read_points_csv(&buf[..]).unwrap(), d);
    }

    #[test]
    fn caps() {
        let f = CapFamily::from_points(&[[0.0, 0.0, 1.0]], 0.1);
        assert!(f.contains(&normalize(&[0.05, 0.0, 1.0])));
        assert!(!f.contains(&[1.0, 0.0, 0.0]));
    }
}
