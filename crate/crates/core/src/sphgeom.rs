//! Spherical geometry: directions, icosphere field grids and uniform
//! direction sampling.
//!
//! Directions use the physics convention: `theta` is the polar angle from +z,
//! `phi` the azimuth from +x towards +y. At the poles `phi` is defined as 0.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use core::fmt::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Subdivision level that yields the 642-point field grid.
pub const DEFAULT_LEVEL: u32 = 3;
/// Largest supported icosphere subdivision level.
pub const MAX_LEVEL: u32 = 6;

/// A direction on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Direction {
    theta: f64,
    phi: f64,
}

impl Direction {
    /// Builds a direction, normalizing `phi` into `[0, 2π)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) || !phi.is_finite() {
            return Err(Error::invalid(format!(
                "direction out of range: theta={theta}, phi={phi}"
            )));
        }
        let mut phi = phi - TAU * (phi / TAU).floor();
        if !(0.0..TAU).contains(&phi) || theta == 0.0 || theta == PI {
            phi = 0.0;
        }
        Ok(Direction { theta, phi })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Direction of a non-zero vector of any length.
    pub fn from_vector(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::invalid("cannot take the direction of a zero vector"));
        }
        cart_to_sph(v / n)
    }

    pub fn to_vector(self) -> Vec3 {
        sph_to_cart(self)
    }
}

/// Converts a unit vector to spherical angles.
pub fn cart_to_sph(v: Vec3) -> Result<Direction> {
    let n = v.norm();
    if !((n - 1.0).abs() <= 1e-9) {
        return Err(Error::invalid(format!("expected a unit vector, |v| = {n}")));
    }
    let theta = (v.z / n).clamp(-1.0, 1.0).acos();
    let phi = if v.x == 0.0 && v.y == 0.0 {
        0.0
    } else {
        v.y.atan2(v.x)
    };
    Direction::new(theta, phi)
}

/// Converts spherical angles to a unit vector.
pub fn sph_to_cart(d: Direction) -> Vec3 {
    let (st, ct) = d.theta.sin_cos();
    let (sp, cp) = d.phi.sin_cos();
    Vec3::new(st * cp, st * sp, ct)
}

/// Draws a direction uniformly distributed over the unit sphere.
pub fn uniform_direction<R: Rng + ?Sized>(rng: &mut R) -> Direction {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    let z = 1.0 - 2.0 * u;
    Direction::new(z.clamp(-1.0, 1.0).acos(), TAU * v).expect("sampled angles are in range")
}

/// Uniformly distributed unit vector.
pub fn uniform_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    let z = 1.0 - 2.0 * u;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let (s, c) = (TAU * v).sin_cos();
    Vec3::new(r * c, r * s, z)
}

/// Points of a subdivided icosahedron projected onto the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    points: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    level: u32,
    weights: Vec<f64>,
}

impl FieldGrid {
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn subdivision_level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Voronoi solid angle of each vertex. Sums to 4π.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn directions(&self) -> Vec<Direction> {
        self.points
            .iter()
            .map(|&p| cart_to_sph(p).expect("grid points are unit vectors"))
            .collect()
    }

    /// `x,y,z` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,z\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{}", p.x, p.y, p.z);
        }
        s
    }

    /// Ratio of the smallest to the largest nearest-neighbour distance.
    pub fn spacing_ratio(&self) -> f64 {
        let mut nearest = alloc::vec![f64::INFINITY; self.points.len()];
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k] as usize, f[(k + 1) % 3] as usize);
                let d = self.points[a].distance(self.points[b]);
                nearest[a] = nearest[a].min(d);
                nearest[b] = nearest[b].min(d);
            }
        }
        let lo = nearest.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = nearest.iter().cloned().fold(0.0, f64::max);
        lo / hi
    }
}

/// Number of vertices of an icosphere at `level`.
pub fn icosphere_point_count(level: u32) -> usize {
    10 * 4usize.pow(level) + 2
}

/// Icosphere with `10·4^level + 2` vertices, in a deterministic order: the
/// twelve icosahedron vertices first, then midpoints in creation order.
pub fn icosphere(level: u32) -> Result<FieldGrid> {
    if level > MAX_LEVEL {
        return Err(Error::invalid(format!(
            "icosphere level {level} outside 0..={MAX_LEVEL}"
        )));
    }
    let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut points: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalized())
    .collect();
    let mut faces: Vec<[u32; 3]> = alloc::vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..level {
        let mut cache: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        let mut midpoint = |a: u32, b: u32, points: &mut Vec<Vec3>| -> u32 {
            let key = if a < b { (a, b) } else { (b, a) };
            *cache.entry(key).or_insert_with(|| {
                let m = ((points[a as usize] + points[b as usize]) * 0.5).normalized();
                points.push(m);
                (points.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut points);
            let bc = midpoint(b, c, &mut points);
            let ca = midpoint(c, a, &mut points);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }

    let weights = voronoi_weights(&points, &faces);
    Ok(FieldGrid {
        points,
        faces,
        level,
        weights,
    })
}

/// Solid angle of the spherical triangle `abc` (Van Oosterom–Strackee).
pub(crate) fn spherical_triangle_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let num = a.dot(b.cross(c)).abs();
    let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * num.atan2(den)
}

// Every icosphere triangle is acute, so its circumcentre lies inside it and
// each vertex's Voronoi share is the two sub-triangles (vertex, edge midpoint,
// circumcentre).
fn voronoi_weights(points: &[Vec3], faces: &[[u32; 3]]) -> Vec<f64> {
    let mut w = alloc::vec![0.0; points.len()];
    for f in faces {
        let p = [points[f[0] as usize], points[f[1] as usize], points[f[2] as usize]];
        let mut cc = (p[1] - p[0]).cross(p[2] - p[0]).normalized();
        if cc.dot(p[0]) < 0.0 {
            cc = -cc;
        }
        for k in 0..3 {
            let v = p[k];
            let next = p[(k + 1) % 3];
            let prev = p[(k + 2) % 3];
            let m_next = (v + next).normalized();
            let m_prev = (v + prev).normalized();
            w[f[k] as usize] += spherical_triangle_area(v, m_next, cc)
                + spherical_triangle_area(v, cc, m_prev);
        }
    }
    w
}
