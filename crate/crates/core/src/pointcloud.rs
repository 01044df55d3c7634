//! Point clouds and triangle meshes: surface sampling, farthest point
//! sampling, scattering-region extraction and alignment of the incoming
//! wave direction with −x.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3};
use crate::rng;
use crate::sphgeom::{icosphere, sph_to_cart, Direction};

/// Points per cloud fed to the regressor.
pub const REGRESSOR_POINTS: usize = 1024;
/// Distance the region centre is pushed past the hit point along the ray.
pub const REGION_OFFSET: f64 = 0.5;
/// Search radius around the region centre.
pub const REGION_RADIUS: f64 = 1.0;
/// Cell edge of the spatial hash used for region queries.
pub const HASH_CELL: f64 = 0.5;
/// Half-width of the jitter applied to repeated points in sparse regions.
const JITTER: f64 = 5e-7;
/// Minimum triangle area.
const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Coordinate frame of a cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Frame {
    World,
    /// Centred at the centroid with the incoming wave travelling along −x.
    Canonical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, frame: Frame) -> Result<Self> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("point cloud has non-finite coordinates"));
        }
        Ok(PointCloud { points, frame })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        let n = self.points.len().max(1) as f64;
        self.points.iter().fold(Vec3::ZERO, |a, &p| a + p) / n
    }

    /// Same cloud translated so its centroid is the origin.
    pub fn centered(&self) -> PointCloud {
        let c = self.centroid();
        PointCloud {
            points: self.points.iter().map(|&p| p - c).collect(),
            frame: self.frame,
        }
    }

    /// Applies `rot` about the origin.
    pub fn rotated(&self, rot: &Mat3) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|&p| *rot * p).collect(),
            frame: self.frame,
        }
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        bounds(&self.points)
    }
}

fn bounds(points: &[Vec3]) -> (Vec3, Vec3) {
    let inf = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    points
        .iter()
        .fold((inf, -inf), |(lo, hi), &p| (lo.min(p), hi.max(p)))
}

/// Role of a scene object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObjectFlags {
    pub is_wall: bool,
    pub is_scatterer: bool,
}

impl ObjectFlags {
    pub const WALL: ObjectFlags = ObjectFlags {
        is_wall: true,
        is_scatterer: false,
    };
    pub const SCATTERER: ObjectFlags = ObjectFlags {
        is_wall: false,
        is_scatterer: true,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub flags: ObjectFlags,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, flags: ObjectFlags) -> Result<Self> {
        let n = vertices.len() as u32;
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::invalid(format!(
                "triangle {t:?} indexes past {n} vertices"
            )));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mesh has non-finite vertices"));
        }
        let mesh = TriangleMesh {
            vertices,
            triangles,
            flags,
        };
        if let Some(i) = (0..mesh.triangles.len()).find(|&i| mesh.triangle_area(i) <= MIN_TRIANGLE_AREA) {
            return Err(Error::invalid(format!("triangle {i} is degenerate")));
        }
        Ok(mesh)
    }

    /// Icosphere mesh of the given radius.
    pub fn sphere(center: Vec3, radius: f64, level: u32, flags: ObjectFlags) -> Result<Self> {
        let g = icosphere(level)?;
        let vertices = g.points().iter().map(|&p| center + p * radius).collect();
        TriangleMesh::new(vertices, g.faces().to_vec(), flags)
    }

    /// Axis-aligned box with outward-facing triangles.
    pub fn cuboid(min: Vec3, max: Vec3, flags: ObjectFlags) -> Result<Self> {
        let v = |x: bool, y: bool, z: bool| {
            Vec3::new(
                if x { max.x } else { min.x },
                if y { max.y } else { min.y },
                if z { max.z } else { min.z },
            )
        };
        let vertices = alloc::vec![
            v(false, false, false),
            v(true, false, false),
            v(true, true, false),
            v(false, true, false),
            v(false, false, true),
            v(true, false, true),
            v(true, true, true),
            v(false, true, true),
        ];
        let triangles = alloc::vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        TriangleMesh::new(vertices, triangles, flags)
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let t = self.triangles[i];
        [
            self.vertices[t[0] as usize],
            self.vertices[t[1] as usize],
            self.vertices[t[2] as usize],
        ]
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        0.5 * (b - a).cross(c - a).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle_area(i)).sum()
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        bounds(&self.vertices)
    }

    /// Mesh with every vertex mapped through `rot` then `translation`.
    pub fn transformed(&self, rot: &Mat3, translation: Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|&v| *rot * v + translation).collect(),
            triangles: self.triangles.clone(),
            flags: self.flags,
        }
    }

    /// Concatenation of two meshes; flags are taken from `self`.
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let offset = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut triangles = self.triangles.clone();
        triangles.extend(other.triangles.iter().map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]));
        TriangleMesh {
            vertices,
            triangles,
            flags: self.flags,
        }
    }
}

/// Samples `n` points uniformly by area over the mesh surface.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if mesh.triangles.is_empty() {
        return Err(Error::invalid("cannot sample an empty mesh"));
    }
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut acc = 0.0;
    for i in 0..mesh.triangles.len() {
        acc += mesh.triangle_area(i);
        cumulative.push(acc);
    }
    let mut rng = rng::seeded(seed);
    let points = (0..n)
        .map(|_| {
            let target = rng.random::<f64>() * acc;
            let i = cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1);
            let [a, b, c] = mesh.triangle(i);
            let r1 = rng.random::<f64>().sqrt();
            let r2: f64 = rng.random();
            a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2)
        })
        .collect();
    PointCloud::new(points, Frame::World)
}

/// Greedy farthest point sampling of `n` points, starting from a seeded
/// index. Ties go to the lowest index. The output is a subset of the input.
pub fn farthest_point_sample(pc: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    let m = pc.points.len();
    if n == 0 || n > m {
        return Err(Error::invalid(format!(
            "cannot select {n} of {m} points"
        )));
    }
    let start = rng::seeded(seed).random_range(0..m);
    Ok(PointCloud {
        points: fps_indices(&pc.points, n, start)
            .into_iter()
            .map(|i| pc.points[i])
            .collect(),
        frame: pc.frame,
    })
}

/// Farthest point sampling from an explicit start index.
pub fn fps_indices(points: &[Vec3], n: usize, start: usize) -> Vec<usize> {
    let mut selected = Vec::with_capacity(n);
    let mut min_d = alloc::vec![f64::INFINITY; points.len()];
    let mut current = start;
    for _ in 0..n {
        selected.push(current);
        let c = points[current];
        let mut best = 0;
        let mut best_d = -1.0;
        for (i, (d, &p)) in min_d.iter_mut().zip(points).enumerate() {
            let dd = p.distance_squared(c);
            if dd < *d {
                *d = dd;
            }
            if *d > best_d {
                best_d = *d;
                best = i;
            }
        }
        current = best;
    }
    selected
}

/// Uniform spatial hash over surface points of scatterer objects.
#[derive(Debug, Clone, Default)]
pub struct SurfaceIndex {
    points: Vec<Vec3>,
    owners: Vec<u32>,
    cells: BTreeMap<(i64, i64, i64), Vec<u32>>,
}

impl SurfaceIndex {
    pub fn new() -> Self {
        Self::default()
    }

    fn cell(p: Vec3) -> (i64, i64, i64) {
        (
            (p.x / HASH_CELL).floor() as i64,
            (p.y / HASH_CELL).floor() as i64,
            (p.z / HASH_CELL).floor() as i64,
        )
    }

    /// Adds the surface points of object `owner`.
    pub fn insert(&mut self, owner: u32, points: &[Vec3]) {
        for &p in points {
            let id = self.points.len() as u32;
            self.points.push(p);
            self.owners.push(owner);
            self.cells.entry(Self::cell(p)).or_default().push(id);
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points within `radius` of `center`, in insertion order.
    pub fn within(&self, center: Vec3, radius: f64) -> Vec<Vec3> {
        let reach = (radius / HASH_CELL).ceil() as i64;
        let (cx, cy, cz) = Self::cell(center);
        let r2 = radius * radius;
        let mut ids = Vec::new();
        for x in (cx - reach)..=(cx + reach) {
            for y in (cy - reach)..=(cy + reach) {
                for z in (cz - reach)..=(cz + reach) {
                    if let Some(bucket) = self.cells.get(&(x, y, z)) {
                        ids.extend(
                            bucket
                                .iter()
                                .copied()
                                .filter(|&i| self.points[i as usize].distance_squared(center) <= r2),
                        );
                    }
                }
            }
        }
        ids.sort_unstable();
        ids.into_iter().map(|i| self.points[i as usize]).collect()
    }

    /// Owner object of the point with the given insertion index.
    pub fn owner(&self, index: usize) -> u32 {
        self.owners[index]
    }
}

/// Centre of the scattering region for a ray hitting a surface.
pub fn region_center(hit_point: Vec3, ray_dir: Vec3) -> Vec3 {
    hit_point + ray_dir * REGION_OFFSET
}

/// Collects the scatterer points around a ray hit and resamples them to
/// exactly [`REGRESSOR_POINTS`] points.
pub fn extract_region(index: &SurfaceIndex, hit_point: Vec3, ray_dir: Vec3, seed: u64) -> Result<PointCloud> {
    let center = region_center(hit_point, ray_dir);
    let found = index.within(center, REGION_RADIUS);
    if found.is_empty() {
        return Err(Error::EmptyRegion(center.x, center.y, center.z));
    }
    let cloud = PointCloud::new(found, Frame::World)?;
    resample_to(&cloud, REGRESSOR_POINTS, seed)
}

/// Resamples a cloud to exactly `n` points: farthest point sampling when
/// there are enough, otherwise every point plus jittered repeats.
pub fn resample_to(pc: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    if pc.is_empty() {
        return Err(Error::invalid("cannot resample an empty cloud"));
    }
    if pc.len() >= n {
        return farthest_point_sample(pc, n, seed);
    }
    let mut rng = rng::seeded(seed);
    let mut points = pc.points.clone();
    while points.len() < n {
        let src = pc.points[rng.random_range(0..pc.len())];
        let j = Vec3::new(
            rng.random_range(-JITTER..JITTER),
            rng.random_range(-JITTER..JITTER),
            rng.random_range(-JITTER..JITTER),
        );
        points.push(src + j);
    }
    PointCloud::new(points, pc.frame)
}

/// Rotation taking the propagation direction `incoming` onto −x.
pub fn alignment_rotation(incoming: Vec3) -> Mat3 {
    Mat3::rotation_between(incoming.normalized(), -Vec3::X)
}

/// Centres the cloud at its centroid and rotates it so the wave arriving
/// along `incoming` travels along −x.
pub fn align_incoming(pc: &PointCloud, incoming: Direction) -> PointCloud {
    let rot = alignment_rotation(sph_to_cart(incoming));
    let mut out = pc.centered().rotated(&rot);
    out.frame = Frame::Canonical;
    out
}

/// Uniform rescaling about the bounding-box centre so the longest box edge
/// equals `target` (between 1 and 2 m).
pub trait RescaleLongest: Sized {
    fn rescale_longest_dim(&self, target: f64) -> Result<Self>;
}

fn rescale_points(points: &[Vec3], target: f64) -> Result<Vec<Vec3>> {
    if !(1.0..=2.0).contains(&target) {
        return Err(Error::invalid(format!(
            "target longest dimension {target} m outside [1, 2] m"
        )));
    }
    let (lo, hi) = bounds(points);
    let ext = hi - lo;
    let longest = ext.x.max(ext.y).max(ext.z);
    if !(longest > 1e-12) || !longest.is_finite() {
        return Err(Error::invalid("cannot rescale a degenerate shape"));
    }
    let center = (lo + hi) * 0.5;
    let s = target / longest;
    Ok(points.iter().map(|&p| center + (p - center) * s).collect())
}

impl RescaleLongest for PointCloud {
    fn rescale_longest_dim(&self, target: f64) -> Result<Self> {
        Ok(PointCloud {
            points: rescale_points(&self.points, target)?,
            frame: self.frame,
        })
    }
}

impl RescaleLongest for TriangleMesh {
    fn rescale_longest_dim(&self, target: f64) -> Result<Self> {
        Ok(TriangleMesh {
            vertices: rescale_points(&self.vertices, target)?,
            triangles: self.triangles.clone(),
            flags: self.flags,
        })
    }
}
