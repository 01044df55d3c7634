//! Training data from analytic scatterers: single spheres and two-sphere
//! composites, sampled into canonical point clouds and labelled with SH
//! projections of their oracle ASFs.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::{Quat, Vec3};
use crate::oracle::{compute_asf, ScatterConfig, SphereScatterer, DEFAULT_REFERENCE_RADIUS};
use crate::pointcloud::{farthest_point_sample, sample_surface, ObjectFlags, TriangleMesh, REGRESSOR_POINTS};
use crate::rng;
use crate::shfield::{project, SHCoefficients};
use crate::sphgeom::{icosphere, uniform_unit_vector, FieldGrid, DEFAULT_LEVEL};
use crate::asf_band_index;

/// Fraction of objects (by group) placed in the training split.
pub const TRAIN_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetConfig {
    /// Total number of records, base objects plus rotated copies.
    pub count: usize,
    pub frequencies: Vec<f64>,
    pub seed: u64,
    /// Probability that a base object is a two-sphere composite.
    pub composite_fraction: f64,
    /// Pair every base object with a randomly rotated copy.
    pub augment: bool,
    pub reference_radius: f64,
    pub grid_level: u32,
    pub order: u32,
    /// Icosphere level of the sphere meshes the clouds are sampled from.
    pub mesh_level: u32,
    pub surface_samples: usize,
    pub n_points: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            count: 100,
            frequencies: crate::ASF_BANDS.to_vec(),
            seed: 0,
            composite_fraction: 0.3,
            augment: true,
            reference_radius: DEFAULT_REFERENCE_RADIUS,
            grid_level: DEFAULT_LEVEL,
            order: 3,
            mesh_level: 3,
            surface_samples: 4096,
            n_points: REGRESSOR_POINTS,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("dataset count must be at least 1"));
        }
        if self.frequencies.is_empty() {
            return Err(Error::invalid("at least one frequency is required"));
        }
        if let Some(f) = self.frequencies.iter().find(|&&f| asf_band_index(f).is_none()) {
            return Err(Error::invalid(format!(
                "unsupported frequency {f} Hz (supported: 125, 250, 500, 1000)"
            )));
        }
        if !(0.0..=1.0).contains(&self.composite_fraction) {
            return Err(Error::invalid("composite fraction must lie in [0, 1]"));
        }
        if self.n_points == 0 || self.surface_samples < self.n_points {
            return Err(Error::invalid("need surface_samples >= n_points >= 1"));
        }
        Ok(())
    }

    fn base_count(&self) -> usize {
        if self.augment {
            self.count.div_ceil(2)
        } else {
            self.count
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum RecordKind {
    Sphere,
    Composite,
}

/// ASF of one record at one frequency.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Label {
    pub frequency: f64,
    /// Clipped `|p_s|` on the field grid.
    pub pressures: Vec<f64>,
    pub sh: SHCoefficients,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Record {
    pub id: usize,
    /// Index of the base object; rotated copies share it.
    pub group: usize,
    pub kind: RecordKind,
    /// Rotation applied to the base object, if this is an augmented copy.
    pub rotation: Option<Quat>,
    /// Scatterers in the canonical frame, centred on the surface centroid.
    pub scatterers: Vec<SphereScatterer>,
    /// Canonical cloud centred at its own centroid.
    pub points: Vec<Vec3>,
    pub reference_radius: f64,
    pub grid_level: u32,
    pub labels: Vec<Label>,
}

impl Record {
    pub fn label(&self, frequency: f64) -> Option<&Label> {
        self.labels.iter().find(|l| l.frequency == frequency)
    }
}

/// Area-weighted centroid of a union of sphere surfaces.
pub fn surface_centroid(spheres: &[SphereScatterer]) -> Vec3 {
    let w: f64 = spheres.iter().map(|s| s.radius * s.radius).sum();
    spheres
        .iter()
        .fold(Vec3::ZERO, |a, s| a + s.center * (s.radius * s.radius))
        / w
}

fn recentre(spheres: &mut [SphereScatterer]) {
    let c = surface_centroid(spheres);
    for s in spheres {
        s.center -= c;
    }
}

/// A single sphere whose diameter is drawn from [1, 2] m.
fn random_sphere<R: Rng>(rng: &mut R) -> Result<Vec<SphereScatterer>> {
    let target: f64 = rng.random_range(1.0..=2.0);
    Ok(alloc::vec![SphereScatterer::centered(target / 2.0)?])
}

/// Two disjoint spheres, scaled so the longest bounding-box edge is in [1, 2] m.
fn random_composite<R: Rng>(rng: &mut R) -> Result<Vec<SphereScatterer>> {
    let r1: f64 = rng.random_range(0.25..0.6);
    let r2: f64 = rng.random_range(0.25..0.6);
    let gap: f64 = rng.random_range(0.05..0.5);
    let u = uniform_unit_vector(rng);
    let mut spheres = alloc::vec![
        SphereScatterer::new(r1, Vec3::ZERO)?,
        SphereScatterer::new(r2, u * (r1 + r2 + gap))?,
    ];
    let (lo, hi) = sphere_bounds(&spheres);
    let ext = hi - lo;
    let longest = ext.x.max(ext.y).max(ext.z);
    let target: f64 = rng.random_range(1.0..=2.0);
    let scale = target / longest;
    let mid = (lo + hi) * 0.5;
    for s in &mut spheres {
        s.center = mid + (s.center - mid) * scale;
        s.radius *= scale;
    }
    recentre(&mut spheres);
    Ok(spheres)
}

/// Bounding box of a union of spheres.
pub fn sphere_bounds(spheres: &[SphereScatterer]) -> (Vec3, Vec3) {
    let inf = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    spheres.iter().fold((inf, -inf), |(lo, hi), s| {
        let r = Vec3::new(s.radius, s.radius, s.radius);
        (lo.min(s.center - r), hi.max(s.center + r))
    })
}

/// Triangulated union of sphere surfaces.
pub fn spheres_mesh(spheres: &[SphereScatterer], level: u32) -> Result<TriangleMesh> {
    let mut mesh: Option<TriangleMesh> = None;
    for s in spheres {
        let m = TriangleMesh::sphere(s.center, s.radius, level, ObjectFlags::SCATTERER)?;
        mesh = Some(match mesh {
            None => m,
            Some(acc) => acc.merged(&m),
        });
    }
    mesh.ok_or_else(|| Error::invalid("no spheres to mesh"))
}

/// Canonical cloud for a set of spheres: surface samples reduced by
/// farthest point sampling and centred at their centroid.
pub fn sphere_cloud(spheres: &[SphereScatterer], cfg: &DatasetConfig, seed: u64) -> Result<Vec<Vec3>> {
    let mesh = spheres_mesh(spheres, cfg.mesh_level)?;
    let dense = sample_surface(&mesh, cfg.surface_samples, seed)?;
    let sparse = farthest_point_sample(&dense, cfg.n_points, seed ^ 0x5eed)?;
    Ok(sparse.centered().points)
}

/// Oracle labels for a set of spheres at each configured frequency.
pub fn label_spheres(
    spheres: &[SphereScatterer],
    grid: &Arc<FieldGrid>,
    cfg: &DatasetConfig,
) -> Result<Vec<Label>> {
    cfg.frequencies
        .iter()
        .map(|&f| {
            let sc = ScatterConfig::new(spheres.to_vec(), f)?;
            let asf = compute_asf(&sc, grid, cfg.reference_radius)?;
            let sh = project(&asf.field, cfg.order)?;
            Ok(Label {
                frequency: f,
                pressures: asf.field.pressures().to_vec(),
                sh,
            })
        })
        .collect()
}

/// Generates base objects and, when enabled, their rotated copies.
pub fn generate(cfg: &DatasetConfig) -> Result<Vec<Record>> {
    cfg.validate()?;
    let grid = Arc::new(icosphere(cfg.grid_level)?);
    let base_n = cfg.base_count();
    let mut records = Vec::with_capacity(cfg.count);
    for i in 0..base_n {
        let mut r = rng::stream(cfg.seed, i as u64);
        let composite = r.random::<f64>() < cfg.composite_fraction;
        let spheres = if composite {
            random_composite(&mut r)?
        } else {
            random_sphere(&mut r)?
        };
        let points = sphere_cloud(&spheres, cfg, r.random())?;
        let labels = label_spheres(&spheres, &grid, cfg)?;
        records.push(Record {
            id: i,
            group: i,
            kind: if composite {
                RecordKind::Composite
            } else {
                RecordKind::Sphere
            },
            rotation: None,
            scatterers: spheres,
            points,
            reference_radius: cfg.reference_radius,
            grid_level: cfg.grid_level,
            labels,
        });
    }
    if cfg.augment {
        let extra = cfg.count - base_n;
        let rotated = random_rotation_augment(&records[..extra], cfg.seed, cfg)?;
        records.extend(rotated.into_iter().enumerate().map(|(j, mut r)| {
            r.id = base_n + j;
            r
        }));
    }
    Ok(records)
}

/// One uniformly random rotation per record about its centroid, with the
/// label regenerated by the oracle for the rotated scatterers.
pub fn random_rotation_augment(records: &[Record], seed: u64, cfg: &DatasetConfig) -> Result<Vec<Record>> {
    let grid = Arc::new(icosphere(cfg.grid_level)?);
    records
        .iter()
        .map(|rec| {
            let mut r = rng::stream(seed ^ 0xa5a5_a5a5, rec.id as u64);
            let q = Quat::random(&mut r);
            let m = q.to_mat3();
            let scatterers: Vec<SphereScatterer> = rec
                .scatterers
                .iter()
                .map(|s| SphereScatterer {
                    radius: s.radius,
                    center: m * s.center,
                })
                .collect();
            let labels = label_spheres(&scatterers, &grid, cfg)?;
            Ok(Record {
                rotation: Some(q),
                points: rec.points.iter().map(|&p| m * p).collect(),
                scatterers,
                labels,
                ..rec.clone()
            })
        })
        .collect()
}

/// Deterministic 9:1 split by object group, so rotated copies never land
/// on both sides. Returns record indices `(train, test)`.
pub fn split(records: &[Record], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut groups: Vec<usize> = records.iter().map(|r| r.group).collect();
    groups.sort_unstable();
    groups.dedup();
    groups.shuffle(&mut rng::stream(seed, u64::MAX));
    let n_train = if groups.len() < 2 {
        groups.len()
    } else {
        ((groups.len() as f64 * TRAIN_FRACTION).round() as usize).clamp(1, groups.len() - 1)
    };
    let train_groups = &mut groups[..n_train].to_vec();
    train_groups.sort_unstable();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, r) in records.iter().enumerate() {
        if train_groups.binary_search(&r.group).is_ok() {
            train.push(i);
        } else {
            test.push(i);
        }
    }
    (train, test)
}
