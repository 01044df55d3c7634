//! Sources of scattering fields for the tracer and their per-worker cache.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::scene::FrameScene;
use crate::dataset::surface_centroid;
use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3};
use crate::oracle::{compute_asf, ScatterConfig, SphereScatterer, DEFAULT_REFERENCE_RADIUS};
use crate::pointcloud::{
    alignment_rotation, region_center, resample_to, Frame, PointCloud, HASH_CELL, REGION_RADIUS, REGRESSOR_POINTS,
};
use crate::regressor::{predict_asf, ModelSet};
use crate::shfield::{project, SHCoefficients, DEFAULT_ORDER};
use crate::sphgeom::{icosphere, Direction, FieldGrid};
use crate::ASF_BANDS;

/// Icosphere level whose vertices quantize incoming directions.
pub const DIRECTION_CELL_LEVEL: u32 = 2;

/// Coefficients per ASF band; `None` where no field is available.
pub type BandFields = [Option<SHCoefficients>; ASF_BANDS.len()];

/// Produces the scattering field of one scatterer region for a wave
/// travelling along `incoming`.
pub trait AsfProvider: Sync {
    fn fields(&self, scene: &FrameScene, object: usize, center: Vec3, incoming: Vec3) -> Result<BandFields>;
}

/// No learned or analytic fields: every scatterer is handled geometrically.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoAsf;

impl AsfProvider for NoAsf {
    fn fields(&self, _: &FrameScene, _: usize, _: Vec3, _: Vec3) -> Result<BandFields> {
        Ok(Default::default())
    }
}

/// Exact fields of objects described by spheres, from the series solution.
#[derive(Debug, Clone)]
pub struct OracleAsf {
    pub grid: Arc<FieldGrid>,
    pub reference_radius: f64,
    pub order: u32,
}

impl OracleAsf {
    pub fn new() -> Result<Self> {
        Ok(OracleAsf {
            grid: Arc::new(icosphere(3)?),
            reference_radius: DEFAULT_REFERENCE_RADIUS,
            order: DEFAULT_ORDER,
        })
    }
}

impl AsfProvider for OracleAsf {
    fn fields(&self, scene: &FrameScene, object: usize, _center: Vec3, incoming: Vec3) -> Result<BandFields> {
        let spheres = &scene.objects[object].spheres;
        let mut out: BandFields = Default::default();
        if spheres.is_empty() {
            return Ok(out);
        }
        let c = surface_centroid(spheres);
        let rot = alignment_rotation(incoming);
        let local = spheres
            .iter()
            .map(|s| SphereScatterer::new(s.radius, rot * (s.center - c)))
            .collect::<Result<Vec<_>>>()?;
        for (slot, &f) in out.iter_mut().zip(ASF_BANDS.iter()) {
            let cfg = ScatterConfig::new(local.clone(), f)?;
            let sol = compute_asf(&cfg, &self.grid, self.reference_radius)?;
            *slot = Some(project(&sol.field, self.order)?);
        }
        Ok(out)
    }
}

/// Fields predicted by the per-band regressors from the scatterer points
/// around the region centre.
#[derive(Debug, Clone)]
pub struct NetworkAsf {
    pub models: ModelSet,
    pub seed: u64,
}

impl AsfProvider for NetworkAsf {
    fn fields(&self, scene: &FrameScene, _object: usize, center: Vec3, incoming: Vec3) -> Result<BandFields> {
        let found = scene.surface.within(center, REGION_RADIUS);
        if found.is_empty() {
            return Err(Error::EmptyRegion(center.x, center.y, center.z));
        }
        let seed = self.seed ^ center.x.to_bits().rotate_left(7) ^ center.y.to_bits().rotate_left(23) ^ center.z.to_bits();
        let pc = resample_to(&PointCloud::new(found, Frame::World)?, REGRESSOR_POINTS, seed)?;
        let dir = Direction::from_vector(incoming)?;
        let mut out: BandFields = Default::default();
        for (slot, &f) in out.iter_mut().zip(ASF_BANDS.iter()) {
            if self.models.get(f).is_some() {
                *slot = Some(predict_asf(&self.models, &pc, dir, f)?);
            }
        }
        Ok(out)
    }
}

/// Fields of one region and view, with the rotation into their frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AsfFields {
    pub coeffs: BandFields,
    /// World to canonical rotation for the quantized incoming direction.
    pub rotation: Mat3,
}

impl AsfFields {
    /// Gain `clamp(p, 0, 1)` of `band` towards world direction `dir`.
    pub fn gain(&self, band: usize, dir: Vec3) -> Option<f64> {
        self.coeffs.get(band)?.as_ref().map(|c| c.gain(self.rotation * dir))
    }
}

type CacheKey = (u32, (i64, i64, i64), usize);

/// Per-worker memo of fields keyed by object, region hash cell and
/// quantized incoming direction. Values are computed at the cell centre and
/// cell direction, so they depend only on the key and the frame.
#[derive(Debug, Clone)]
pub struct AsfCache {
    directions: Vec<Vec3>,
    map: BTreeMap<CacheKey, Option<Arc<AsfFields>>>,
    /// Lookups whose provider call failed or returned nothing.
    pub failures: usize,
    pub misses: usize,
}

impl AsfCache {
    pub fn new() -> Self {
        let grid = icosphere(DIRECTION_CELL_LEVEL).expect("valid level");
        AsfCache {
            directions: grid.points().to_vec(),
            map: BTreeMap::new(),
            failures: 0,
            misses: 0,
        }
    }

    fn direction_cell(&self, d: Vec3) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, &v) in self.directions.iter().enumerate() {
            let c = v.dot(d);
            if c > best.0 {
                best = (c, i);
            }
        }
        best.1
    }

    /// Fields for a ray travelling along `dir` that hit `object` at `hit`.
    /// `None` means the caller must fall back to geometric reflection.
    pub fn lookup(
        &mut self,
        provider: &dyn AsfProvider,
        scene: &FrameScene,
        object: usize,
        hit: Vec3,
        dir: Vec3,
    ) -> Option<Arc<AsfFields>> {
        let c = region_center(hit, dir);
        let cell = (
            (c.x / HASH_CELL).floor() as i64,
            (c.y / HASH_CELL).floor() as i64,
            (c.z / HASH_CELL).floor() as i64,
        );
        let dcell = self.direction_cell(dir);
        let key = (object as u32, cell, dcell);
        if let Some(v) = self.map.get(&key) {
            return v.clone();
        }
        self.misses += 1;
        let center = Vec3::new(
            (cell.0 as f64 + 0.5) * HASH_CELL,
            (cell.1 as f64 + 0.5) * HASH_CELL,
            (cell.2 as f64 + 0.5) * HASH_CELL,
        );
        let d = self.directions[dcell];
        let value = match provider.fields(scene, object, center, d) {
            Ok(coeffs) if coeffs.iter().any(Option::is_some) => Some(Arc::new(AsfFields {
                coeffs,
                rotation: alignment_rotation(d),
            })),
            _ => None,
        };
        if value.is_none() {
            self.failures += 1;
        }
        self.map.insert(key, value.clone());
        value
    }
}

impl Default for AsfCache {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::{ObjectFlags, TriangleMesh};
    use crate::propagate::scene::{Material, Scene, SceneObject};

    fn ball_scene() -> FrameScene {
        let mut s = Scene::empty(Vec3::new(-4.0, 0.0, 0.0), Vec3::new(4.0, 0.0, 0.0));
        let mesh = TriangleMesh::sphere(Vec3::ZERO, 0.5, 3, ObjectFlags::SCATTERER).unwrap();
        let mut o = SceneObject::new("ball", mesh, Material::default());
        o.spheres.push(SphereScatterer::centered(0.5).unwrap());
        s.objects.push(o);
        FrameScene::build(&s, 0.0).unwrap()
    }

    #[test]
    fn oracle_fields_are_view_independent_for_a_sphere() {
        let f = ball_scene();
        let p = OracleAsf::new().unwrap();
        let a = p.fields(&f, 0, Vec3::ZERO, -Vec3::X).unwrap();
        let b = p.fields(&f, 0, Vec3::ZERO, Vec3::Y).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
            for (u, v) in x.coeffs.iter().zip(&y.coeffs) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cache_reuses_and_reports_failures() {
        let f = ball_scene();
        let p = OracleAsf::new().unwrap();
        let mut cache = AsfCache::new();
        let hit = Vec3::new(-0.5, 0.0, 0.0);
        let d = Vec3::new(1.0, 0.3, 0.2).normalized();
        let a = cache.lookup(&p, &f, 0, hit, d).unwrap();
        let b = cache.lookup(&p, &f, 0, hit + Vec3::new(0.0, 0.01, 0.01), Vec3::new(1.0, 0.31, 0.2).normalized());
        assert!(Arc::ptr_eq(&a, &b.unwrap()));
        assert_eq!(cache.misses, 1);
        // canonical forward direction sees the forward lobe
        let fwd = a.gain(0, d).unwrap();
        assert!(fwd > 0.0 && fwd <= 1.0);
        let mut fresh = AsfCache::new();
        assert!(fresh.lookup(&NoAsf, &f, 0, hit, Vec3::X).is_none());
        assert_eq!(fresh.failures, 1);
    }
}
