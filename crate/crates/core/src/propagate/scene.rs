//! Scene description and its posed, ray-traceable form at one instant.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::bvh::{Bvh, Hit, Triangle};
use super::histogram::{DEFAULT_BIN_WIDTH, DEFAULT_LENGTH};
use crate::error::{Error, Result};
use crate::geom::{Mat3, Quat, Vec3};
use crate::oracle::SphereScatterer;
use crate::pointcloud::{sample_surface, ObjectFlags, SurfaceIndex, TriangleMesh};
use crate::{NUM_BANDS, SPEED_OF_SOUND};

/// Surface points per square metre of scatterer used for region extraction.
pub const SURFACE_DENSITY: f64 = 2000.0;
pub const MIN_SURFACE_POINTS: usize = 1024;
pub const MAX_SURFACE_POINTS: usize = 50_000;
pub const MAX_ORDER: usize = 200;
pub const DEFAULT_DETECTOR_RADIUS: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Material {
    /// Absorption per band.
    pub alpha: [f64; NUM_BANDS],
    /// Fraction of reflected energy scattered diffusely.
    pub scatter: f64,
}

impl Material {
    pub fn uniform(alpha: f64, scatter: f64) -> Self {
        Material {
            alpha: [alpha; NUM_BANDS],
            scatter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        if !self.alpha.iter().all(|&a| ok(a)) || !ok(self.scatter) {
            return Err(Error::InvalidScene(format!(
                "material coefficients must lie in [0, 1]: alpha {:?}, scatter {}",
                self.alpha, self.scatter
            )));
        }
        Ok(())
    }
}

impl Default for Material {
    fn default() -> Self {
        Material::uniform(0.1, 0.2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keyframe {
    pub time: f64,
    pub translation: Vec3,
    pub rotation: Quat,
}

impl Keyframe {
    pub const IDENTITY: Keyframe = Keyframe {
        time: 0.0,
        translation: Vec3::ZERO,
        rotation: Quat::IDENTITY,
    };
}

/// Pose at `time`: linear in translation, slerp in rotation, held constant
/// outside the keyframe range.
pub fn interpolate(keys: &[Keyframe], time: f64) -> (Mat3, Vec3) {
    match keys {
        [] => (Mat3::IDENTITY, Vec3::ZERO),
        [k] => (k.rotation.to_mat3(), k.translation),
        _ => {
            if time <= keys[0].time {
                return (keys[0].rotation.to_mat3(), keys[0].translation);
            }
            for w in keys.windows(2) {
                if time <= w[1].time {
                    let span = w[1].time - w[0].time;
                    let t = if span > 0.0 { (time - w[0].time) / span } else { 1.0 };
                    let q = w[0].rotation.slerp(w[1].rotation, t);
                    return (q.to_mat3(), w[0].translation.lerp(w[1].translation, t));
                }
            }
            let k = keys[keys.len() - 1];
            (k.rotation.to_mat3(), k.translation)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub name: String,
    /// Geometry in object coordinates; flags mark walls and scatterers.
    pub mesh: TriangleMesh,
    pub material: Material,
    pub keyframes: Vec<Keyframe>,
    /// Analytic sphere description in object coordinates, used by the
    /// oracle field provider. Empty for arbitrary meshes.
    pub spheres: Vec<SphereScatterer>,
}

impl SceneObject {
    pub fn new(name: impl Into<String>, mesh: TriangleMesh, material: Material) -> Self {
        SceneObject {
            name: name.into(),
            mesh,
            material,
            keyframes: Vec::new(),
            spheres: Vec::new(),
        }
    }

    pub fn flags(&self) -> ObjectFlags {
        self.mesh.flags
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Source {
    pub position: Vec3,
    /// Emitted power per band in watts.
    pub power: [f64; NUM_BANDS],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ListenerKey {
    pub time: f64,
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Listener {
    pub position: Vec3,
    /// Radius of the sphere that catches specular paths.
    pub radius: f64,
    /// Optional motion; overrides `position` when non-empty.
    pub keyframes: Vec<ListenerKey>,
}

impl Listener {
    pub fn at(position: Vec3) -> Self {
        Listener {
            position,
            radius: DEFAULT_DETECTOR_RADIUS,
            keyframes: Vec::new(),
        }
    }

    pub fn position_at(&self, time: f64) -> Vec3 {
        let k = &self.keyframes;
        match k.len() {
            0 => self.position,
            1 => k[0].position,
            _ => {
                if time <= k[0].time {
                    return k[0].position;
                }
                for w in k.windows(2) {
                    if time <= w[1].time {
                        let span = w[1].time - w[0].time;
                        let t = if span > 0.0 { (time - w[0].time) / span } else { 1.0 };
                        return w[0].position.lerp(w[1].position, t);
                    }
                }
                k[k.len() - 1].position
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SimConfig {
    pub n_rays: usize,
    pub max_order: usize,
    pub bin_width: f64,
    pub ir_length: f64,
    pub seed: u64,
    pub sound_speed: f64,
    /// Apply the visibility-switched gain to occluded low-band paths.
    pub compensation: bool,
    /// Bounce after which Russian roulette starts.
    pub roulette_depth: usize,
    /// Survival threshold as a fraction of the ray's initial energy.
    pub roulette_threshold: f64,
    /// Worker threads (only used with the `std` feature).
    pub threads: usize,
    /// Frame times in seconds.
    pub frames: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_rays: 100_000,
            max_order: MAX_ORDER,
            bin_width: DEFAULT_BIN_WIDTH,
            ir_length: DEFAULT_LENGTH,
            seed: 0,
            sound_speed: SPEED_OF_SOUND,
            compensation: true,
            roulette_depth: 50,
            roulette_threshold: 1e-3,
            threads: 1,
            frames: alloc::vec![0.0],
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rays == 0 {
            return Err(Error::invalid("n_rays must be at least 1"));
        }
        if self.max_order > MAX_ORDER {
            return Err(Error::invalid(format!("max_order is capped at {MAX_ORDER}")));
        }
        if !(self.bin_width > 0.0) || !(self.ir_length >= self.bin_width) {
            return Err(Error::invalid("need 0 < bin_width <= ir_length"));
        }
        if !(self.sound_speed > 0.0) || !(self.roulette_threshold > 0.0) {
            return Err(Error::invalid("sound speed and roulette threshold must be positive"));
        }
        if self.frames.is_empty() || self.frames.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("need at least one finite frame time"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub source: Source,
    pub listener: Listener,
    pub sim: SimConfig,
}

impl Scene {
    /// Free field with unit power in every band.
    pub fn empty(source: Vec3, listener: Vec3) -> Self {
        Scene {
            objects: Vec::new(),
            source: Source {
                position: source,
                power: [1.0; NUM_BANDS],
            },
            listener: Listener::at(listener),
            sim: SimConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        for o in &self.objects {
            o.material.validate()?;
            if o.keyframes.windows(2).any(|w| !(w[0].time <= w[1].time)) {
                return Err(Error::InvalidScene(format!("keyframes of '{}' are not sorted", o.name)));
            }
        }
        if self.source.power.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidScene("source power must be finite and non-negative".into()));
        }
        if !(self.listener.radius > 0.0) {
            return Err(Error::InvalidScene("listener radius must be positive".into()));
        }
        if !self.source.position.is_finite() || !self.listener.position.is_finite() {
            return Err(Error::InvalidScene("non-finite source or listener position".into()));
        }
        Ok(())
    }
}

/// Object placed at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PosedObject {
    pub flags: ObjectFlags,
    pub material: Material,
    pub rotation: Mat3,
    pub translation: Vec3,
    /// Sphere description in world coordinates.
    pub spheres: Vec<SphereScatterer>,
}

/// Scene geometry at one instant, ready for ray queries.
#[derive(Debug, Clone)]
pub struct FrameScene {
    pub time: f64,
    pub objects: Vec<PosedObject>,
    pub source: Source,
    pub listener: Vec3,
    pub detector_radius: f64,
    /// Surface samples of every scatterer, for region extraction.
    pub surface: SurfaceIndex,
    bvh: Bvh,
}

impl FrameScene {
    /// Poses every object at `time`, rebuilds the BVH and spatial hash, and
    /// rejects a source or listener inside scatterer geometry.
    pub fn build(scene: &Scene, time: f64) -> Result<Self> {
        scene.validate()?;
        let mut tris = Vec::new();
        let mut objects = Vec::with_capacity(scene.objects.len());
        let mut surface = SurfaceIndex::new();
        for (oi, obj) in scene.objects.iter().enumerate() {
            let (rot, tr) = interpolate(&obj.keyframes, time);
            let posed = obj.mesh.transformed(&rot, tr);
            for i in 0..posed.triangles.len() {
                let [a, b, c] = posed.triangle(i);
                tris.push(Triangle::new(a, b, c, oi as u32));
            }
            if obj.flags().is_scatterer {
                let n = ((obj.mesh.area() * SURFACE_DENSITY) as usize).clamp(MIN_SURFACE_POINTS, MAX_SURFACE_POINTS);
                let pc = sample_surface(&obj.mesh, n, 0x5eed ^ oi as u64)?;
                let pts: Vec<Vec3> = pc.points.iter().map(|&p| rot * p + tr).collect();
                surface.insert(oi as u32, &pts);
            }
            let spheres = obj
                .spheres
                .iter()
                .map(|s| SphereScatterer::new(s.radius, rot * s.center + tr))
                .collect::<Result<Vec<_>>>()?;
            objects.push(PosedObject {
                flags: obj.flags(),
                material: obj.material,
                rotation: rot,
                translation: tr,
                spheres,
            });
        }
        let frame = FrameScene {
            time,
            objects,
            source: scene.source,
            listener: scene.listener.position_at(time),
            detector_radius: scene.listener.radius,
            surface,
            bvh: Bvh::build(tris),
        };
        for (what, p) in [("source", frame.source.position), ("listener", frame.listener)] {
            if let Some(o) = frame.inside_scatterer(p) {
                return Err(Error::InvalidScene(format!(
                    "{what} at ({:.3}, {:.3}, {:.3}) lies inside object {o}",
                    p.x, p.y, p.z
                )));
            }
        }
        Ok(frame)
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn is_empty(&self) -> bool {
        self.bvh.is_empty()
    }

    pub fn triangle(&self, hit: &Hit) -> &Triangle {
        &self.bvh.triangles()[hit.triangle]
    }

    /// Scatterer whose closed surface encloses `p`, by ray parity along a
    /// fixed skew direction.
    pub fn inside_scatterer(&self, p: Vec3) -> Option<usize> {
        let dir = Vec3::new(0.5773, 0.5774, 0.5775).normalized();
        let mut hits = Vec::new();
        self.bvh.all_hits(p, dir, f64::INFINITY, &mut hits);
        let mut counts = alloc::vec![0usize; self.objects.len()];
        for h in &hits {
            counts[h.object as usize] += 1;
        }
        counts
            .iter()
            .enumerate()
            .find(|&(o, &c)| self.objects[o].flags.is_scatterer && c % 2 == 1)
            .map(|(o, _)| o)
    }
}

/// Whether the segment `a–b` crosses no triangle of the frame.
pub fn visibility(a: Vec3, b: Vec3, scene: &FrameScene) -> bool {
    scene.bvh.segment_clear(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_scene(center: Vec3, radius: f64) -> Scene {
        let mut s = Scene::empty(Vec3::new(-3.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0));
        let mesh = TriangleMesh::sphere(center, radius, 3, ObjectFlags::SCATTERER).unwrap();
        s.objects.push(SceneObject::new("ball", mesh, Material::default()));
        s
    }

    #[test]
    fn visibility_examples() {
        let f = FrameScene::build(&Scene::empty(Vec3::ZERO, Vec3::X), 0.0).unwrap();
        assert!(visibility(Vec3::ZERO, Vec3::new(5.0, 1.0, 0.0), &f));
        let f = FrameScene::build(&sphere_scene(Vec3::ZERO, 0.5), 0.0).unwrap();
        assert!(!visibility(Vec3::new(-3.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0), &f));
        let y = 0.5 + 1e-3;
        assert!(visibility(Vec3::new(-3.0, y, 0.0), Vec3::new(3.0, y, 0.0), &f));
    }

    #[test]
    fn listener_inside_scatterer_is_rejected() {
        let s = sphere_scene(Vec3::new(3.0, 0.0, 0.0), 1.0);
        assert!(matches!(FrameScene::build(&s, 0.0), Err(Error::InvalidScene(_))));
        let s = sphere_scene(Vec3::ZERO, 1.0);
        assert!(FrameScene::build(&s, 0.0).unwrap().surface.len() >= MIN_SURFACE_POINTS);
    }

    #[test]
    fn keyframes_interpolate() {
        let keys = [
            Keyframe {
                time: 0.0,
                translation: Vec3::ZERO,
                rotation: Quat::IDENTITY,
            },
            Keyframe {
                time: 2.0,
                translation: Vec3::new(2.0, 0.0, 0.0),
                rotation: Quat::from_axis_angle(Vec3::Z, core::f64::consts::FRAC_PI_2),
            },
        ];
        let (r, t) = interpolate(&keys, 1.0);
        assert!((t - Vec3::X).norm() < 1e-12);
        let v = r * Vec3::X;
        let h = core::f64::consts::FRAC_PI_4;
        assert!((v - Vec3::new(h.cos(), h.sin(), 0.0)).norm() < 1e-12);
        assert_eq!(interpolate(&keys, 5.0).1, Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(interpolate(&[], 1.0).1, Vec3::ZERO);
        let mut l = Listener::at(Vec3::ZERO);
        l.keyframes = alloc::vec![
            ListenerKey { time: 0.0, position: Vec3::ZERO },
            ListenerKey { time: 1.0, position: Vec3::Y },
        ];
        assert_eq!(l.position_at(0.5), Vec3::Y * 0.5);
    }

    #[test]
    fn material_bounds() {
        assert!(Material::uniform(1.1, 0.0).validate().is_err());
        assert!(Material::uniform(0.5, -0.1).validate().is_err());
        assert!(Material::uniform(1.0, 1.0).validate().is_ok());
    }
}
