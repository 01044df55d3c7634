//! JSON scene files and the geometric stand-ins for the benchmark scenes.
//!
//! Objects take their geometry from an OBJ file (`obj_path`, relative to the
//! scene file) or from an inline `shape`. Scatterers may list analytic
//! `spheres` for the oracle field provider.

use std::path::Path;

use asfnet_core::oracle::SphereScatterer;
use asfnet_core::pointcloud::{ObjectFlags, TriangleMesh};
use asfnet_core::propagate::{Keyframe, Listener, ListenerKey, Material, Scene, SceneObject, SimConfig, Source};
use asfnet_core::{Quat, Vec3, NUM_BANDS};
use serde::{Deserialize, Serialize};

use crate::error::{ToolError, ToolResult};
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub objects: Vec<ObjectSpec>,
    pub source: SourceSpec,
    pub listener: ListenerSpec,
    #[serde(default)]
    pub sim: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obj_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
    pub flags: ObjectFlags,
    #[serde(default)]
    pub material: Material,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keyframes: Vec<KeyframeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spheres: Vec<SphereScatterer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    Cuboid { min: Vec3, max: Vec3 },
    Sphere { center: Vec3, radius: f64, #[serde(default = "default_level")] level: u32 },
    /// Two triangles over four corners given in order.
    Quad { corners: [Vec3; 4] },
}

fn default_level() -> u32 {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyframeSpec {
    pub time: f64,
    #[serde(default)]
    pub translation: Vec3,
    /// Unit quaternion `[w, x, y, z]`.
    #[serde(default = "identity")]
    pub rotation: Quat,
}

fn identity() -> Quat {
    Quat::IDENTITY
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub position: Vec3,
    #[serde(default = "unit_power")]
    pub power: [f64; NUM_BANDS],
}

fn unit_power() -> [f64; NUM_BANDS] {
    [1.0; NUM_BANDS]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ListenerSpec {
    pub position: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keyframes: Vec<ListenerKeySpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ListenerKeySpec {
    pub time: f64,
    pub position: Vec3,
}

impl Shape {
    pub fn mesh(&self, flags: ObjectFlags) -> asfnet_core::Result<TriangleMesh> {
        match *self {
            Shape::Cuboid { min, max } => TriangleMesh::cuboid(min, max, flags),
            Shape::Sphere { center, radius, level } => TriangleMesh::sphere(center, radius, level, flags),
            Shape::Quad { corners } => TriangleMesh::new(corners.to_vec(), vec![[0, 1, 2], [0, 2, 3]], flags),
        }
    }
}

impl SceneFile {
    /// Resolves geometry (OBJ paths relative to `base`) into a core scene.
    pub fn to_scene(&self, base: &Path) -> ToolResult<Scene> {
        let mut objects = Vec::with_capacity(self.objects.len());
        for (i, o) in self.objects.iter().enumerate() {
            let mesh = match (&o.obj_path, &o.shape) {
                (Some(p), None) => io::read_obj(&base.join(p), o.flags)?,
                (None, Some(s)) => s.mesh(o.flags)?,
                _ => {
                    return Err(ToolError::usage(format!(
                        "object {i} needs exactly one of obj_path and shape"
                    )))
                }
            };
            let name = if o.name.is_empty() { format!("object{i}") } else { o.name.clone() };
            let mut so = SceneObject::new(name, mesh, o.material);
            so.keyframes = o
                .keyframes
                .iter()
                .map(|k| Keyframe {
                    time: k.time,
                    translation: k.translation,
                    rotation: k.rotation.normalized(),
                })
                .collect();
            so.spheres = o.spheres.clone();
            objects.push(so);
        }
        let mut listener = Listener::at(self.listener.position);
        if let Some(r) = self.listener.radius {
            listener.radius = r;
        }
        listener.keyframes = self
            .listener
            .keyframes
            .iter()
            .map(|k| ListenerKey {
                time: k.time,
                position: k.position,
            })
            .collect();
        let scene = Scene {
            objects,
            source: Source {
                position: self.source.position,
                power: self.source.power,
            },
            listener,
            sim: self.sim.clone(),
        };
        scene.validate()?;
        Ok(scene)
    }
}

pub fn parse_scene(text: &str, path: &Path) -> ToolResult<SceneFile> {
    serde_json::from_str(text).map_err(|e| ToolError::parse(path, e))
}

/// Reads and resolves a scene file.
pub fn load_scene(path: &Path) -> ToolResult<Scene> {
    let file = parse_scene(&io::read_text(path)?, path)?;
    file.to_scene(path.parent().unwrap_or(Path::new(".")))
}

/// Known stand-in scenes.
pub const STANDINS: [&str; 2] = ["floor", "box"];

pub fn standin(name: &str) -> ToolResult<SceneFile> {
    match name {
        "floor" => Ok(floor_scene()),
        "box" => Ok(box_scene()),
        _ => Err(ToolError::usage(format!(
            "unknown stand-in {name:?} (known: {})",
            STANDINS.join(", ")
        ))),
    }
}

/// Open ground plane with a 1 m sound-hard ball between the source and a
/// listener that walks from the lit side into the ball's shadow over one
/// second.
pub fn floor_scene() -> SceneFile {
    let h = 20.0;
    let ball = Vec3::new(0.0, 0.0, 1.0);
    SceneFile {
        objects: vec![
            ObjectSpec {
                name: "floor".into(),
                obj_path: None,
                shape: Some(Shape::Quad {
                    corners: [
                        Vec3::new(-h, -h, 0.0),
                        Vec3::new(h, -h, 0.0),
                        Vec3::new(h, h, 0.0),
                        Vec3::new(-h, h, 0.0),
                    ],
                }),
                flags: ObjectFlags::WALL,
                material: Material::uniform(0.2, 0.1),
                keyframes: vec![],
                spheres: vec![],
            },
            ObjectSpec {
                name: "ball".into(),
                obj_path: None,
                shape: Some(Shape::Sphere {
                    center: ball,
                    radius: 1.0,
                    level: 3,
                }),
                flags: ObjectFlags::SCATTERER,
                material: Material::uniform(0.1, 0.1),
                keyframes: vec![],
                spheres: vec![SphereScatterer { radius: 1.0, center: ball }],
            },
        ],
        source: SourceSpec {
            position: Vec3::new(-4.0, 0.0, 1.0),
            power: unit_power(),
        },
        listener: ListenerSpec {
            position: Vec3::new(4.0, -4.0, 1.0),
            radius: None,
            keyframes: vec![
                ListenerKeySpec {
                    time: 0.0,
                    position: Vec3::new(4.0, -4.0, 1.0),
                },
                ListenerKeySpec {
                    time: 1.0,
                    position: Vec3::new(4.0, 0.0, 1.0),
                },
            ],
        },
        sim: SimConfig {
            frames: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            ..SimConfig::default()
        },
    }
}

/// Closed 5 × 4 × 3 m shoebox with uniform absorption 0.1.
pub fn box_scene() -> SceneFile {
    SceneFile {
        objects: vec![ObjectSpec {
            name: "room".into(),
            obj_path: None,
            shape: Some(Shape::Cuboid {
                min: Vec3::ZERO,
                max: Vec3::new(5.0, 4.0, 3.0),
            }),
            flags: ObjectFlags::WALL,
            material: Material::uniform(0.1, 0.3),
            keyframes: vec![],
            spheres: vec![],
        }],
        source: SourceSpec {
            position: Vec3::new(1.3, 1.1, 1.2),
            power: unit_power(),
        },
        listener: ListenerSpec {
            position: Vec3::new(3.6, 2.7, 1.7),
            radius: None,
            keyframes: vec![],
        },
        sim: SimConfig {
            n_rays: 20_000,
            ..SimConfig::default()
        },
    }
}
