//! Monte Carlo ray propagation over scenes of walls and scatterers.
//!
//! Rays leave the source uniformly and carry energy in seven octave bands.
//! Wall hits absorb `α`, reflect specularly or diffusely and connect to the
//! listener by next-event estimation. Scatterer hits split the ray: bands up
//! to 1 kHz follow the object's scattering field, the others reflect
//! geometrically. Paths that cross a scatterer on their way to the listener
//! keep `1 − p²` of their low-band energy, where `p` is the forward lobe of
//! the field. Specular chains are caught by a small detector sphere.

pub mod asf;
pub mod bvh;
pub mod histogram;
pub mod scene;
pub mod trace;

pub use asf::{AsfCache, AsfFields, AsfProvider, BandFields, NetworkAsf, NoAsf, OracleAsf};
pub use histogram::{histograms_csv, EnergyHistogram, DEFAULT_BIN_WIDTH, DEFAULT_LENGTH};
pub use scene::{
    interpolate, visibility, FrameScene, Keyframe, Listener, ListenerKey, Material, PosedObject, Scene, SceneObject,
    SimConfig, Source, MAX_ORDER,
};
pub use trace::{
    cosine_direction, mc_estimate, reflect, scatter_event, scatter_gain, trace, trace_scene, Bands, Reflection,
    ScatterOutcome, SurfaceHit, TraceOutput, TraceStats,
};

#[cfg(test)]
mod tests {
    #[allow(unused_imports)]
    use num_traits::Float;
    use alloc::vec;
    use core::f64::consts::PI;

    use super::*;
    use crate::geom::Vec3;
    use crate::pointcloud::{ObjectFlags, TriangleMesh};
    use crate::shfield::SHCoefficients;
    use crate::{rng, Mat3, NUM_BANDS};

    fn quick(scene: &mut Scene, rays: usize) {
        scene.sim.n_rays = rays;
        scene.sim.ir_length = 0.5;
    }

    fn wall_scene(alpha: f64) -> Scene {
        let mut s = Scene::empty(Vec3::new(0.0, 0.0, 1.0), Vec3::new(2.0, 0.0, 1.0));
        let floor = TriangleMesh::cuboid(Vec3::new(-10.0, -10.0, -0.1), Vec3::new(10.0, 10.0, 0.0), ObjectFlags::WALL).unwrap();
        s.objects.push(SceneObject::new("floor", floor, Material::uniform(alpha, 0.5)));
        quick(&mut s, 4000);
        s
    }

    #[test]
    fn empty_scene_has_only_the_direct_path() {
        let mut s = Scene::empty(Vec3::ZERO, Vec3::new(3.5, 0.0, 0.0));
        quick(&mut s, 100);
        let out = trace_scene(&s, &NoAsf).unwrap().remove(0);
        for h in &out.histograms {
            let nz: alloc::vec::Vec<_> = h.bins.iter().enumerate().filter(|b| *b.1 > 0.0).collect();
            assert_eq!(nz.len(), 1);
            // 3.5 m at 343 m/s is 10.2 ms
            assert_eq!(nz[0].0, 10);
            let expect = 1.0 / (4.0 * PI * 3.5 * 3.5);
            assert!((nz[0].1 - expect).abs() < 1e-15);
        }
        assert_eq!(out.stats.escaped, 100);
    }

    #[test]
    fn absorbing_wall_leaves_the_direct_path() {
        let free = {
            let mut s = Scene::empty(Vec3::new(0.0, 0.0, 1.0), Vec3::new(2.0, 0.0, 1.0));
            quick(&mut s, 10);
            trace_scene(&s, &NoAsf).unwrap().remove(0)
        };
        let walled = trace_scene(&wall_scene(1.0), &NoAsf).unwrap().remove(0);
        assert_eq!(free.histograms, walled.histograms);
    }

    #[test]
    fn energy_is_monotone_in_absorption() {
        let mut prev = f64::INFINITY;
        for a in [0.0, 0.2, 0.5, 0.8, 1.0] {
            let out = trace_scene(&wall_scene(a), &NoAsf).unwrap().remove(0);
            let total: f64 = out.band_totals().iter().sum();
            assert!(total <= prev, "alpha {a}: {total} > {prev}");
            prev = total;
        }
    }

    #[test]
    fn thread_count_does_not_change_the_result() {
        let mut s = wall_scene(0.3);
        s.sim.n_rays = 5000;
        let a = trace_scene(&s, &NoAsf).unwrap();
        s.sim.threads = 3;
        let b = trace_scene(&s, &NoAsf).unwrap();
        assert_eq!(a, b);
        s.sim.seed = 9;
        assert_ne!(a, trace_scene(&s, &NoAsf).unwrap());
    }

    #[test]
    fn reflect_examples() {
        let mut r = rng::seeded(3);
        let hit = SurfaceHit {
            point: Vec3::ZERO,
            normal: -Vec3::Z,
            incoming: Vec3::new(1.0, 0.5, -2.0).normalized(),
        };
        let e = [1.0; NUM_BANDS];
        let spec = reflect(&hit, &e, &Material::uniform(0.25, 0.0), &mut r);
        assert!(!spec.diffuse);
        let n = Vec3::Z;
        assert!((spec.direction.dot(n) + hit.incoming.dot(n)).abs() < 1e-12);
        assert!((spec.direction.cross(n) - hit.incoming.cross(n)).norm() < 1e-12);
        assert_eq!(spec.energy, [0.75; NUM_BANDS]);
        let dead = reflect(&hit, &e, &Material::uniform(1.0, 0.5), &mut r);
        assert_eq!(dead.energy, [0.0; NUM_BANDS]);
        let diff = reflect(&hit, &e, &Material::uniform(0.0, 1.0), &mut r);
        assert!(diff.diffuse && diff.direction.z > 0.0);
    }

    fn constant_fields(p: f64) -> AsfFields {
        let mut c = SHCoefficients::zeros(3, 125.0);
        c.coeffs[0] = p * (4.0 * PI).sqrt();
        AsfFields {
            coeffs: [Some(c.clone()), Some(c.clone()), Some(c.clone()), Some(c)],
            rotation: Mat3::IDENTITY,
        }
    }

    #[test]
    fn scatter_event_examples() {
        let mut r = rng::seeded(4);
        let e = [1.0; NUM_BANDS];
        let out = scatter_event(&e, &constant_fields(0.0), false, &mut r);
        for b in 0..4 {
            assert!((out.values[b] - 1.0).abs() < 1e-12);
            assert!(!out.geometric[b]);
        }
        assert!(out.geometric[4..].iter().all(|&g| g));
        assert_eq!(out.values[4..], [0.0; 3]);

        let f = constant_fields(1.0);
        let mut vals = vec![];
        let mut pdfs = vec![];
        for _ in 0..1000 {
            let o = scatter_event(&e, &f, true, &mut r);
            vals.push(o.values[0]);
            pdfs.push(o.pdf);
        }
        assert!((mc_estimate(&vals, &pdfs).unwrap() - 4.0 * PI).abs() < 1e-9);
        for p in [0.0, 0.3, 0.77, 1.0, 1.5, -0.2] {
            assert_eq!(scatter_gain(p, true) + scatter_gain(p, false), 1.0);
        }
    }

    #[test]
    fn mc_estimate_rejects_bad_input() {
        assert_eq!(mc_estimate(&[2.0, 2.0], &[0.5, 0.5]).unwrap(), 4.0);
        assert!(mc_estimate(&[1.0], &[0.0]).is_err());
        assert!(mc_estimate(&[1.0], &[1.0, 1.0]).is_err());
        assert!(mc_estimate(&[], &[]).is_err());
    }

    fn ball_scene(compensation: bool, provider_spheres: bool) -> Scene {
        let mut s = Scene::empty(Vec3::new(-4.0, 0.0, 0.0), Vec3::new(4.0, 0.0, 0.0));
        let mesh = TriangleMesh::sphere(Vec3::ZERO, 0.5, 3, ObjectFlags::SCATTERER).unwrap();
        let mut o = SceneObject::new("ball", mesh, Material::uniform(0.1, 0.1));
        if provider_spheres {
            o.spheres.push(crate::oracle::SphereScatterer::centered(0.5).unwrap());
        }
        s.objects.push(o);
        s.sim.compensation = compensation;
        quick(&mut s, 2000);
        s
    }

    #[test]
    fn occluded_direct_path_keeps_low_bands_only_with_compensation() {
        let oracle = OracleAsf::new().unwrap();
        let on = trace_scene(&ball_scene(true, true), &oracle).unwrap().remove(0);
        let off = trace_scene(&ball_scene(false, true), &oracle).unwrap().remove(0);
        // 8 m at 343 m/s lands in bin 23
        let d = on.histograms[0].bins[23];
        let free = 1.0 / (4.0 * PI * 64.0);
        assert!(d > 0.5 * free && d < free, "{d} vs {free}");
        assert_eq!(on.histograms[6].bins[23], 0.0);
        assert_eq!(off.histograms[0].bins[23], 0.0);
        assert!(on.stats.scatter_events > 0);
        assert_eq!(off.stats.asf_fallbacks, 0);
    }

    #[test]
    fn missing_fields_fall_back_to_geometry() {
        let out = trace_scene(&ball_scene(true, false), &OracleAsf::new().unwrap()).unwrap().remove(0);
        assert!(out.stats.asf_fallbacks > 0);
        assert_eq!(out.stats.scatter_events, 0);
        assert_eq!(out.histograms[0].bins[23], 0.0);
    }

    #[test]
    fn source_inside_scatterer_is_an_error() {
        let mut s = ball_scene(true, true);
        s.source.position = Vec3::new(0.1, 0.0, 0.0);
        assert!(matches!(trace_scene(&s, &NoAsf), Err(crate::Error::InvalidScene(_))));
    }
}
