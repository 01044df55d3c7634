use std::sync::Arc;

use asfnet_core::oracle::{compute_asf, scattered_pressure_at, ScatterConfig, SphereScatterer};
use asfnet_core::pointcloud::{
    align_incoming, extract_region, farthest_point_sample, region_center, Frame, PointCloud, SurfaceIndex,
    REGION_RADIUS,
};
use asfnet_core::propagate::{
    reflect, scatter_gain, trace_scene, Material, NoAsf, Scene, SceneObject, SurfaceHit,
};
use asfnet_core::pointcloud::{ObjectFlags, TriangleMesh};
use asfnet_core::regressor::{NetworkConfig, NetworkParams};
use asfnet_core::shfield::{project, weighted_nre, SHCoefficients, SphericalField};
use asfnet_core::sphgeom::{cart_to_sph, icosphere, icosphere_point_count, sph_to_cart, Direction};
use asfnet_core::{rng, Vec3, NUM_BANDS, SPEED_OF_SOUND};
use proptest::prelude::*;

fn unit() -> impl Strategy<Value = Vec3> {
    (-1.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(z, phi)| {
        let s = (1.0 - z * z).sqrt();
        Vec3::new(s * phi.cos(), s * phi.sin(), z)
    })
}

fn cloud(n: usize) -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0), n)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect())
}

#[test]
fn icosphere_counts_all_levels() {
    for level in 0..=6 {
        let g = icosphere(level).unwrap();
        assert_eq!(g.len(), icosphere_point_count(level));
        assert_eq!(g.len(), 10 * 4usize.pow(level) + 2);
        assert!(g.spacing_ratio() >= 0.7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spherical_round_trip(v in unit()) {
        prop_assume!(v.z.abs() < 1.0 - 1e-9);
        let d = cart_to_sph(v).unwrap();
        prop_assert!((sph_to_cart(d) - v).norm() < 1e-12);
        let again = cart_to_sph(sph_to_cart(d)).unwrap();
        prop_assert!((again.theta() - d.theta()).abs() < 1e-9);
    }

    #[test]
    fn projection_is_idempotent(c in prop::collection::vec(-0.1f64..0.1, 16)) {
        let grid = Arc::new(icosphere(3).unwrap());
        let mut coeffs = c;
        coeffs[0] = 0.5 * (4.0 * std::f64::consts::PI).sqrt();
        let sh = SHCoefficients::new(3, coeffs, 250.0).unwrap();
        let f1 = SphericalField::from_coefficients(grid.clone(), &sh, 5.0);
        let p1 = project(&f1, 3).unwrap();
        let f2 = SphericalField::from_coefficients(grid, &p1, 5.0);
        let p2 = project(&f2, 3).unwrap();
        for (a, b) in p1.coeffs.iter().zip(&p2.coeffs) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn nre_ignores_point_order(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::Rng;
        let grid = icosphere(2).unwrap();
        let mut r = rng::seeded(seed);
        let t: Vec<f64> = (0..grid.len()).map(|_| r.random_range(0.0..1.0)).collect();
        let p: Vec<f64> = (0..grid.len()).map(|_| r.random_range(0.0..1.0)).collect();
        let w = grid.weights().to_vec();
        let a = weighted_nre(&t, &p, &w).unwrap();
        let mut idx: Vec<usize> = (0..grid.len()).collect();
        idx.shuffle(&mut r);
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let b = weighted_nre(&pick(&t), &pick(&p), &pick(&w)).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        let scaled: Vec<f64> = p.iter().map(|x| 0.5 * x).collect();
        prop_assert!((weighted_nre(&t, &scaled, &w).unwrap() - a).abs() > 0.0);
    }

    #[test]
    fn fps_returns_a_subset(pts in cloud(60), n in 1usize..60, seed in any::<u64>()) {
        let pc = PointCloud::new(pts.clone(), Frame::World).unwrap();
        let out = farthest_point_sample(&pc, n, seed).unwrap();
        prop_assert_eq!(out.len(), n);
        for p in &out.points {
            prop_assert!(pts.contains(p));
        }
    }

    #[test]
    fn alignment_is_an_isometry(pts in cloud(20), d in unit()) {
        let pc = PointCloud::new(pts, Frame::World).unwrap();
        let dir = Direction::from_vector(d).unwrap();
        let out = align_incoming(&pc, dir);
        for i in 0..pc.len() {
            for j in 0..i {
                let a = pc.points[i].distance(pc.points[j]);
                let b = out.points[i].distance(out.points[j]);
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
        let rot = asfnet_core::pointcloud::alignment_rotation(sph_to_cart(dir));
        prop_assert!((rot * sph_to_cart(dir) - (-Vec3::X)).norm() < 1e-12);
    }

    #[test]
    fn region_membership_is_by_distance(pts in cloud(300), hit in cloud(1), d in unit()) {
        let mut index = SurfaceIndex::new();
        index.insert(0, &pts);
        let c = region_center(hit[0], d);
        prop_assert_eq!(c, hit[0] + d * 0.5);
        let inside: Vec<Vec3> = pts.iter().copied().filter(|p| p.distance(c) <= REGION_RADIUS).collect();
        prop_assert_eq!(index.within(c, REGION_RADIUS), inside.clone());
        match extract_region(&index, hit[0], d, 1) {
            Ok(r) => {
                prop_assert_eq!(r.len(), 1024);
                for p in &r.points {
                    prop_assert!(inside.iter().any(|q| q.distance(*p) < 1e-5));
                }
            }
            Err(_) => prop_assert!(inside.is_empty()),
        }
    }

    #[test]
    fn centred_sphere_is_axisymmetric(g in 0.0f64..std::f64::consts::PI, roll in 0.0f64..std::f64::consts::TAU) {
        let cfg = ScatterConfig::new(vec![SphereScatterer::centered(0.6).unwrap()], 500.0).unwrap();
        let dir = Vec3::new(-g.cos(), g.sin() * roll.cos(), g.sin() * roll.sin());
        let base = Vec3::new(-g.cos(), g.sin(), 0.0);
        let a = scattered_pressure_at(&cfg, dir * 3.0).unwrap().norm();
        let b = scattered_pressure_at(&cfg, base * 3.0).unwrap().norm();
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-30));
    }

    #[test]
    fn relabelling_spheres_is_bit_exact(x in -1.0f64..-0.7, y in 0.7f64..1.0, r1 in 0.2f64..0.5, r2 in 0.2f64..0.5) {
        let a = SphereScatterer::new(r1, Vec3::new(x, 0.1, 0.0)).unwrap();
        let b = SphereScatterer::new(r2, Vec3::new(y, -0.2, 0.3)).unwrap();
        let grid = Arc::new(icosphere(1).unwrap());
        let f1 = compute_asf(&ScatterConfig::new(vec![a, b], 250.0).unwrap(), &grid, 5.0).unwrap();
        let f2 = compute_asf(&ScatterConfig::new(vec![b, a], 250.0).unwrap(), &grid, 5.0).unwrap();
        prop_assert_eq!(f1.field.pressures(), f2.field.pressures());
    }

    #[test]
    fn wall_energy_is_scaled_by_one_minus_alpha(alpha in 0.0f64..=1.0, s in 0.0f64..=1.0, seed in any::<u64>(), d in unit()) {
        let mut r = rng::seeded(seed);
        let hit = SurfaceHit { point: Vec3::ZERO, normal: Vec3::Z, incoming: d };
        let e: [f64; NUM_BANDS] = [1.0, 2.0, 0.5, 0.0, 3.0, 1.5, 0.25];
        let out = reflect(&hit, &e, &Material::uniform(alpha, s), &mut r);
        for b in 0..NUM_BANDS {
            prop_assert_eq!(out.energy[b], e[b] * (1.0 - alpha));
        }
        prop_assert!((out.direction.norm() - 1.0).abs() < 1e-12);
        prop_assert!(out.direction.dot(hit.facing_normal()) >= 0.0);
    }

    #[test]
    fn eq6_branches_are_complementary(p in -0.5f64..1.5) {
        prop_assert_eq!(scatter_gain(p, true) + scatter_gain(p, false), 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn direct_path_delay_error_below_one_bin(s in cloud(1), l in cloud(1)) {
        let d = s[0].distance(l[0]);
        prop_assume!(d > 1e-3);
        let mut scene = Scene::empty(s[0], l[0]);
        scene.sim.n_rays = 1;
        scene.sim.ir_length = 0.1;
        let out = trace_scene(&scene, &NoAsf).unwrap().remove(0);
        let h = &out.histograms[0];
        let bin = h.bins.iter().position(|&e| e > 0.0).unwrap();
        let delay = d / SPEED_OF_SOUND;
        prop_assert!((bin as f64 * h.bin_width - delay).abs() < h.bin_width);
    }

    #[test]
    fn forward_is_permutation_invariant(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let cfg = NetworkConfig { n_points: 64, ..NetworkConfig::default() };
        let net = NetworkParams::init(cfg, seed).unwrap();
        let mut r = rng::seeded(seed ^ 1);
        let mut pts: Vec<Vec3> = (0..64)
            .map(|_| asfnet_core::sphgeom::uniform_unit_vector(&mut r) * 0.7)
            .collect();
        let a = net.forward(&pts).unwrap();
        pts.shuffle(&mut r);
        prop_assert_eq!(a, net.forward(&pts).unwrap());
    }
}

#[test]
fn histogram_energy_is_monotone_in_alpha() {
    let mut prev = f64::INFINITY;
    for k in 0..=10 {
        let alpha = k as f64 / 10.0;
        let mut s = Scene::empty(Vec3::new(1.0, 1.0, 1.0), Vec3::new(3.0, 2.5, 1.5));
        let room = TriangleMesh::cuboid(Vec3::ZERO, Vec3::new(4.0, 3.5, 2.5), ObjectFlags::WALL).unwrap();
        s.objects.push(SceneObject::new("room", room, Material::uniform(alpha, 0.4)));
        s.sim.n_rays = 500;
        s.sim.ir_length = 0.5;
        let total: f64 = trace_scene(&s, &NoAsf).unwrap()[0].band_totals().iter().sum();
        assert!(total <= prev, "alpha {alpha}");
        prev = total;
    }
}
