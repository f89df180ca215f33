mod common;

use proptest::prelude::*;
use sphrecon::geometry::point_mesh_distance;
use sphrecon::primitives::{generate_primitive, Primitive};
use sphrecon::spherical::{cell_direction, inpaint_spherical, mesh_to_spherical, spherical_to_pointcloud, InpaintConfig};
use sphrecon::{Pose, SphericalMap, Vec3};

fn offset_sphere(center: Vec3, r: f64, tess: usize) -> sphrecon::TriangleMesh {
    let pose = Pose::new(sphrecon::Mat3::identity(), center).unwrap();
    generate_primitive(&Primitive::Sphere { radius: r }, tess)
        .unwrap()
        .transformed(&pose)
}

#[test]
fn centered_sphere_gives_constant_map() {
    let mesh = generate_primitive(&Primitive::Sphere { radius: 0.5 }, 128).unwrap();
    let smap = mesh_to_spherical(&mesh, 160, 160).unwrap();
    assert!(smap.is_fully_observed());
    for &v in smap.values() {
        assert!((v as f64 - 0.5).abs() < 2e-3, "{v}");
    }
}

#[test]
fn cube_face_example() {
    let mesh = generate_primitive(&Primitive::Cube { side: 0.6 }, 8).unwrap();
    let smap = mesh_to_spherical(&mesh, 5, 5).unwrap();
    // cell (2, 2) looks along -x onto the face at x = -0.3
    assert!((smap.get(2, 2).unwrap() as f64 - 0.7).abs() < 1e-6);
}

#[test]
fn offset_sphere_matches_analytic_rays() {
    let (c, r) = (Vec3::new(0.2, -0.1, 0.05), 0.4);
    let mesh = offset_sphere(c, r, 128);
    let (n_lon, n_lat) = (48, 32);
    let smap = mesh_to_spherical(&mesh, n_lon, n_lat).unwrap();
    assert!(smap.is_fully_observed());
    for lat in 0..n_lat {
        for lon in 0..n_lon {
            let d = cell_direction(lon, lat, n_lon, n_lat);
            let t = common::ray_sphere(&(d - c), &-d, r).unwrap();
            let v = smap.get(lon, lat).unwrap() as f64;
            assert!((v - t).abs() < 2e-3, "cell ({lon},{lat}): {v} vs {t}");
        }
    }
}

#[test]
fn rays_that_reach_the_origin_leave_cells_unobserved() {
    let (c, r) = (Vec3::new(0.6, 0.0, 0.0), 0.2);
    let mesh = offset_sphere(c, r, 64);
    let smap = mesh_to_spherical(&mesh, 32, 16).unwrap();
    assert!(smap.observed_count() > 0);
    assert!(!smap.is_fully_observed());
    for lat in 0..16 {
        for lon in 0..32 {
            let d = cell_direction(lon, lat, 32, 16);
            // segment from d to the origin against a slightly shrunk and grown sphere
            let hits = |radius: f64| {
                common::ray_sphere(&(d - c), &-d, radius).is_some_and(|t| t <= 1.0)
            };
            let observed = smap.get(lon, lat).is_some();
            if hits(r * 0.98) {
                assert!(observed, "cell ({lon},{lat})");
            }
            if !hits(r * 1.02) {
                assert!(!observed, "cell ({lon},{lat})");
            }
        }
    }
}

#[test]
fn back_projected_points_lie_on_the_mesh() {
    let mesh = generate_primitive(&Primitive::Torus { major: 0.3, minor: 0.12 }, 32).unwrap();
    let tilt = Pose::from_axis_angle(Vec3::new(1.0, 0.3, 0.0), 0.7, Vec3::zeros()).unwrap();
    let mesh = mesh.transformed(&tilt);
    let smap = mesh_to_spherical(&mesh, 40, 30).unwrap();
    let pc = spherical_to_pointcloud(&smap);
    assert_eq!(pc.len(), smap.observed_count());
    for p in pc.points() {
        assert!(point_mesh_distance(p, &mesh) < 1e-5);
    }
}

#[test]
fn rotation_about_the_pole_shifts_columns() {
    let n_lon = 24;
    let mesh = offset_sphere(Vec3::new(0.25, 0.1, -0.1), 0.45, 96);
    let rot = Pose::from_axis_angle(Vec3::z(), std::f64::consts::TAU / n_lon as f64, Vec3::zeros()).unwrap();
    let a = mesh_to_spherical(&mesh, n_lon, 12).unwrap();
    let b = mesh_to_spherical(&mesh.transformed(&rot), n_lon, 12).unwrap();
    for lat in 0..12 {
        for lon in 0..n_lon {
            let va = a.get(lon, lat).unwrap();
            let vb = b.get((lon + 1) % n_lon, lat).unwrap();
            assert!((va - vb).abs() < 1e-5, "({lon},{lat}): {va} vs {vb}");
        }
    }
}

#[test]
fn seam_fill_is_linear_across_the_wrap() {
    let (n_lon, n_lat) = (16, 6);
    let mut values = vec![0.0f32; n_lon * n_lat];
    let mut mask = vec![false; n_lon * n_lat];
    for lat in 0..n_lat {
        values[lat * n_lon] = 0.2;
        values[lat * n_lon + 8] = 0.6;
        mask[lat * n_lon] = true;
        mask[lat * n_lon + 8] = true;
    }
    let smap = SphericalMap::new(n_lon, n_lat, values, mask).unwrap();
    let cfg = InpaintConfig { tolerance: 1e-12, max_iters: 100_000 };
    let out = inpaint_spherical(&smap, &cfg).unwrap();
    assert!(out.converged);
    for lat in 0..n_lat {
        for lon in 0..n_lon {
            // distance around the ring to column 0, then linear between 0.2 and 0.6
            let d = lon.min(n_lon - lon) as f64;
            let expected = 0.2 + 0.4 * d / 8.0;
            let got = out.map.get(lon, lat).unwrap() as f64;
            assert!((got - expected).abs() < 1e-6, "({lon},{lat}): {got} vs {expected}");
        }
    }
    assert!((out.map.get(12, 0).unwrap() as f64 - 0.4).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn inpainting_obeys_the_maximum_principle(
        n_lon in 4usize..20,
        n_lat in 4usize..16,
        seed in any::<u64>(),
        density in 0.05f64..0.9,
    ) {
        let mut rng = sphrecon::rng::SeqRng::new(seed);
        let n = n_lon * n_lat;
        let values: Vec<f32> = (0..n).map(|_| rng.uniform(0.0, 1.0) as f32).collect();
        let mut mask: Vec<bool> = (0..n).map(|_| rng.next_f64() < density).collect();
        mask[(seed % n as u64) as usize] = true;
        let smap = SphericalMap::new(n_lon, n_lat, values.clone(), mask.clone()).unwrap();
        let out = inpaint_spherical(&smap, &InpaintConfig::default()).unwrap();
        let observed: Vec<f32> = (0..n).filter(|&i| mask[i]).map(|i| values[i]).collect();
        let lo = observed.iter().copied().fold(f32::INFINITY, f32::min);
        let hi = observed.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        prop_assert!(out.map.is_fully_observed());
        for i in 0..n {
            let v = out.map.values()[i];
            if mask[i] {
                prop_assert_eq!(v.to_bits(), values[i].to_bits());
            } else {
                prop_assert!(v >= lo && v <= hi, "cell {} = {} outside [{}, {}]", i, v, lo, hi);
            }
        }
    }
}
