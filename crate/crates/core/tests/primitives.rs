use std::collections::HashSet;
use std::f64::consts::{PI, TAU};

use sphrecon::primitives::{generate_primitive, Primitive};
use sphrecon::TriangleMesh;

fn euler(mesh: &TriangleMesh) -> i64 {
    let mut edges = HashSet::new();
    for t in mesh.triangles() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    mesh.vertices().len() as i64 - edges.len() as i64 + mesh.triangles().len() as i64
}

/// Divergence-theorem volume, written out per triangle.
fn volume(mesh: &TriangleMesh) -> f64 {
    mesh.triangles()
        .iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| mesh.vertices()[i as usize]);
            a.dot(&b.cross(&c)) / 6.0
        })
        .sum()
}

#[test]
fn sphere_vertices_lie_on_the_radius() {
    for tess in [8, 17, 64] {
        let m = generate_primitive(&Primitive::Sphere { radius: 0.5 }, tess).unwrap();
        for v in m.vertices() {
            assert!((v.norm() - 0.5).abs() < 1e-6);
        }
        assert_eq!(euler(&m), 2);
    }
}

#[test]
fn cube_has_twelve_triangles_and_unit_volume() {
    let m = generate_primitive(&Primitive::Cube { side: 1.0 }, 8).unwrap();
    assert_eq!(m.triangles().len(), 12);
    assert_eq!(m.vertices().len(), 8);
    assert!((volume(&m) - 1.0).abs() < 1e-12);
    assert_eq!(euler(&m), 2);
    for v in m.vertices() {
        assert!(v.iter().all(|c| c.abs() == 0.5));
    }
}

#[test]
fn prism_and_pyramid_volumes_are_exact() {
    let (r, h) = (0.3, 0.8);
    for n in [8usize, 13, 64] {
        let base = 0.5 * n as f64 * r * r * (TAU / n as f64).sin();
        let cyl = generate_primitive(&Primitive::Cylinder { radius: r, height: h }, n).unwrap();
        assert!((volume(&cyl) - base * h).abs() < 1e-12);
        assert_eq!(euler(&cyl), 2);
        let cone = generate_primitive(&Primitive::Cone { radius: r, height: h }, n).unwrap();
        assert!((volume(&cone) - base * h / 3.0).abs() < 1e-12);
        assert_eq!(euler(&cone), 2);
    }
}

#[test]
fn torus_has_genus_one_and_converging_volume() {
    let (big, small) = (0.35, 0.12);
    let m = generate_primitive(&Primitive::Torus { major: big, minor: small }, 96).unwrap();
    assert_eq!(euler(&m), 0);
    let exact = 2.0 * PI * PI * big * small * small;
    assert!((volume(&m) - exact).abs() / exact < 0.01);
    for v in m.vertices() {
        let ring = ((v.x * v.x + v.y * v.y).sqrt() - big).hypot(v.z);
        assert!((ring - small).abs() < 1e-12);
    }
}

#[test]
fn primitive_specs_parse_from_json() {
    let p: Primitive = serde_json::from_str(r#"{"kind": "cone", "radius": 0.4, "height": 0.9}"#).unwrap();
    assert_eq!(p, Primitive::Cone { radius: 0.4, height: 0.9 });
    assert!(serde_json::from_str::<Primitive>(r#"{"kind": "cone", "radius": 0.4}"#).is_err());
    assert!(serde_json::from_str::<Primitive>(r#"{"kind": "cube", "side": 1, "x": 2}"#).is_err());
}
