use sphrecon::io::obj::{parse_obj, read_mesh_obj, read_points_obj, write_mesh_obj, write_points_obj};
use sphrecon::io::tensor::{read_tensor, Tensor, TensorData};
use sphrecon::io::{
    read_depth, read_spherical_map, read_voxel_grid, write_depth, write_spherical_map, write_voxel_grid,
};
use sphrecon::primitives::{generate_primitive, Primitive};
use sphrecon::rng::SeqRng;
use sphrecon::{DepthMap, Error, Extent, PointCloud, SphericalMap, Vec3, VoxelGrid};

fn voxb_bytes(code: u32, shape: &[u64], payload: &[u8]) -> Vec<u8> {
    let mut b = b"VOXB".to_vec();
    b.extend(1u32.to_le_bytes());
    b.extend(code.to_le_bytes());
    b.extend((shape.len() as u32).to_le_bytes());
    for d in shape {
        b.extend(d.to_le_bytes());
    }
    b.extend_from_slice(payload);
    b
}

#[test]
fn tensor_layout_is_little_endian_with_header() {
    let values = [1.5f32, -2.0, 0.25, 8.0, 0.0, 3.0];
    let payload: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    let bytes = voxb_bytes(0, &[2, 3], &payload);
    let t = Tensor::from_bytes(&bytes).unwrap();
    assert_eq!(t.shape(), &[2, 3]);
    assert_eq!(t.data(), &TensorData::F32(values.to_vec()));
    let mut written = Vec::new();
    t.write_to(&mut written).unwrap();
    assert_eq!(written, bytes);

    let u8s = Tensor::from_bytes(&voxb_bytes(1, &[4], &[0, 1, 1, 0])).unwrap();
    assert_eq!(u8s.into_u8().unwrap(), vec![0, 1, 1, 0]);
}

#[test]
fn malformed_tensors_are_rejected_with_io_exit_code() {
    let good = voxb_bytes(0, &[2], &[0; 8]);
    let cases: Vec<Vec<u8>> = vec![
        b"VOX".to_vec(),
        {
            let mut b = good.clone();
            b[0] = b'X';
            b
        },
        voxb_bytes(7, &[2], &[0; 8]),
        voxb_bytes(0, &[3], &[0; 8]),
        good[..good.len() - 1].to_vec(),
        voxb_bytes(0, &[u64::MAX, 4], &[]),
    ];
    for (i, bytes) in cases.iter().enumerate() {
        let err = Tensor::from_bytes(bytes).unwrap_err();
        assert_eq!(err.exit_code(), 4, "case {i}: {err}");
    }
}

#[test]
fn voxel_grid_round_trips_with_extent() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.voxb");
    let mut rng = SeqRng::new(31);
    let extent = Extent::new(Vec3::new(0.1, -0.2, 0.3), 1.7).unwrap();
    let g = VoxelGrid::new(5, extent, (0..125).map(|_| rng.uniform(0.0, 1.0) as f32).collect()).unwrap();
    write_voxel_grid(&path, &g).unwrap();
    assert_eq!(read_voxel_grid(&path).unwrap(), g);
    // a sidecar that disagrees with the tensor is corruption, a missing one is I/O
    let sidecar = dir.path().join("g.json");
    let text = std::fs::read_to_string(&sidecar).unwrap().replace("\"resolution\": 5", "\"resolution\": 4");
    std::fs::write(&sidecar, text).unwrap();
    assert!(matches!(read_voxel_grid(&path), Err(Error::Corruption(_))));
    std::fs::remove_file(&sidecar).unwrap();
    assert_eq!(read_voxel_grid(&path).unwrap_err().exit_code(), 4);
    assert_eq!(read_tensor(&path).unwrap().shape(), &[5, 5, 5]);
}

#[test]
fn spherical_map_round_trips_with_mask() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.voxb");
    let mut rng = SeqRng::new(32);
    let values: Vec<f32> = (0..48).map(|_| rng.uniform(0.0, 1.0) as f32).collect();
    let mask: Vec<bool> = (0..48).map(|i| i % 3 != 0).collect();
    let values: Vec<f32> = values.iter().zip(&mask).map(|(&v, &m)| if m { v } else { 0.0 }).collect();
    let s = SphericalMap::new(8, 6, values, mask).unwrap();
    write_spherical_map(&path, &s).unwrap();
    assert_eq!(read_spherical_map(&path).unwrap(), s);
}

#[test]
fn depth_round_trips_through_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SeqRng::new(33);
    let (w, h) = (7, 5);
    let mask: Vec<bool> = (0..w * h).map(|_| rng.next_f64() < 0.7).collect();
    let values: Vec<f32> = mask.iter().map(|&m| if m { rng.uniform(0.5, 3.0) as f32 } else { 0.0 }).collect();
    let d = DepthMap::new(w, h, values, mask).unwrap();
    for name in ["d.pfm", "d.voxb"] {
        let path = dir.path().join(name);
        write_depth(&path, &d).unwrap();
        assert_eq!(read_depth(&path, None).unwrap(), d, "{name}");
    }
    // PFM stores rows bottom to top
    let bytes = std::fs::read(dir.path().join("d.pfm")).unwrap();
    let header = format!("Pf\n{w} {h}\n-1.0\n");
    assert!(bytes.starts_with(header.as_bytes()), "{:?}", String::from_utf8_lossy(&bytes[..16]));
    let body = &bytes[header.len()..];
    let first = f32::from_le_bytes(body[..4].try_into().unwrap());
    let expected = d.get(0, h - 1).unwrap_or(0.0);
    assert_eq!(first, expected);
}

#[test]
fn obj_round_trips_meshes_and_points() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = generate_primitive(&Primitive::Torus { major: 0.3, minor: 0.1 }, 12).unwrap();
    let path = dir.path().join("m.obj");
    write_mesh_obj(&path, &mesh).unwrap();
    assert_eq!(read_mesh_obj(&path).unwrap(), mesh);

    let pc = PointCloud::new(vec![Vec3::new(0.1, 1e-17, -3.5), Vec3::new(1.0 / 3.0, 2.0, 0.0)]).unwrap();
    let path = dir.path().join("p.obj");
    write_points_obj(&path, &pc).unwrap();
    assert_eq!(read_points_obj(&path).unwrap(), pc);
}

#[test]
fn obj_parser_handles_common_variants() {
    let text = "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nvn 0 0 1\nf 1/1/1 2//1 3\nf -4 -2 -3\n";
    let (v, t) = parse_obj(text).unwrap();
    assert_eq!(v.len(), 4);
    assert_eq!(t, vec![[0, 1, 2], [0, 2, 1]]);
    // quads are fanned
    let (_, t) = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
    assert_eq!(t, vec![[0, 1, 2], [0, 2, 3]]);
    for bad in ["v 0 0\n", "v 0 0 0\nf 1 2 5\n", "v a b c\n"] {
        assert!(matches!(parse_obj(bad), Err(Error::Format(_))), "{bad:?}");
    }
}
