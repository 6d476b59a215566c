use cadloop::meshio::{
    load_mesh, read_mesh, read_ply_points, save_mesh, write_ply_points, MeshFormat, MeshIoError,
};
use cadloop_core::mesh::sample_surface;
use cadloop_core::{TriangleMesh, Vec3};

const CUBE_OBJ: &str = "\
# unit cube, quads
v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1
f 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 4 1 5 8
";

const TETRA_STL: &str = "solid t
facet normal 0 0 0
 outer loop
  vertex 0 0 0
  vertex 0 1 0
  vertex 1 0 0
 endloop
endfacet
facet normal 0 0 0
 outer loop
  vertex 0 0 0
  vertex 1 0 0
  vertex 0 0 1
 endloop
endfacet
facet normal 0 0 0
 outer loop
  vertex 0 0 0
  vertex 0 0 1
  vertex 0 1 0
 endloop
endfacet
facet normal 0 0 0
 outer loop
  vertex 1 0 0
  vertex 0 1 0
  vertex 0 0 1
 endloop
endfacet
endsolid t
";

#[test]
fn quad_cube_obj_is_triangulated() {
    let m = read_mesh(CUBE_OBJ.as_bytes(), MeshFormat::Obj).unwrap();
    assert_eq!((m.vertices().len(), m.triangle_count()), (8, 12));
    assert!((m.signed_volume() - 1.0).abs() < 1e-12);
    assert_eq!(m.boundary_edge_count(), 0);
}

#[test]
fn ascii_stl_tetrahedron_has_unit_normals() {
    let m = read_mesh(TETRA_STL.as_bytes(), MeshFormat::Stl).unwrap();
    assert_eq!((m.vertices().len(), m.triangle_count()), (4, 4));
    for n in m.face_normals() {
        assert!((n.norm() - 1.0).abs() < 1e-12);
    }
    assert!((m.signed_volume() - 1.0 / 6.0).abs() < 1e-6);
}

#[test]
fn empty_and_missing_files_are_reported() {
    for f in [MeshFormat::Obj, MeshFormat::Stl, MeshFormat::Ply] {
        assert!(
            matches!(read_mesh(b"", f), Err(MeshIoError::MalformedGeometry(_))),
            "{f:?}"
        );
    }
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.obj");
    assert!(matches!(load_mesh(&missing), Err(MeshIoError::FileNotFound(p)) if p == missing));
    assert!(matches!(
        load_mesh(&dir.path().join("x.gltf")),
        Err(MeshIoError::UnsupportedFormat(_))
    ));
    assert!(matches!(
        read_mesh(b"v 0 0 0\nf 1 2 3\n", MeshFormat::Obj),
        Err(MeshIoError::MalformedGeometry(_))
    ));
}

#[test]
fn save_load_round_trips() {
    let sphere = TriangleMesh::uv_sphere(Vec3::new(0.1, -2.0, 3.3), 7.25, 24, 12);
    let dir = tempfile::tempdir().unwrap();
    for ext in ["obj", "ply"] {
        let path = dir.path().join(format!("s.{ext}"));
        save_mesh(&sphere, &path).unwrap();
        assert_eq!(load_mesh(&path).unwrap(), sphere, "{ext}");
    }
    let path = dir.path().join("s.stl");
    save_mesh(&sphere, &path).unwrap();
    let back = load_mesh(&path).unwrap();
    assert_eq!(back.triangle_count(), sphere.triangle_count());
    for (a, b) in back.vertices().iter().zip(sphere.vertices()) {
        assert!(a.distance(*b) < 1e-5);
    }
}

#[test]
fn oriented_points_round_trip_through_ply() {
    let cube = TriangleMesh::cuboid(Vec3::splat(-1.0), Vec3::splat(1.0));
    let pts = sample_surface(&cube, 50, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ply");
    let mut f = std::fs::File::create(&path).unwrap();
    write_ply_points(&pts, &mut f).unwrap();
    drop(f);
    assert_eq!(read_ply_points(&path).unwrap(), pts);
    save_mesh(&cube, &path).unwrap();
    assert!(matches!(
        read_ply_points(&path),
        Err(MeshIoError::MalformedGeometry(_))
    ));
}
