#![cfg(unix)]

use std::os::unix::fs::PermissionsExt;
use std::path::Path;

use cadloop::external::{ExternalReconstructor, ExternalRenderer};
use cadloop::meshio::save_mesh;
use cadloop_core::mesh::sample_surface;
use cadloop_core::refine::{RenderError, Renderer};
use cadloop_core::scan::{ScanError, SurfaceReconstructor};
use cadloop_core::{TriangleMesh, Vec3};

fn script(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path.display().to_string()
}

#[test]
fn renderer_runs_the_tool_and_loads_its_output() {
    let dir = tempfile::tempdir().unwrap();
    let cube = TriangleMesh::cuboid(Vec3::splat(-5.0), Vec3::splat(5.0));
    let fixture = dir.path().join("cube.ply");
    save_mesh(&cube, &fixture).unwrap();
    // Succeeds only for programs mentioning "cube".
    let tool = script(
        dir.path(),
        "render.sh",
        &format!("grep -q cube \"$1\" && cp {} \"$2\"", fixture.display()),
    );
    let r = ExternalRenderer { command: tool };
    assert_eq!(r.render("a cube").unwrap(), cube);
    assert!(matches!(r.render("a sphere"), Err(RenderError::Render(_))));
    assert!(matches!(r.compile("  "), Err(RenderError::Compile(_))));
    let missing = ExternalRenderer {
        command: dir.path().join("nope").display().to_string(),
    };
    assert!(matches!(
        missing.render("a cube"),
        Err(RenderError::Render(_))
    ));
}

#[test]
fn reconstructor_passes_oriented_points() {
    let dir = tempfile::tempdir().unwrap();
    let cube = TriangleMesh::cuboid(Vec3::splat(-5.0), Vec3::splat(5.0));
    let fixture = dir.path().join("cube.obj");
    save_mesh(&cube, &fixture).unwrap();
    let seen = dir.path().join("seen.ply");
    let tool = script(
        dir.path(),
        "recon.sh",
        &format!(
            "cp \"$1\" {} && cp {} \"$2\"",
            seen.display(),
            fixture.display()
        ),
    );
    let pts = sample_surface(&cube, 200, 1).unwrap();
    let out = ExternalReconstructor { command: tool }.reconstruct(&pts, 32);
    // The output path ends in .ply but holds OBJ text, which the PLY reader rejects.
    assert!(matches!(out, Err(ScanError::ExternalTool(_))));
    assert_eq!(cadloop::meshio::read_ply_points(&seen).unwrap(), pts);

    let fixture = dir.path().join("cube.ply");
    save_mesh(&cube, &fixture).unwrap();
    let tool = script(
        dir.path(),
        "recon2.sh",
        &format!("cp {} \"$2\"", fixture.display()),
    );
    assert_eq!(
        ExternalReconstructor { command: tool }
            .reconstruct(&pts, 32)
            .unwrap(),
        cube
    );
    let failing = script(dir.path(), "fail.sh", "echo boom >&2; exit 4");
    let err = ExternalReconstructor { command: failing }
        .reconstruct(&pts, 32)
        .unwrap_err();
    assert!(
        matches!(&err, ScanError::ExternalTool(m) if m.contains("boom")),
        "{err}"
    );
}
