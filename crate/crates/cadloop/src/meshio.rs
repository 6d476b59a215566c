//! Mesh files: OBJ, STL (binary and ASCII) and ASCII PLY.
//!
//! Loaded meshes keep 64-bit coordinates, drop zero-area faces and get
//! their normals from the winding. STL output is binary with 32-bit floats;
//! OBJ and PLY output print shortest round-trip decimals.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Write};
use std::path::{Path, PathBuf};

use cadloop_core::mesh::{MeshError, PointSample};
use cadloop_core::{TriangleMesh, Vec3};
use ply_rs::ply::{DefaultElement, Property};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshIoError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed geometry: {0}")]
    MalformedGeometry(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<MeshError> for MeshIoError {
    fn from(e: MeshError) -> Self {
        MeshIoError::MalformedGeometry(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Stl,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self, MeshIoError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "stl" => Ok(MeshFormat::Stl),
            "ply" => Ok(MeshFormat::Ply),
            _ => Err(MeshIoError::UnsupportedFormat(path.display().to_string())),
        }
    }
}

fn build(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<TriangleMesh, MeshIoError> {
    if triangles.is_empty() {
        return Err(MeshIoError::MalformedGeometry("no triangles".into()));
    }
    Ok(TriangleMesh::new_dropping_degenerate(vertices, triangles)?)
}

pub fn load_mesh(path: &Path) -> Result<TriangleMesh, MeshIoError> {
    let format = MeshFormat::from_path(path)?;
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(MeshIoError::FileNotFound(path.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    read_mesh(&bytes, format)
}

pub fn read_mesh(bytes: &[u8], format: MeshFormat) -> Result<TriangleMesh, MeshIoError> {
    match format {
        MeshFormat::Obj => read_obj(bytes),
        MeshFormat::Stl => read_stl(bytes),
        MeshFormat::Ply => read_ply(bytes),
    }
}

fn read_obj(bytes: &[u8]) -> Result<TriangleMesh, MeshIoError> {
    let opts = tobj::LoadOptions {
        single_index: true,
        triangulate: true,
        ..Default::default()
    };
    let (models, _) = tobj::load_obj_buf(&mut BufReader::new(bytes), &opts, |_| {
        Err(tobj::LoadError::OpenFileFailed)
    })
    .map_err(|e| MeshIoError::MalformedGeometry(format!("OBJ: {e}")))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for m in models {
        let base = vertices.len() as u32;
        vertices.extend(
            m.mesh
                .positions
                .chunks_exact(3)
                .map(|p| Vec3::new(p[0], p[1], p[2])),
        );
        triangles.extend(
            m.mesh
                .indices
                .chunks_exact(3)
                .map(|t| [t[0] + base, t[1] + base, t[2] + base]),
        );
    }
    build(vertices, triangles)
}

fn read_stl(bytes: &[u8]) -> Result<TriangleMesh, MeshIoError> {
    if bytes.is_empty() {
        return Err(MeshIoError::MalformedGeometry("empty STL".into()));
    }
    let mesh = stl_io::read_stl(&mut Cursor::new(bytes))
        .map_err(|e| MeshIoError::MalformedGeometry(format!("STL: {e}")))?;
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64))
        .collect();
    let triangles = mesh
        .faces
        .iter()
        .map(|f| f.vertices.map(|i| i as u32))
        .collect();
    build(vertices, triangles)
}

fn number(p: Option<&Property>) -> Option<f64> {
    Some(match p? {
        Property::Float(v) => *v as f64,
        Property::Double(v) => *v,
        Property::Int(v) => *v as f64,
        Property::UInt(v) => *v as f64,
        Property::Short(v) => *v as f64,
        Property::UShort(v) => *v as f64,
        Property::Char(v) => *v as f64,
        Property::UChar(v) => *v as f64,
        _ => return None,
    })
}

fn index_list(p: Option<&Property>) -> Option<Vec<u32>> {
    Some(match p? {
        Property::ListInt(v) => v.iter().map(|&i| i as u32).collect(),
        Property::ListUInt(v) => v.clone(),
        Property::ListShort(v) => v.iter().map(|&i| i as u32).collect(),
        Property::ListUShort(v) => v.iter().map(|&i| i as u32).collect(),
        Property::ListChar(v) => v.iter().map(|&i| i as u32).collect(),
        Property::ListUChar(v) => v.iter().map(|&i| i as u32).collect(),
        _ => return None,
    })
}

fn parse_ply(bytes: &[u8]) -> Result<ply_rs::ply::Ply<DefaultElement>, MeshIoError> {
    let parser = ply_rs::parser::Parser::<DefaultElement>::new();
    parser
        .read_ply(&mut BufReader::new(bytes))
        .map_err(|e| MeshIoError::MalformedGeometry(format!("PLY: {e}")))
}

fn ply_vertices(
    ply: &ply_rs::ply::Ply<DefaultElement>,
) -> Result<Vec<(Vec3, Option<Vec3>)>, MeshIoError> {
    let bad = || MeshIoError::MalformedGeometry("PLY vertex without x, y, z".into());
    ply.payload
        .get("vertex")
        .map(|vs| {
            vs.iter()
                .map(|v| {
                    let p = Vec3::new(
                        number(v.get("x")).ok_or_else(bad)?,
                        number(v.get("y")).ok_or_else(bad)?,
                        number(v.get("z")).ok_or_else(bad)?,
                    );
                    let n = match (
                        number(v.get("nx")),
                        number(v.get("ny")),
                        number(v.get("nz")),
                    ) {
                        (Some(x), Some(y), Some(z)) => Some(Vec3::new(x, y, z)),
                        _ => None,
                    };
                    Ok((p, n))
                })
                .collect()
        })
        .unwrap_or_else(|| Ok(Vec::new()))
}

fn read_ply(bytes: &[u8]) -> Result<TriangleMesh, MeshIoError> {
    let ply = parse_ply(bytes)?;
    let vertices = ply_vertices(&ply)?.into_iter().map(|(p, _)| p).collect();
    let mut triangles = Vec::new();
    for f in ply.payload.get("face").map(Vec::as_slice).unwrap_or(&[]) {
        let idx = index_list(f.get("vertex_indices").or_else(|| f.get("vertex_index")))
            .ok_or_else(|| MeshIoError::MalformedGeometry("PLY face without indices".into()))?;
        // Fan triangulation of polygons.
        for k in 1..idx.len().saturating_sub(1) {
            triangles.push([idx[0], idx[k], idx[k + 1]]);
        }
    }
    build(vertices, triangles)
}

/// Reads an oriented point set from a PLY file with `nx ny nz` properties.
pub fn read_ply_points(path: &Path) -> Result<Vec<PointSample>, MeshIoError> {
    let ply = parse_ply(&std::fs::read(path)?)?;
    ply_vertices(&ply)?
        .into_iter()
        .map(|(position, n)| {
            let normal =
                n.ok_or_else(|| MeshIoError::MalformedGeometry("PLY point without normal".into()))?;
            Ok(PointSample { position, normal })
        })
        .collect()
}

pub fn save_mesh(mesh: &TriangleMesh, path: &Path) -> Result<(), MeshIoError> {
    let format = MeshFormat::from_path(path)?;
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        MeshFormat::Obj => write_obj(mesh, &mut w)?,
        MeshFormat::Stl => write_stl(mesh, &mut w)?,
        MeshFormat::Ply => write_ply(mesh, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

pub fn write_obj<W: Write>(mesh: &TriangleMesh, w: &mut W) -> std::io::Result<()> {
    for v in mesh.vertices() {
        writeln!(w, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for t in mesh.triangles() {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

pub fn write_stl<W: Write>(mesh: &TriangleMesh, w: &mut W) -> std::io::Result<()> {
    let f = |v: Vec3| stl_io::Vector::new([v.x as f32, v.y as f32, v.z as f32]);
    let tris: Vec<stl_io::Triangle> = (0..mesh.triangle_count())
        .map(|i| stl_io::Triangle {
            normal: f(mesh.face_normals()[i]),
            vertices: mesh.triangle(i).map(f),
        })
        .collect();
    stl_io::write_stl(w, tris.iter())
}

pub fn write_ply<W: Write>(mesh: &TriangleMesh, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "ply\nformat ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertices().len())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    writeln!(w, "element face {}", mesh.triangle_count())?;
    writeln!(w, "property list uchar int vertex_indices\nend_header")?;
    for v in mesh.vertices() {
        writeln!(w, "{:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

/// ASCII PLY of oriented points, the input format of external reconstructors.
pub fn write_ply_points<W: Write>(points: &[PointSample], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "ply\nformat ascii 1.0\nelement vertex {}", points.len())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    writeln!(
        w,
        "property double nx\nproperty double ny\nproperty double nz\nend_header"
    )?;
    for s in points {
        let (p, n) = (s.position, s.normal);
        writeln!(
            w,
            "{:?} {:?} {:?} {:?} {:?} {:?}",
            p.x, p.y, p.z, n.x, n.y, n.z
        )?;
    }
    Ok(())
}
