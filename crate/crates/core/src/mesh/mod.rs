//! Triangle meshes and the geometric queries every other module builds on.

mod bvh;
mod isosurface;
mod kdtree;
pub(crate) mod raster2d;
mod sample;
mod voxel;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{self, Vec3};

pub use bvh::{closest_point_on_triangle, NearestHit, SurfaceIndex};
pub use isosurface::{extract_isosurface, ScalarGrid};
pub use kdtree::KdTree;
pub use sample::{sample_surface, sample_surface_with_triangles};
pub use voxel::{voxelize_in, voxelize_occupancy, OccupancyGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("malformed geometry: {0}")]
    MalformedGeometry(String),
    #[error("mesh has zero surface area")]
    ZeroAreaMesh,
    #[error("bounding box has zero extent")]
    DegenerateExtent,
    #[error("non-finite geometry")]
    NonFiniteGeometry,
    #[error("resolution {0} outside the supported range")]
    InvalidResolution(usize),
}

/// A surface sample with the normal of the triangle it was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSample {
    pub position: Vec3,
    pub normal: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y && min.z <= max.z);
        Self { min, max }
    }

    /// Smallest box containing all points; `None` for an empty iterator.
    pub fn from_points<I: IntoIterator<Item = Vec3>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), p| (lo.min(p), hi.max(p)));
        Some(Self { min, max })
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.y >= self.min.y
            && p.z >= self.min.z
            && p.x <= self.max.x
            && p.y <= self.max.y
            && p.z <= self.max.z
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_squared(&self, p: Vec3) -> f64 {
        let d = (self.min - p).max(Vec3::ZERO).max(p - self.max);
        d.norm_squared()
    }

    /// Cube sharing this box's center whose side is the longest extent.
    pub fn bounding_cube(&self) -> Aabb {
        let half = self.extent().max_component() * 0.5;
        let c = self.center();
        Aabb {
            min: c - Vec3::splat(half),
            max: c + Vec3::splat(half),
        }
    }
}

/// Target frame of a [`NormalizationTransform`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Isotropic fit into `[0,1]^3`, touching on the longest axis, centered on the others.
    UnitCube01,
    /// Isotropic fit into `[-1,1]^3`.
    SignedCube11,
    /// Pure scale by 1/100, mapping the `[-100,100]^3` program domain onto `[-1,1]^3`.
    PredictionOver100,
}

/// `p -> p * scale + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub scale: f64,
    pub translation: Vec3,
    pub frame: Frame,
}

impl NormalizationTransform {
    pub fn identity(frame: Frame) -> Self {
        Self {
            scale: 1.0,
            translation: Vec3::ZERO,
            frame,
        }
    }

    /// Transform mapping `aabb` into `frame`.
    pub fn for_aabb(aabb: &Aabb, frame: Frame) -> Result<Self, MeshError> {
        let longest = aabb.extent().max_component();
        if !(longest > 0.0) {
            return Err(MeshError::DegenerateExtent);
        }
        let c = aabb.center();
        Ok(match frame {
            Frame::UnitCube01 => {
                let scale = 1.0 / longest;
                Self {
                    scale,
                    translation: Vec3::splat(0.5) - c * scale,
                    frame,
                }
            }
            Frame::SignedCube11 => {
                let scale = 2.0 / longest;
                Self {
                    scale,
                    translation: -(c * scale),
                    frame,
                }
            }
            Frame::PredictionOver100 => Self {
                scale: 0.01,
                translation: Vec3::ZERO,
                frame,
            },
        })
    }

    #[inline]
    pub fn apply(&self, p: Vec3) -> Vec3 {
        p * self.scale + self.translation
    }

    #[inline]
    pub fn invert(&self, p: Vec3) -> Vec3 {
        (p - self.translation) / self.scale
    }
}

/// Indexed triangle surface with per-face unit normals derived from winding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    face_normals: Vec<Vec3>,
}

impl TriangleMesh {
    /// Builds a mesh, rejecting out-of-range or repeated indices, non-finite
    /// coordinates, zero-area faces and empty triangle lists.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        Self::build(vertices, triangles, false)
    }

    /// Like [`TriangleMesh::new`] but silently drops zero-area faces.
    pub fn new_dropping_degenerate(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<Self, MeshError> {
        Self::build(vertices, triangles, true)
    }

    fn build(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        drop_degenerate: bool,
    ) -> Result<Self, MeshError> {
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(MeshError::MalformedGeometry(format!(
                "vertex {i} is not finite"
            )));
        }
        let n = vertices.len() as u64;
        let mut kept = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        for (ti, t) in triangles.into_iter().enumerate() {
            if t.iter().any(|&i| i as u64 >= n) {
                return Err(MeshError::MalformedGeometry(format!(
                    "triangle {ti} references a missing vertex"
                )));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                if drop_degenerate {
                    continue;
                }
                return Err(MeshError::MalformedGeometry(format!(
                    "triangle {ti} repeats a vertex index"
                )));
            }
            let [a, b, c] = t.map(|i| vertices[i as usize]);
            match (b - a).cross(c - a).normalized() {
                Some(nrm) => {
                    kept.push(t);
                    normals.push(nrm);
                }
                None if drop_degenerate => {}
                None => {
                    return Err(MeshError::MalformedGeometry(format!(
                        "triangle {ti} has zero area"
                    )))
                }
            }
        }
        if kept.is_empty() {
            return Err(MeshError::MalformedGeometry("mesh has no triangles".into()));
        }
        Ok(Self {
            vertices,
            triangles: kept,
            face_normals: normals,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn face_normals(&self) -> &[Vec3] {
        &self.face_normals
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    #[inline]
    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        self.triangles[i].map(|v| self.vertices[v as usize])
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        0.5 * (b - a).cross(c - a).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| self.triangle_area(i))
            .sum()
    }

    pub fn aabb(&self) -> Aabb {
        // Non-empty by construction.
        Aabb::from_points(self.vertices.iter().copied()).expect("mesh has vertices")
    }

    /// Signed enclosed volume by the divergence theorem (positive for
    /// outward-facing closed meshes).
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                a.dot(b.cross(c)) / 6.0
            })
            .sum()
    }

    /// Returns a copy with every vertex mapped through `t`.
    pub fn transformed(&self, t: &NormalizationTransform) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|&v| t.apply(v)).collect(),
            triangles: self.triangles.clone(),
            face_normals: self.face_normals.clone(),
        }
    }

    /// Same geometry with triangles in a different order (`order` must be a
    /// permutation of the triangle indices).
    pub fn with_triangle_order(&self, order: &[usize]) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.clone(),
            triangles: order.iter().map(|&i| self.triangles[i]).collect(),
            face_normals: order.iter().map(|&i| self.face_normals[i]).collect(),
        }
    }

    /// Keeps only the triangles for which `keep` is true and drops unused vertices.
    pub fn retain_triangles<F: FnMut(usize) -> bool>(&self, mut keep: F) -> Option<TriangleMesh> {
        let mut remap = alloc::vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut normals = Vec::new();
        for (i, t) in self.triangles.iter().enumerate() {
            if !keep(i) {
                continue;
            }
            let mapped = t.map(|v| {
                let slot = &mut remap[v as usize];
                if *slot == u32::MAX {
                    *slot = vertices.len() as u32;
                    vertices.push(self.vertices[v as usize]);
                }
                *slot
            });
            triangles.push(mapped);
            normals.push(self.face_normals[i]);
        }
        if triangles.is_empty() {
            None
        } else {
            Some(TriangleMesh {
                vertices,
                triangles,
                face_normals: normals,
            })
        }
    }

    /// Concatenates two meshes without welding.
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let off = self.vertices.len() as u32;
        let mut out = self.clone();
        out.vertices.extend_from_slice(&other.vertices);
        out.triangles
            .extend(other.triangles.iter().map(|t| t.map(|v| v + off)));
        out.face_normals.extend_from_slice(&other.face_normals);
        out
    }

    /// Undirected edges with the number of incident triangles.
    pub fn edge_incidence(&self) -> BTreeMap<(u32, u32), u32> {
        let mut edges = BTreeMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Edges used by exactly one triangle.
    pub fn boundary_edge_count(&self) -> usize {
        self.edge_incidence().values().filter(|&&c| c == 1).count()
    }

    /// V - E + F over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let edges = self.edge_incidence();
        let mut used = alloc::vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                used[v as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - edges.len() as i64 + self.triangles.len() as i64
    }

    /// Axis-aligned box as 12 outward-facing triangles.
    pub fn cuboid(min: Vec3, max: Vec3) -> TriangleMesh {
        let c = |i: usize| {
            Vec3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        };
        let vertices: Vec<Vec3> = (0..8).map(c).collect();
        let quads: [[u32; 4]; 6] = [
            [0, 2, 3, 1], // -z
            [4, 5, 7, 6], // +z
            [0, 1, 5, 4], // -y
            [2, 6, 7, 3], // +y
            [0, 4, 6, 2], // -x
            [1, 3, 7, 5], // +x
        ];
        let mut triangles = Vec::with_capacity(12);
        for q in quads {
            triangles.push([q[0], q[1], q[2]]);
            triangles.push([q[0], q[2], q[3]]);
        }
        TriangleMesh::new(vertices, triangles).expect("cuboid extents must be positive")
    }

    /// Latitude/longitude sphere with outward normals.
    pub fn uv_sphere(center: Vec3, radius: f64, segments: usize, rings: usize) -> TriangleMesh {
        assert!(segments >= 3 && rings >= 2);
        let mut vertices = Vec::new();
        vertices.push(center + Vec3::new(0.0, 0.0, radius));
        for r in 1..rings {
            let theta = core::f64::consts::PI * r as f64 / rings as f64;
            for s in 0..segments {
                let phi = 2.0 * core::f64::consts::PI * s as f64 / segments as f64;
                let st = math::sin(theta);
                vertices.push(
                    center
                        + Vec3::new(st * math::cos(phi), st * math::sin(phi), math::cos(theta))
                            * radius,
                );
            }
        }
        let south = vertices.len() as u32;
        vertices.push(center - Vec3::new(0.0, 0.0, radius));
        let ring = |r: usize, s: usize| (1 + (r - 1) * segments + s % segments) as u32;
        let mut triangles = Vec::new();
        for s in 0..segments {
            triangles.push([0, ring(1, s), ring(1, s + 1)]);
        }
        for r in 1..rings - 1 {
            for s in 0..segments {
                let (a, b) = (ring(r, s), ring(r, s + 1));
                let (c, d) = (ring(r + 1, s), ring(r + 1, s + 1));
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
        }
        for s in 0..segments {
            triangles.push([south, ring(rings - 1, s + 1), ring(rings - 1, s)]);
        }
        TriangleMesh::new(vertices, triangles).expect("sphere radius must be positive")
    }
}

/// Fits `mesh` into `frame` and returns the mapped mesh with its transform.
pub fn normalize(
    mesh: &TriangleMesh,
    frame: Frame,
) -> Result<(TriangleMesh, NormalizationTransform), MeshError> {
    let t = NormalizationTransform::for_aabb(&mesh.aabb(), frame)?;
    Ok((mesh.transformed(&t), t))
}

/// Fits an arbitrary mesh into the `[-100, 100]^3` program domain: the
/// `[-1, 1]^3` fit scaled by 100. Scaling the result by 1/100 therefore
/// reproduces the `SignedCube11` normalization exactly up to rounding.
pub fn fit_to_program_domain(mesh: &TriangleMesh) -> Result<TriangleMesh, MeshError> {
    let t = NormalizationTransform::for_aabb(&mesh.aabb(), Frame::SignedCube11)?;
    let t = NormalizationTransform {
        scale: t.scale * 100.0,
        translation: t.translation * 100.0,
        frame: Frame::SignedCube11,
    };
    Ok(mesh.transformed(&t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_bad_indices_and_empty() {
        let v = vec![
            Vec3::ZERO,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        assert!(matches!(
            TriangleMesh::new(v.clone(), vec![[0, 1, 3]]),
            Err(MeshError::MalformedGeometry(_))
        ));
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 1]]).is_err());
        assert!(TriangleMesh::new(v.clone(), vec![]).is_err());
        let mut bad = v.clone();
        bad[1].x = f64::NAN;
        assert!(TriangleMesh::new(bad, vec![[0, 1, 2]]).is_err());
        assert!(TriangleMesh::new(v, vec![[0, 1, 2]]).is_ok());
    }

    #[test]
    fn cube_is_closed_and_outward() {
        let m = TriangleMesh::cuboid(Vec3::ZERO, Vec3::splat(1.0));
        assert_eq!(m.triangle_count(), 12);
        assert_eq!(m.boundary_edge_count(), 0);
        assert_eq!(m.euler_characteristic(), 2);
        assert!((m.signed_volume() - 1.0).abs() < 1e-12);
        for n in m.face_normals() {
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_is_closed_and_outward() {
        let m = TriangleMesh::uv_sphere(Vec3::ZERO, 1.0, 24, 12);
        assert_eq!(m.boundary_edge_count(), 0);
        assert_eq!(m.euler_characteristic(), 2);
        assert!(m.signed_volume() > 3.9 && m.signed_volume() < 4.19);
    }

    #[test]
    fn prediction_frame_maps_domain_to_signed_unit() {
        let m = TriangleMesh::cuboid(Vec3::splat(-100.0), Vec3::splat(100.0));
        let (n, t) = normalize(&m, Frame::PredictionOver100).unwrap();
        assert_eq!(t.translation, Vec3::ZERO);
        let bb = n.aabb();
        assert_eq!(bb.min, Vec3::splat(-1.0));
        assert_eq!(bb.max, Vec3::splat(1.0));
    }

    #[test]
    fn unit_cube_is_a_fixed_point() {
        let m = TriangleMesh::cuboid(Vec3::ZERO, Vec3::splat(1.0));
        let (n, t) = normalize(&m, Frame::UnitCube01).unwrap();
        assert_eq!(t.scale, 1.0);
        assert_eq!(t.translation, Vec3::ZERO);
        assert_eq!(n.vertices(), m.vertices());
    }

    #[test]
    fn long_box_is_centered_on_short_axes() {
        let m = TriangleMesh::cuboid(Vec3::ZERO, Vec3::new(2.0, 1.0, 1.0));
        let (n, t) = normalize(&m, Frame::UnitCube01).unwrap();
        assert_eq!(t.scale, 0.5);
        let bb = n.aabb();
        assert!((bb.min.x - 0.0).abs() < 1e-12 && (bb.max.x - 1.0).abs() < 1e-12);
        assert!((bb.min.y - 0.25).abs() < 1e-12 && (bb.max.y - 0.75).abs() < 1e-12);
        assert!((bb.min.z - 0.25).abs() < 1e-12 && (bb.max.z - 0.75).abs() < 1e-12);
    }

    #[test]
    fn point_mesh_extent_is_rejected() {
        let bb = Aabb::new(Vec3::splat(1.0), Vec3::splat(1.0));
        assert_eq!(
            NormalizationTransform::for_aabb(&bb, Frame::UnitCube01),
            Err(MeshError::DegenerateExtent)
        );
    }

    #[test]
    fn signed_frame_fits_unit_box() {
        let m = TriangleMesh::cuboid(Vec3::new(3.0, -1.0, 2.0), Vec3::new(7.0, 1.0, 3.0));
        let (n, _) = normalize(&m, Frame::SignedCube11).unwrap();
        let bb = n.aabb();
        assert!((bb.min.x + 1.0).abs() < 1e-12 && (bb.max.x - 1.0).abs() < 1e-12);
        assert!((bb.min.y + 0.5).abs() < 1e-12);
    }
}
