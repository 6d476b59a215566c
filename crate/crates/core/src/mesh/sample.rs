use alloc::vec::Vec;

use rand::Rng as _;

use super::{MeshError, PointSample, TriangleMesh};
use crate::math::{self, rng_from_seed};

/// Area-weighted uniform surface samples; deterministic in `(mesh, n, seed)`.
pub fn sample_surface(
    mesh: &TriangleMesh,
    n: usize,
    seed: u64,
) -> Result<Vec<PointSample>, MeshError> {
    sample_surface_with_triangles(mesh, n, seed).map(|(s, _)| s)
}

/// As [`sample_surface`], also returning the source triangle of each sample.
pub fn sample_surface_with_triangles(
    mesh: &TriangleMesh,
    n: usize,
    seed: u64,
) -> Result<(Vec<PointSample>, Vec<u32>), MeshError> {
    let mut cumulative = Vec::with_capacity(mesh.triangle_count());
    let mut total = 0.0;
    for i in 0..mesh.triangle_count() {
        total += mesh.triangle_area(i);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(MeshError::ZeroAreaMesh);
    }
    let mut rng = rng_from_seed(seed);
    let mut samples = Vec::with_capacity(n);
    let mut sources = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.random::<f64>() * total;
        let tri = cumulative
            .partition_point(|&c| c <= target)
            .min(cumulative.len() - 1);
        let r1 = math::sqrt(rng.random::<f64>());
        let r2: f64 = rng.random();
        let [a, b, c] = mesh.triangle(tri);
        let (wa, wb, wc) = (1.0 - r1, r1 * (1.0 - r2), r1 * r2);
        let position = a * wa + b * wb + c * wc;
        samples.push(PointSample {
            position,
            normal: mesh.face_normals()[tri],
        });
        sources.push(tri as u32);
    }
    Ok((samples, sources))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use alloc::vec;

    #[test]
    fn cube_faces_get_area_share() {
        let cube = TriangleMesh::cuboid(Vec3::ZERO, Vec3::splat(1.0));
        let (s, tri) = sample_surface_with_triangles(&cube, 6000, 7).unwrap();
        let mut per_face = [0usize; 6];
        for (p, t) in s.iter().zip(&tri) {
            per_face[*t as usize / 2] += 1;
            // The sample must sit on the face its triangle belongs to.
            let n = cube.face_normals()[*t as usize];
            let [a, _, _] = cube.triangle(*t as usize);
            assert!((p.position - a).dot(n).abs() < 1e-12);
        }
        for c in per_face {
            assert!((900..=1100).contains(&c), "{per_face:?}");
        }
    }

    #[test]
    fn samples_are_convex_combinations() {
        let m = TriangleMesh::new(
            vec![
                Vec3::ZERO,
                Vec3::new(2.0, 0.0, 0.0),
                Vec3::new(0.0, 3.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        for s in sample_surface(&m, 3, 11).unwrap() {
            let (u, v) = (s.position.x / 2.0, s.position.y / 3.0);
            let w = 1.0 - u - v;
            assert!(u >= 0.0 && v >= 0.0 && w >= -1e-12);
            assert_eq!(s.position.z, 0.0);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let m = TriangleMesh::uv_sphere(Vec3::ZERO, 1.0, 16, 8);
        assert_eq!(
            sample_surface(&m, 500, 3).unwrap(),
            sample_surface(&m, 500, 3).unwrap()
        );
        assert_ne!(
            sample_surface(&m, 500, 3).unwrap(),
            sample_surface(&m, 500, 4).unwrap()
        );
    }
}
