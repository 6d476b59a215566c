use rand::Rng as _;

use super::ScanError;
use crate::math::{mix_seed, rng_from_seed};
use crate::mesh::{sample_surface_with_triangles, TriangleMesh};

/// Removes `count` roughly circular patches. Each hole center is drawn
/// uniformly on the surface; its source triangle and every triangle whose
/// centroid lies within `radius_fraction * diagonal` of the center go.
pub fn punch_holes(
    mesh: &TriangleMesh,
    count: usize,
    radius_fraction: (f64, f64),
    seed: u64,
) -> Result<TriangleMesh, ScanError> {
    if count == 0 {
        return Ok(mesh.clone());
    }
    let (lo, hi) = radius_fraction;
    if !(lo > 0.0 && lo <= hi && hi <= 0.2) {
        return Err(ScanError::InvalidConfig(
            "hole radius fractions must lie in (0, 0.2]".into(),
        ));
    }
    let (centers, sources) = sample_surface_with_triangles(mesh, count, mix_seed(&[seed, 0]))?;
    let mut rng = rng_from_seed(mix_seed(&[seed, 1]));
    let diag = mesh.aabb().diagonal();
    let holes: alloc::vec::Vec<(crate::math::Vec3, f64)> = centers
        .iter()
        .map(|c| {
            let r = if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            };
            (c.position, (r * diag) * (r * diag))
        })
        .collect();
    mesh.retain_triangles(|t| {
        if sources.contains(&(t as u32)) {
            return false;
        }
        let [a, b, c] = mesh.triangle(t);
        let centroid = (a + b + c) / 3.0;
        !holes
            .iter()
            .any(|&(p, r2)| centroid.distance_squared(p) <= r2)
    })
    .ok_or(ScanError::EmptyAfterHoles)
}
