use alloc::vec::Vec;

use super::hull::{convex_hull, DegenerateHull};
use super::VirtualCamera;
use crate::math::{self, Vec3};
use crate::mesh::PointSample;

/// Indices of the samples a camera sees.
///
/// Hidden-point removal: every point is flipped about a sphere centered at
/// the camera whose radius `R = max_dist * 10^gamma` exceeds every point's
/// distance, and a point is visible when its flipped image is a vertex of
/// the convex hull of all flipped points and the camera. Points whose normal
/// faces away from the camera are dropped as well.
pub fn visible_points(
    samples: &[PointSample],
    camera: &VirtualCamera,
    gamma: f64,
) -> Result<Vec<usize>, DegenerateHull> {
    let rel: Vec<Vec3> = samples
        .iter()
        .map(|s| s.position - camera.position)
        .collect();
    let max_dist = rel.iter().map(|p| p.norm()).fold(0.0, f64::max);
    if !(max_dist > 0.0) {
        return Err(DegenerateHull);
    }
    let radius = max_dist * math::pow(10.0, gamma);
    let mut flipped: Vec<Vec3> = rel
        .iter()
        .map(|&p| {
            let d = p.norm();
            if d > 0.0 {
                p * (2.0 * radius / d - 1.0)
            } else {
                p
            }
        })
        .collect();
    flipped.push(Vec3::ZERO);
    let hull = convex_hull(&flipped)?;
    let n = samples.len() as u32;
    Ok(hull
        .vertices
        .into_iter()
        .filter(|&i| i < n)
        .map(|i| i as usize)
        .filter(|&i| samples[i].normal.dot(-rel[i]) > 0.0)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{sample_surface, TriangleMesh};

    #[test]
    fn far_camera_sees_half_a_sphere() {
        let s = TriangleMesh::uv_sphere(Vec3::ZERO, 1.0, 64, 32);
        let samples = sample_surface(&s, 20_000, 1).unwrap();
        let cam = VirtualCamera {
            position: Vec3::new(1000.0, 0.0, 0.0),
            look_at: Vec3::ZERO,
        };
        let vis = visible_points(&samples, &cam, 2.0).unwrap();
        let frac = vis.len() as f64 / samples.len() as f64;
        assert!((0.4..=0.6).contains(&frac), "{frac}");
        for &i in &vis {
            assert!(samples[i].position.x > -0.05);
        }
    }

    #[test]
    fn near_camera_sees_the_visible_cap() {
        // From distance 2.5 the cap spans 1 - cos(acos(0.4)) over 2 = 0.3 of the area.
        let s = TriangleMesh::uv_sphere(Vec3::ZERO, 1.0, 64, 32);
        let samples = sample_surface(&s, 20_000, 2).unwrap();
        let cam = VirtualCamera {
            position: Vec3::new(2.5, 0.0, 0.0),
            look_at: Vec3::ZERO,
        };
        let vis = visible_points(&samples, &cam, 2.0).unwrap();
        let frac = vis.len() as f64 / samples.len() as f64;
        assert!((0.25..=0.35).contains(&frac), "{frac}");
    }

    #[test]
    fn far_side_of_cube_excluded() {
        let c = TriangleMesh::cuboid(Vec3::ZERO, Vec3::splat(1.0));
        let samples = sample_surface(&c, 6000, 3).unwrap();
        let cam = VirtualCamera {
            position: Vec3::new(5.0, 0.5, 0.5),
            look_at: Vec3::splat(0.5),
        };
        let vis = visible_points(&samples, &cam, 2.0).unwrap();
        assert!(!vis.is_empty());
        for &i in &vis {
            assert!(samples[i].position.x > 1.0 - 1e-9);
        }
    }
}
