use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::raster2d::Tri2;
use super::{Aabb, MeshError, TriangleMesh};
use crate::math::{self, Vec3};

pub const MIN_RESOLUTION: usize = 8;
pub const MAX_RESOLUTION: usize = 256;

/// Cubic inside/outside grid. Cell `(x, y, z)` is stored at `x + r*(y + r*z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub resolution: usize,
    pub origin: Vec3,
    pub cell: f64,
    pub cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn inside_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell * self.cell * self.cell
    }

    pub fn volume(&self) -> f64 {
        self.inside_count() as f64 * self.cell_volume()
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        let r = self.resolution;
        self.cells[x + r * (y + r * z)]
    }

    pub fn cell_center(&self, x: usize, y: usize, z: usize) -> Vec3 {
        self.origin + Vec3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5) * self.cell
    }

    /// Same frame and resolution.
    pub fn is_compatible(&self, other: &OccupancyGrid) -> bool {
        self.resolution == other.resolution
            && self.origin == other.origin
            && self.cell == other.cell
    }
}

/// Occupancy over the `[0,1]^3` metric frame.
pub fn voxelize_occupancy(
    mesh: &TriangleMesh,
    resolution: usize,
) -> Result<OccupancyGrid, MeshError> {
    voxelize_in(mesh, &Aabb::new(Vec3::ZERO, Vec3::splat(1.0)), resolution)
}

/// Occupancy over the bounding cube of `frame`. A cell is inside when its
/// center is enclosed by ray-crossing parity along at least two of the
/// three axes.
pub fn voxelize_in(
    mesh: &TriangleMesh,
    frame: &Aabb,
    resolution: usize,
) -> Result<OccupancyGrid, MeshError> {
    if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&resolution) {
        return Err(MeshError::InvalidResolution(resolution));
    }
    if mesh.vertices().iter().any(|v| !v.is_finite()) {
        return Err(MeshError::NonFiniteGeometry);
    }
    let cube = frame.bounding_cube();
    let side = cube.extent().x;
    if !(side > 0.0) || !side.is_finite() {
        return Err(MeshError::DegenerateExtent);
    }
    let r = resolution;
    let cell = side / r as f64;
    let origin = cube.min;
    let mut votes = vec![0u8; r * r * r];
    let mut crossings: Vec<Vec<f64>> = vec![Vec::new(); r * r];
    let center = |i: usize, axis: usize| origin[axis] + (i as f64 + 0.5) * cell;

    for axis in 0..3 {
        let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
        for c in crossings.iter_mut() {
            c.clear();
        }
        for ti in 0..mesh.triangle_count() {
            let t = mesh.triangle(ti);
            let Some(tri) = Tri2::new(
                [t[0][ua], t[0][va]],
                [t[1][ua], t[1][va]],
                [t[2][ua], t[2][va]],
            ) else {
                continue;
            };
            let (lo, hi) = tri.bounds();
            let Some((i0, i1)) = ray_range(lo[0], hi[0], origin[ua], cell, r) else {
                continue;
            };
            let Some((j0, j1)) = ray_range(lo[1], hi[1], origin[va], cell, r) else {
                continue;
            };
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let q = [center(i, ua), center(j, va)];
                    if let Some(w) = tri.cover(q) {
                        let hit = w[0] * t[0][axis] + w[1] * t[1][axis] + w[2] * t[2][axis];
                        crossings[i + r * j].push(hit);
                    }
                }
            }
        }
        for j in 0..r {
            for i in 0..r {
                let list = &mut crossings[i + r * j];
                if list.is_empty() {
                    continue;
                }
                list.sort_by(f64::total_cmp);
                let mut k = 0;
                for step in 0..r {
                    let x = center(step, axis);
                    while k < list.len() && list[k] < x {
                        k += 1;
                    }
                    if k % 2 == 1 {
                        let mut idx = [0usize; 3];
                        idx[axis] = step;
                        idx[ua] = i;
                        idx[va] = j;
                        votes[idx[0] + r * (idx[1] + r * idx[2])] += 1;
                    }
                }
            }
        }
    }
    Ok(OccupancyGrid {
        resolution: r,
        origin,
        cell,
        cells: votes.into_iter().map(|v| v >= 2).collect(),
    })
}

/// Indices of ray centers falling in `[lo, hi]`, clipped to the grid.
fn ray_range(lo: f64, hi: f64, origin: f64, cell: f64, r: usize) -> Option<(usize, usize)> {
    let a = math::ceil((lo - origin) / cell - 0.5);
    let b = math::floor((hi - origin) / cell - 0.5);
    let a = a.max(0.0);
    let b = b.min(r as f64 - 1.0);
    if a > b {
        None
    } else {
        Some((a as usize, b as usize))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_unit_cube() {
        let cube = TriangleMesh::cuboid(Vec3::ZERO, Vec3::splat(1.0));
        let g = voxelize_occupancy(&cube, 64).unwrap();
        assert_eq!(g.inside_count(), 64 * 64 * 64);
    }

    #[test]
    fn mesh_outside_frame_is_empty() {
        let cube = TriangleMesh::cuboid(Vec3::splat(3.0), Vec3::splat(4.0));
        let g = voxelize_occupancy(&cube, 32).unwrap();
        assert_eq!(g.inside_count(), 0);
    }

    #[test]
    fn resolution_bounds() {
        let cube = TriangleMesh::cuboid(Vec3::ZERO, Vec3::splat(1.0));
        assert!(voxelize_occupancy(&cube, 7).is_err());
        assert!(voxelize_occupancy(&cube, 257).is_err());
    }

    #[test]
    fn sphere_volume_close_to_analytic() {
        let s = TriangleMesh::uv_sphere(Vec3::splat(0.5), 0.4, 96, 48);
        let g = voxelize_occupancy(&s, 64).unwrap();
        let analytic = 4.0 / 3.0 * core::f64::consts::PI * 0.4f64.powi(3);
        assert!(
            (g.volume() - analytic).abs() / analytic < 0.02,
            "{}",
            g.volume()
        );
    }

    #[test]
    fn sphere_error_shrinks_with_resolution() {
        let s = TriangleMesh::uv_sphere(Vec3::splat(0.5), 0.37, 128, 64);
        let exact = s.signed_volume();
        let e32 = (voxelize_occupancy(&s, 32).unwrap().volume() - exact).abs();
        let e128 = (voxelize_occupancy(&s, 128).unwrap().volume() - exact).abs();
        assert!(e128 <= e32, "{e32} {e128}");
    }
}
