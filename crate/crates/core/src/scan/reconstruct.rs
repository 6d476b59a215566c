use alloc::vec::Vec;

use super::ScanError;
use crate::math::{self, Vec3};
use crate::mesh::{extract_isosurface, Aabb, KdTree, PointSample, ScalarGrid, TriangleMesh};

pub const MIN_POINTS: usize = 100;
const PAD_CELLS: f64 = 2.5;
const SUPPORT_CELLS: f64 = 2.0;

/// Turns oriented points into a surface mesh.
pub trait SurfaceReconstructor: Sync {
    fn reconstruct(
        &self,
        points: &[PointSample],
        resolution: usize,
    ) -> Result<TriangleMesh, ScanError>;
}

/// The built-in reconstructor: [`reconstruct_surface`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ImplicitReconstructor;

impl SurfaceReconstructor for ImplicitReconstructor {
    fn reconstruct(
        &self,
        points: &[PointSample],
        resolution: usize,
    ) -> Result<TriangleMesh, ScanError> {
        reconstruct_surface(points, resolution)
    }
}

/// Meshes the zero set of a signed field built from oriented points.
///
/// The grid has `resolution` cells along the longest side of the points'
/// bounding box plus 2.5 cells of padding. Each node takes the average of
/// the signed plane offsets `n . (x - p)` of the samples within two cells,
/// weighted by a Gaussian of one cell width. Nodes with no sample in reach
/// use the plane offset of an approximately closest sample, propagated
/// outward from the covered nodes. The padding layer is forced outside so the
/// result is closed. Sharp edges come out rounded at the scale of a cell.
pub fn reconstruct_surface(
    points: &[PointSample],
    resolution: usize,
) -> Result<TriangleMesh, ScanError> {
    if points.len() < MIN_POINTS {
        return Err(ScanError::TooFewPoints {
            need: MIN_POINTS,
            have: points.len(),
        });
    }
    if !(8..=256).contains(&resolution) {
        return Err(ScanError::InvalidConfig(alloc::format!(
            "reconstruction resolution {resolution} outside [8, 256]"
        )));
    }
    let positions: Vec<Vec3> = points.iter().map(|p| p.position).collect();
    let aabb =
        Aabb::from_points(positions.iter().copied()).ok_or(ScanError::ReconstructionFailed)?;
    let longest = aabb.extent().max_component();
    if !(longest > 0.0) || !longest.is_finite() {
        return Err(ScanError::ReconstructionFailed);
    }
    let h = longest / resolution as f64;
    let ext = aabb.extent();
    let dims = [0, 1, 2].map(|a| (math::ceil(ext[a] / h + 2.0 * PAD_CELLS) as usize + 1).max(2));
    let span = Vec3::new(
        (dims[0] - 1) as f64 * h,
        (dims[1] - 1) as f64 * h,
        (dims[2] - 1) as f64 * h,
    );
    let origin = aabb.center() - span * 0.5;
    let tree = KdTree::new(&positions);
    let support = SUPPORT_CELLS * h;
    let inv_two_sigma2 = 1.0 / (2.0 * h * h);
    let [nx, ny, nz] = dims;

    let node = |i: usize, j: usize, k: usize| origin + Vec3::new(i as f64, j as f64, k as f64) * h;
    let offset = |s: usize, x: Vec3| points[s].normal.dot(x - points[s].position);

    // Nodes with samples in reach: Gaussian blend, and remember the closest sample.
    let near_slab = |k: usize, out: &mut [(f64, u32)]| {
        for j in 0..ny {
            for i in 0..nx {
                let x = node(i, j, k);
                let (mut wsum, mut vsum) = (0.0, 0.0);
                let mut closest = (u32::MAX, f64::INFINITY);
                tree.for_each_within(x, support, |s, d2| {
                    let w = math::exp(-d2 * inv_two_sigma2);
                    wsum += w;
                    vsum += w * offset(s, x);
                    if d2 < closest.1 || (d2 == closest.1 && (s as u32) < closest.0) {
                        closest = (s as u32, d2);
                    }
                });
                out[i + nx * j] = if wsum > 0.0 {
                    (vsum / wsum, closest.0)
                } else {
                    (0.0, u32::MAX)
                };
            }
        }
    };
    let mut cells = alloc::vec![(0.0, u32::MAX); nx * ny * nz];
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        cells
            .par_chunks_mut(nx * ny)
            .enumerate()
            .for_each(|(k, out)| near_slab(k, out));
    }
    #[cfg(not(feature = "parallel"))]
    for (k, out) in cells.chunks_mut(nx * ny).enumerate() {
        near_slab(k, out);
    }

    // Remaining nodes take the closest sample found among their already
    // assigned face neighbours, spreading outward breadth-first.
    let idx = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    let coords = |n: usize| (n % nx, (n / nx) % ny, n / (nx * ny));
    let neighbours = |n: usize| {
        let (i, j, k) = coords(n);
        let mut out = [usize::MAX; 6];
        if i > 0 {
            out[0] = idx(i - 1, j, k);
        }
        if i + 1 < nx {
            out[1] = idx(i + 1, j, k);
        }
        if j > 0 {
            out[2] = idx(i, j - 1, k);
        }
        if j + 1 < ny {
            out[3] = idx(i, j + 1, k);
        }
        if k > 0 {
            out[4] = idx(i, j, k - 1);
        }
        if k + 1 < nz {
            out[5] = idx(i, j, k + 1);
        }
        out
    };
    let mut queue: alloc::collections::VecDeque<usize> = (0..cells.len())
        .filter(|&n| cells[n].1 != u32::MAX)
        .collect();
    if queue.is_empty() {
        return Err(ScanError::ReconstructionFailed);
    }
    while let Some(n) = queue.pop_front() {
        for w in neighbours(n) {
            if w == usize::MAX || cells[w].1 != u32::MAX {
                continue;
            }
            let (i, j, k) = coords(w);
            let x = node(i, j, k);
            let mut best = (u32::MAX, f64::INFINITY);
            for v in neighbours(w) {
                if v == usize::MAX || cells[v].1 == u32::MAX {
                    continue;
                }
                let s = cells[v].1;
                let d2 = points[s as usize].position.distance_squared(x);
                if d2 < best.1 || (d2 == best.1 && s < best.0) {
                    best = (s, d2);
                }
            }
            cells[w] = (offset(best.0 as usize, x), best.0);
            queue.push_back(w);
        }
    }
    let values: Vec<f64> = cells
        .iter()
        .enumerate()
        .map(|(n, &(v, _))| {
            let (i, j, k) = coords(n);
            let boundary = i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1;
            if boundary {
                v.max(h)
            } else {
                v
            }
        })
        .collect();
    let grid = ScalarGrid {
        dims,
        origin,
        spacing: h,
        values,
    };
    if !grid.has_inside() {
        return Err(ScanError::ReconstructionFailed);
    }
    extract_isosurface(&grid).map_err(|_| ScanError::ReconstructionFailed)
}
