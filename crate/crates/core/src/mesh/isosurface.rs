//! Isosurface extraction by marching tetrahedra.
//!
//! Each grid cube is split into the six Freudenthal tetrahedra sharing its
//! main diagonal. The split is identical in every cube, so neighbouring cubes
//! agree on their shared faces and the output is closed and manifold whenever
//! the boundary layer of the grid is outside. Vertices are keyed by the grid
//! edge they lie on and deduplicated, giving a properly indexed mesh.

use alloc::vec::Vec;

use super::{MeshError, TriangleMesh};
use crate::math::Vec3;

/// Scalar samples on a regular lattice of `dims` nodes; negative is inside.
#[derive(Debug, Clone)]
pub struct ScalarGrid {
    pub dims: [usize; 3],
    pub origin: Vec3,
    pub spacing: f64,
    /// Node `(i, j, k)` at `i + dims[0] * (j + dims[1] * k)`.
    pub values: Vec<f64>,
}

impl ScalarGrid {
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.spacing
    }

    pub fn has_inside(&self) -> bool {
        self.values.iter().any(|&v| v < 0.0)
    }
}

const T_MIN: f64 = 1e-6;

// Corner c of a cube has offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
const PATHS: [[usize; 2]; 6] = [[1, 2], [1, 4], [2, 1], [2, 4], [4, 1], [4, 2]];

fn corner_pos(c: usize) -> Vec3 {
    Vec3::new((c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64)
}

/// The six tetrahedra, each reordered to positive orientation.
fn tetrahedra() -> [[usize; 4]; 6] {
    let mut out = [[0usize; 4]; 6];
    for (t, [a, b]) in PATHS.iter().enumerate() {
        let mut tet = [0, *a, a | b, 7];
        let p: [Vec3; 4] = tet.map(corner_pos);
        let det = (p[1] - p[0]).dot((p[2] - p[0]).cross(p[3] - p[0]));
        if det < 0.0 {
            tet.swap(2, 3);
        }
        out[t] = tet;
    }
    out
}

// Even permutations of (0,1,2,3) starting with each vertex.
const SINGLE: [[usize; 4]; 4] = [[0, 1, 2, 3], [1, 0, 3, 2], [2, 0, 1, 3], [3, 0, 2, 1]];
// Even permutations (i, j, k, l) for every inside pair {i, j}.
const PAIRS: [[usize; 4]; 6] = [
    [0, 1, 2, 3],
    [0, 2, 3, 1],
    [0, 3, 1, 2],
    [1, 2, 0, 3],
    [1, 3, 2, 0],
    [2, 3, 0, 1],
];

/// Triangulates the zero level set of `grid`, normals pointing toward
/// positive values.
pub fn extract_isosurface(grid: &ScalarGrid) -> Result<TriangleMesh, MeshError> {
    let [nx, ny, nz] = grid.dims;
    if nx < 2 || ny < 2 || nz < 2 || grid.values.len() != nx * ny * nz {
        return Err(MeshError::MalformedGeometry(
            "scalar grid has invalid dimensions".into(),
        ));
    }
    let tets = tetrahedra();
    let stride = [1usize, nx, nx * ny];
    let corner_index = |base: usize, c: usize| {
        base + (c & 1) * stride[0] + ((c >> 1) & 1) * stride[1] + ((c >> 2) & 1) * stride[2]
    };
    // Edge key: lower node index * 8 + offset bits of the upper node.
    let mut tri_keys: Vec<[u64; 3]> = Vec::new();
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let base = grid.index(i, j, k);
                let mut mask = 0u8;
                for c in 0..8 {
                    if grid.values[corner_index(base, c)] < 0.0 {
                        mask |= 1 << c;
                    }
                }
                if mask == 0 || mask == 0xFF {
                    continue;
                }
                for tet in &tets {
                    let inside: [bool; 4] = tet.map(|c| mask & (1 << c) != 0);
                    let count = inside.iter().filter(|&&b| b).count();
                    if count == 0 || count == 4 {
                        continue;
                    }
                    let key = |a: usize, b: usize| -> u64 {
                        let (ca, cb) = (tet[a], tet[b]);
                        let (lo, hi) = if ca & cb == ca { (ca, cb) } else { (cb, ca) };
                        (corner_index(base, lo) as u64) * 8 + (lo ^ hi) as u64
                    };
                    match count {
                        1 | 3 => {
                            let lone = (0..4).find(|&v| inside[v] == (count == 1)).unwrap();
                            let [a, b, c, d] = SINGLE[lone];
                            if count == 1 {
                                tri_keys.push([key(a, b), key(a, c), key(a, d)]);
                            } else {
                                tri_keys.push([key(a, b), key(a, d), key(a, c)]);
                            }
                        }
                        _ => {
                            let pair = PAIRS.iter().find(|p| inside[p[0]] && inside[p[1]]).unwrap();
                            let [a, b, c, d] = *pair;
                            let (ac, ad, bd, bc) = (key(a, c), key(a, d), key(b, d), key(b, c));
                            tri_keys.push([ac, ad, bd]);
                            tri_keys.push([ac, bd, bc]);
                        }
                    }
                }
            }
        }
    }
    if tri_keys.is_empty() {
        return Err(MeshError::MalformedGeometry("level set is empty".into()));
    }
    let mut keys: Vec<u64> = tri_keys.iter().flatten().copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let vertices: Vec<Vec3> = keys.iter().map(|&k| edge_vertex(grid, k)).collect();
    let triangles: Vec<[u32; 3]> = tri_keys
        .iter()
        .map(|t| t.map(|k| keys.binary_search(&k).expect("key present") as u32))
        .collect();
    TriangleMesh::new_dropping_degenerate(vertices, triangles)
}

fn edge_vertex(grid: &ScalarGrid, key: u64) -> Vec3 {
    let lo = (key / 8) as usize;
    let off = (key % 8) as usize;
    let [nx, ny, _] = grid.dims;
    let (i, j, k) = (lo % nx, (lo / nx) % ny, lo / (nx * ny));
    let (di, dj, dk) = (off & 1, (off >> 1) & 1, (off >> 2) & 1);
    let p0 = grid.node(i, j, k);
    let p1 = grid.node(i + di, j + dj, k + dk);
    let v0 = grid.values[lo];
    let v1 = grid.values[grid.index(i + di, j + dj, k + dk)];
    let t = (v0 / (v0 - v1)).clamp(T_MIN, 1.0 - T_MIN);
    p0.lerp(p1, t)
}
