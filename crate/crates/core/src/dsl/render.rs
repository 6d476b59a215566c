use alloc::vec::Vec;

use super::{Ast, CompiledSdf, DslError};
use crate::math::{self, Vec3};
use crate::mesh::{extract_isosurface, ScalarGrid, TriangleMesh};

pub const DEFAULT_RESOLUTION: usize = 128;
pub const DOMAIN_HALF_EXTENT: f64 = 100.0;
pub const MIN_RESOLUTION: usize = 32;
pub const MAX_RESOLUTION: usize = 256;

/// Samples the solid's field on `resolution` cells per axis over the domain
/// cube. The field is clipped by the domain box so the outer node layer is
/// never inside and extracted surfaces are always closed.
pub fn sample_field(ast: &Ast, resolution: usize) -> Result<ScalarGrid, DslError> {
    if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&resolution) {
        return Err(DslError::InvalidResolution(resolution));
    }
    ast.validate()?;
    Ok(field_grid(ast, resolution))
}

pub(crate) fn field_grid(ast: &Ast, resolution: usize) -> ScalarGrid {
    let sdf = CompiledSdf::new(ast);
    let n = resolution + 1;
    let spacing = 2.0 * DOMAIN_HALF_EXTENT / resolution as f64;
    let coord = |i: f64| -DOMAIN_HALF_EXTENT + 2.0 * DOMAIN_HALF_EXTENT * i / resolution as f64;
    let field = |p: Vec3| {
        let clip = math::abs(p.x).max(math::abs(p.y)).max(math::abs(p.z)) - DOMAIN_HALF_EXTENT;
        sdf.eval(p).max(clip)
    };
    let node =
        |i: usize, j: usize, k: usize| Vec3::new(coord(i as f64), coord(j as f64), coord(k as f64));
    let mut values = alloc::vec![0.0; n * n * n];

    // The field is 1-Lipschitz, so a block whose center value exceeds the
    // block's half diagonal plus one cell diagonal has the sign of its
    // center everywhere and no node in it borders a sign change. Such blocks
    // are filled with the center value; the rest are refined down to single
    // nodes. Every node that can take part in an edge crossing is evaluated
    // exactly, so the mesh is identical to one from a dense evaluation.
    let margin = math::sqrt(3.0) * spacing;
    let mut stack: Vec<([usize; 3], [usize; 3])> = alloc::vec![([0; 3], [n; 3])];
    while let Some((lo, hi)) = stack.pop() {
        let size = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        if size.contains(&0) {
            continue;
        }
        if size.iter().all(|&s| s <= 2) {
            for k in lo[2]..hi[2] {
                for j in lo[1]..hi[1] {
                    for i in lo[0]..hi[0] {
                        values[i + n * (j + n * k)] = field(node(i, j, k));
                    }
                }
            }
            continue;
        }
        let mid = |a: usize| (lo[a] + hi[a] - 1) as f64 * 0.5;
        let center = Vec3::new(coord(mid(0)), coord(mid(1)), coord(mid(2)));
        let half = size.map(|s| (s - 1) as f64 * 0.5 * spacing);
        let half_diag = math::sqrt(half[0] * half[0] + half[1] * half[1] + half[2] * half[2]);
        let f = field(center);
        if math::abs(f) > half_diag + margin {
            for k in lo[2]..hi[2] {
                for j in lo[1]..hi[1] {
                    let row = n * (j + n * k);
                    values[row + lo[0]..row + hi[0]].fill(f);
                }
            }
            continue;
        }
        let split = [0, 1, 2].map(|a| lo[a] + size[a] / 2);
        for oct in 0..8 {
            let mut clo = lo;
            let mut chi = hi;
            for a in 0..3 {
                if oct >> a & 1 == 0 {
                    chi[a] = split[a];
                } else {
                    clo[a] = split[a];
                }
            }
            stack.push((clo, chi));
        }
    }
    ScalarGrid {
        dims: [n, n, n],
        origin: Vec3::splat(-DOMAIN_HALF_EXTENT),
        spacing,
        values,
    }
}

/// Meshes the program's solid. Fails with `DegenerateSolid` when no grid
/// node is inside.
pub fn render_mesh(ast: &Ast, resolution: usize) -> Result<TriangleMesh, DslError> {
    let grid = sample_field(ast, resolution)?;
    if !grid.has_inside() {
        return Err(DslError::DegenerateSolid);
    }
    extract_isosurface(&grid).map_err(|_| DslError::DegenerateSolid)
}

/// Whether any node of a `resolution` grid is inside the solid.
pub(crate) fn has_solid(ast: &Ast, resolution: usize) -> bool {
    field_grid(ast, resolution).has_inside()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    #[test]
    fn cube_extent_within_one_cell() {
        let ast = parse("extrude plane=XY z0=-20 h=40 { add rect 0 0 40 40 }").unwrap();
        let m = render_mesh(&ast, 128).unwrap();
        let cell = 200.0 / 128.0;
        let b = m.aabb();
        for a in 0..3 {
            assert!((b.min[a] + 20.0).abs() <= cell, "{:?}", b);
            assert!((b.max[a] - 20.0).abs() <= cell, "{:?}", b);
        }
        assert_eq!(m.boundary_edge_count(), 0);
    }

    #[test]
    fn cut_everything_is_degenerate() {
        let ast = parse(
            "extrude plane=XY z0=-20 h=40 { add rect 0 0 40 40 }\n\
             extrude plane=XY z0=-50 h=100 op=cut { add rect 0 0 100 100 }",
        )
        .unwrap();
        assert_eq!(
            render_mesh(&ast, 64).unwrap_err(),
            DslError::DegenerateSolid
        );
    }

    #[test]
    fn cube_with_hole_has_genus_one() {
        let ast =
            parse("extrude plane=XY z0=-20 h=40 { add rect 0 0 40 40 sub circle 0 0 10 }").unwrap();
        let m = render_mesh(&ast, 64).unwrap();
        assert_eq!(m.boundary_edge_count(), 0);
        assert_eq!(m.euler_characteristic(), 0);
    }

    #[test]
    fn vertices_near_zero_set() {
        let ast = parse(
            "extrude plane=XY z0=-30 h=50 { add rect 5 0 60 40 sub circle 10 0 8 }\n\
             extrude plane=XZ z0=-10 h=20 op=union { add polygon -40 -30 40 -30 0 40 }",
        )
        .unwrap();
        let res = 64;
        let m = render_mesh(&ast, res).unwrap();
        let cell = 200.0 / res as f64;
        let diag = cell * 3f64.sqrt();
        let sdf = CompiledSdf::new(&ast);
        for v in m.vertices() {
            assert!(sdf.eval(*v).abs() <= diag);
        }
    }

    #[test]
    fn pruned_field_meshes_like_dense() {
        for seed in 0..6 {
            let ast = crate::dsl::random_program(seed, 1 + seed as usize).unwrap();
            let res = 48;
            let sdf = CompiledSdf::new(&ast);
            let mut dense = field_grid(&ast, res);
            let n = res + 1;
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        let p = Vec3::new(
                            -100.0 + 200.0 * i as f64 / res as f64,
                            -100.0 + 200.0 * j as f64 / res as f64,
                            -100.0 + 200.0 * k as f64 / res as f64,
                        );
                        let clip = p.x.abs().max(p.y.abs()).max(p.z.abs()) - 100.0;
                        dense.values[i + n * (j + n * k)] = sdf.eval(p).max(clip);
                    }
                }
            }
            let pruned = field_grid(&ast, res);
            for (a, b) in dense.values.iter().zip(&pruned.values) {
                assert_eq!(*a < 0.0, *b < 0.0);
            }
            assert_eq!(
                extract_isosurface(&dense).unwrap(),
                extract_isosurface(&pruned).unwrap()
            );
        }
    }

    #[test]
    fn resolution_bounds() {
        let ast = parse("extrude plane=XY z0=-20 h=40 { add rect 0 0 40 40 }").unwrap();
        assert_eq!(
            render_mesh(&ast, 31).unwrap_err(),
            DslError::InvalidResolution(31)
        );
        assert_eq!(
            render_mesh(&ast, 257).unwrap_err(),
            DslError::InvalidResolution(257)
        );
    }

    #[test]
    fn full_domain_box_is_closed() {
        let ast = parse("extrude plane=XY z0=-100 h=200 { add rect 0 0 200 200 }").unwrap();
        let m = render_mesh(&ast, 32).unwrap();
        assert_eq!(m.boundary_edge_count(), 0);
    }
}
