use alloc::vec::Vec;

use super::{Aabb, TriangleMesh};
use crate::math::Vec3;

const LEAF_SIZE: usize = 4;

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestHit {
    pub point: Vec3,
    pub distance: f64,
    pub triangle: usize,
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    // Leaf: `first..first+count` into `order`; inner: `count == 0`, children at `first`, `first+1`.
    first: u32,
    count: u32,
}

/// Bounding-volume hierarchy over a mesh's triangles for exact
/// nearest-surface queries. Built once per mesh.
#[derive(Debug, Clone)]
pub struct SurfaceIndex {
    tris: Vec<[Vec3; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl SurfaceIndex {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let tris: Vec<[Vec3; 3]> = (0..mesh.triangle_count())
            .map(|i| mesh.triangle(i))
            .collect();
        let centroids: Vec<Vec3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut order: Vec<u32> = (0..tris.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1);
        nodes.push(Node {
            bounds: tri_bounds(&tris, &order),
            first: 0,
            count: order.len() as u32,
        });
        let mut stack = alloc::vec![(0usize, 0usize, order.len())];
        while let Some((node, start, end)) = stack.pop() {
            let count = end - start;
            if count <= LEAF_SIZE {
                continue;
            }
            let cb = Aabb::from_points(order[start..end].iter().map(|&i| centroids[i as usize]))
                .expect("non-empty range");
            let ext = cb.extent();
            let axis = if ext.x >= ext.y && ext.x >= ext.z {
                0
            } else if ext.y >= ext.z {
                1
            } else {
                2
            };
            let mid = start + count / 2;
            order[start..end].select_nth_unstable_by(count / 2, |&a, &b| {
                centroids[a as usize][axis]
                    .total_cmp(&centroids[b as usize][axis])
                    .then(a.cmp(&b))
            });
            let left = nodes.len();
            nodes.push(Node {
                bounds: tri_bounds(&tris, &order[start..mid]),
                first: start as u32,
                count: (mid - start) as u32,
            });
            nodes.push(Node {
                bounds: tri_bounds(&tris, &order[mid..end]),
                first: mid as u32,
                count: (end - mid) as u32,
            });
            nodes[node].first = left as u32;
            nodes[node].count = 0;
            stack.push((left, start, mid));
            stack.push((left + 1, mid, end));
        }
        Self { tris, order, nodes }
    }

    /// Exact closest surface point to `q`.
    pub fn nearest(&self, q: Vec3) -> NearestHit {
        let mut best_d2 = f64::INFINITY;
        let mut best = NearestHit {
            point: q,
            distance: f64::INFINITY,
            triangle: 0,
        };
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bounds.distance_squared(q) > best_d2 {
                continue;
            }
            if node.count > 0 {
                let s = node.first as usize;
                for &ti in &self.order[s..s + node.count as usize] {
                    let [a, b, c] = self.tris[ti as usize];
                    let p = closest_point_on_triangle(q, a, b, c);
                    let d2 = p.distance_squared(q);
                    if d2 < best_d2 || (d2 == best_d2 && (ti as usize) < best.triangle) {
                        best_d2 = d2;
                        best = NearestHit {
                            point: p,
                            distance: 0.0,
                            triangle: ti as usize,
                        };
                    }
                }
            } else {
                let l = node.first;
                let r = l + 1;
                let dl = self.nodes[l as usize].bounds.distance_squared(q);
                let dr = self.nodes[r as usize].bounds.distance_squared(q);
                // Visit the nearer child first.
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best.distance = crate::math::sqrt(best_d2);
        best
    }
}

fn tri_bounds(tris: &[[Vec3; 3]], ids: &[u32]) -> Aabb {
    Aabb::from_points(ids.iter().flat_map(|&i| tris[i as usize])).expect("non-empty range")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_query() {
        let cube = TriangleMesh::cuboid(Vec3::ZERO, Vec3::splat(1.0));
        let idx = SurfaceIndex::new(&cube);
        let hit = idx.nearest(Vec3::new(2.0, 0.5, 0.5));
        assert!((hit.distance - 1.0).abs() < 1e-12);
        assert!(hit.point.distance(Vec3::new(1.0, 0.5, 0.5)) < 1e-12);
    }

    #[test]
    fn centroid_of_face_has_zero_distance() {
        let cube = TriangleMesh::cuboid(Vec3::ZERO, Vec3::splat(1.0));
        let idx = SurfaceIndex::new(&cube);
        for i in 0..cube.triangle_count() {
            let [a, b, c] = cube.triangle(i);
            assert!(idx.nearest((a + b + c) / 3.0).distance < 1e-12);
        }
    }
}
