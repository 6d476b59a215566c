//! 3-D convex hull by quickhull.
//!
//! Faces keep their three neighbours (the face across edge `v[i] -> v[i+1]`)
//! and a conflict list of the points above them. Each iteration lifts the
//! farthest conflict point of a face, removes the faces it sees and fans new
//! faces from the horizon to the point. If rounding makes the horizon
//! anything other than one simple loop, the point is discarded instead.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{self, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegenerateHull;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexHull {
    /// Sorted indices of input points that are hull vertices.
    pub vertices: Vec<u32>,
    /// Outward-wound faces over input indices.
    pub faces: Vec<[u32; 3]>,
}

#[derive(Debug, Clone)]
struct Face {
    v: [u32; 3],
    n: Vec3,
    d: f64,
    nb: [u32; 3],
    outside: Vec<u32>,
    alive: bool,
}

struct Builder<'a> {
    pts: &'a [Vec3],
    faces: Vec<Face>,
    eps: f64,
    mark: Vec<u32>,
    epoch: u32,
}

impl Builder<'_> {
    fn plane(&self, v: [u32; 3]) -> (Vec3, f64) {
        let [a, b, c] = v.map(|i| self.pts[i as usize]);
        let n = (b - a).cross(c - a).normalized().unwrap_or(Vec3::ZERO);
        (n, n.dot(a))
    }

    fn dist(&self, f: usize, p: u32) -> f64 {
        let face = &self.faces[f];
        face.n.dot(self.pts[p as usize]) - face.d
    }

    fn push_face(&mut self, v: [u32; 3], nb: [u32; 3]) -> u32 {
        let (n, d) = self.plane(v);
        self.faces.push(Face {
            v,
            n,
            d,
            nb,
            outside: Vec::new(),
            alive: true,
        });
        self.mark.push(0);
        (self.faces.len() - 1) as u32
    }

    fn assign(&mut self, candidates: &[u32], points: impl IntoIterator<Item = u32>) -> Vec<u32> {
        let mut touched = Vec::new();
        for p in points {
            for &f in candidates {
                if self.dist(f as usize, p) > self.eps {
                    if self.faces[f as usize].outside.is_empty() {
                        touched.push(f);
                    }
                    self.faces[f as usize].outside.push(p);
                    break;
                }
            }
        }
        touched
    }

    /// One expansion step from face `f`. Returns the faces with new conflicts.
    fn expand(&mut self, f: usize) -> Vec<u32> {
        let eye_slot = {
            let out = &self.faces[f].outside;
            let mut best = 0;
            let mut best_d = f64::NEG_INFINITY;
            for (k, &p) in out.iter().enumerate() {
                let d = self.dist(f, p);
                if d > best_d {
                    best_d = d;
                    best = k;
                }
            }
            best
        };
        let eye = self.faces[f].outside[eye_slot];
        let ep = self.pts[eye as usize];

        self.epoch += 1;
        let epoch = self.epoch;
        let mut visible = vec![f as u32];
        self.mark[f] = epoch;
        // (a, b, outer face) with a -> b in the visible face's winding.
        let mut horizon: Vec<(u32, u32, u32)> = Vec::new();
        let mut k = 0;
        while k < visible.len() {
            let vf = visible[k] as usize;
            k += 1;
            for e in 0..3 {
                let g = self.faces[vf].nb[e] as usize;
                if self.mark[g] == epoch {
                    continue;
                }
                let fg = &self.faces[g];
                if fg.n.dot(ep) - fg.d > self.eps {
                    self.mark[g] = epoch;
                    visible.push(g as u32);
                } else {
                    let v = self.faces[vf].v;
                    horizon.push((v[e], v[(e + 1) % 3], g as u32));
                }
            }
        }

        if !self.simple_loop(&horizon) {
            self.faces[f].outside.swap_remove(eye_slot);
            return if self.faces[f].outside.is_empty() {
                Vec::new()
            } else {
                vec![f as u32]
            };
        }

        let base = self.faces.len() as u32;
        let h = horizon.len();
        let mut start_of = alloc::collections::BTreeMap::new();
        let mut end_of = alloc::collections::BTreeMap::new();
        for (i, &(a, b, _)) in horizon.iter().enumerate() {
            start_of.insert(a, base + i as u32);
            end_of.insert(b, base + i as u32);
        }
        for &(a, b, g) in &horizon {
            let (next, prev) = (start_of[&b], end_of[&a]);
            let nf = self.push_face([a, b, eye], [g, next, prev]);
            let gf = &mut self.faces[g as usize];
            for e in 0..3 {
                if gf.v[e] == b && gf.v[(e + 1) % 3] == a {
                    gf.nb[e] = nf;
                }
            }
        }
        let new_faces: Vec<u32> = (base..base + h as u32).collect();
        let mut orphans = Vec::new();
        for &vf in &visible {
            let face = &mut self.faces[vf as usize];
            face.alive = false;
            orphans.extend(face.outside.drain(..).filter(|&p| p != eye));
        }
        self.assign(&new_faces, orphans)
    }

    fn simple_loop(&self, horizon: &[(u32, u32, u32)]) -> bool {
        if horizon.len() < 3 {
            return false;
        }
        let mut next = alloc::collections::BTreeMap::new();
        for &(a, b, _) in horizon {
            if next.insert(a, b).is_some() {
                return false;
            }
        }
        let (first, _, _) = horizon[0];
        let mut cur = first;
        for step in 0..horizon.len() {
            match next.get(&cur) {
                Some(&n) => cur = n,
                None => return false,
            }
            if cur == first {
                return step + 1 == horizon.len();
            }
        }
        false
    }
}

/// Convex hull of `points`. Fails when the points do not span a volume.
pub fn convex_hull(points: &[Vec3]) -> Result<ConvexHull, DegenerateHull> {
    if points.len() < 4 || points.iter().any(|p| !p.is_finite()) {
        return Err(DegenerateHull);
    }
    let mut scale = Vec3::ZERO;
    for p in points {
        scale = scale.max(Vec3::new(math::abs(p.x), math::abs(p.y), math::abs(p.z)));
    }
    let eps = 30.0 * (scale.x + scale.y + scale.z) * f64::EPSILON;

    // Initial simplex from extreme points.
    let mut ext = [0usize; 6];
    for (i, p) in points.iter().enumerate() {
        for a in 0..3 {
            if p[a] < points[ext[2 * a]][a] {
                ext[2 * a] = i;
            }
            if p[a] > points[ext[2 * a + 1]][a] {
                ext[2 * a + 1] = i;
            }
        }
    }
    let (mut i0, mut i1, mut best) = (0, 0, -1.0);
    for a in 0..6 {
        for b in a + 1..6 {
            let d = points[ext[a]].distance_squared(points[ext[b]]);
            if d > best {
                best = d;
                i0 = ext[a];
                i1 = ext[b];
            }
        }
    }
    let (p0, p1) = (points[i0], points[i1]);
    let dir = (p1 - p0).normalized().ok_or(DegenerateHull)?;
    let i2 = (0..points.len())
        .max_by(|&a, &b| {
            let da = ((points[a] - p0).cross(dir)).norm_squared();
            let db = ((points[b] - p0).cross(dir)).norm_squared();
            da.total_cmp(&db).then(b.cmp(&a))
        })
        .unwrap();
    let p2 = points[i2];
    let n = (p1 - p0)
        .cross(p2 - p0)
        .normalized()
        .ok_or(DegenerateHull)?;
    let i3 = (0..points.len())
        .max_by(|&a, &b| {
            let da = math::abs(n.dot(points[a] - p0));
            let db = math::abs(n.dot(points[b] - p0));
            da.total_cmp(&db).then(b.cmp(&a))
        })
        .unwrap();
    if !(math::abs(n.dot(points[i3] - p0)) > eps) {
        return Err(DegenerateHull);
    }

    let mut b = Builder {
        pts: points,
        faces: Vec::new(),
        eps,
        mark: Vec::new(),
        epoch: 0,
    };
    let simplex = [i0 as u32, i1 as u32, i2 as u32, i3 as u32];
    let centroid = simplex
        .iter()
        .fold(Vec3::ZERO, |s, &i| s + points[i as usize])
        / 4.0;
    let mut tris: Vec<[u32; 3]> = Vec::new();
    for skip in 0..4 {
        let mut v = [0u32; 3];
        let mut k = 0;
        for (j, &s) in simplex.iter().enumerate() {
            if j != skip {
                v[k] = s;
                k += 1;
            }
        }
        let [a, bb, c] = v.map(|i| points[i as usize]);
        if (bb - a).cross(c - a).dot(centroid - a) > 0.0 {
            v.swap(1, 2);
        }
        tris.push(v);
    }
    for t in &tris {
        b.push_face(*t, [0; 3]);
    }
    for f in 0..4 {
        for e in 0..3 {
            let (x, y) = (tris[f][e], tris[f][(e + 1) % 3]);
            let g = (0..4)
                .find(|&g| (0..3).any(|k| tris[g][k] == y && tris[g][(k + 1) % 3] == x))
                .expect("tetrahedron edges pair up");
            b.faces[f].nb[e] = g as u32;
        }
    }
    let rest = (0..points.len() as u32).filter(|i| !simplex.contains(i));
    let mut stack = b.assign(&[0, 1, 2, 3], rest);
    while let Some(f) = stack.pop() {
        let f = f as usize;
        if !b.faces[f].alive || b.faces[f].outside.is_empty() {
            continue;
        }
        stack.extend(b.expand(f));
    }

    let faces: Vec<[u32; 3]> = b.faces.iter().filter(|f| f.alive).map(|f| f.v).collect();
    let mut vertices: Vec<u32> = faces.iter().flatten().copied().collect();
    vertices.sort_unstable();
    vertices.dedup();
    Ok(ConvexHull { vertices, faces })
}
