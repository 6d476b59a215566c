//! Watertight 2-D point-in-triangle coverage shared by the depth rasterizer
//! and the parity voxelizer.
//!
//! Edge functions are evaluated with endpoints in canonical (lexicographic)
//! order, so the two triangles sharing an edge see bit-identical values of
//! opposite sign. A sample exactly on an edge belongs to the triangle for
//! which that edge is a top or left edge. Every point of a planar partition
//! is covered exactly once.

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tri2 {
    p: [[f64; 2]; 3],
    // p[k] is original vertex perm[k].
    perm: [usize; 3],
    area2: f64,
}

#[inline]
fn edge_fn(u: [f64; 2], v: [f64; 2], q: [f64; 2]) -> f64 {
    let forward = (u[0], u[1]) <= (v[0], v[1]);
    let (lo, hi) = if forward { (u, v) } else { (v, u) };
    let e = (hi[0] - lo[0]) * (q[1] - lo[1]) - (hi[1] - lo[1]) * (q[0] - lo[0]);
    if forward {
        e
    } else {
        -e
    }
}

#[inline]
fn top_left(u: [f64; 2], v: [f64; 2]) -> bool {
    v[1] < u[1] || (v[1] == u[1] && v[0] < u[0])
}

impl Tri2 {
    /// `None` for zero-area triangles.
    pub(crate) fn new(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Option<Self> {
        let area2 = edge_fn(a, b, c);
        if area2 > 0.0 {
            Some(Self {
                p: [a, b, c],
                perm: [0, 1, 2],
                area2,
            })
        } else if area2 < 0.0 {
            Some(Self {
                p: [a, c, b],
                perm: [0, 2, 1],
                area2: -area2,
            })
        } else {
            None
        }
    }

    pub(crate) fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = self.p[0];
        let mut hi = self.p[0];
        for q in &self.p[1..] {
            lo = [lo[0].min(q[0]), lo[1].min(q[1])];
            hi = [hi[0].max(q[0]), hi[1].max(q[1])];
        }
        (lo, hi)
    }

    /// Barycentric weights (in the caller's vertex order) when `q` is covered.
    #[inline]
    pub(crate) fn cover(&self, q: [f64; 2]) -> Option<[f64; 3]> {
        let [p0, p1, p2] = self.p;
        let e0 = edge_fn(p1, p2, q);
        let e1 = edge_fn(p2, p0, q);
        let e2 = edge_fn(p0, p1, q);
        let inside = |e: f64, u, v| e > 0.0 || (e == 0.0 && top_left(u, v));
        if !(inside(e0, p1, p2) && inside(e1, p2, p0) && inside(e2, p0, p1)) {
            return None;
        }
        let w = [e0 / self.area2, e1 / self.area2, e2 / self.area2];
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[self.perm[k]] = w[k];
        }
        Some(out)
    }
}
