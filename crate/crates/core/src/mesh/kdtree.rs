use alloc::vec::Vec;

use crate::math::Vec3;

const LEAF: usize = 8;

#[derive(Debug, Clone)]
enum KdNode {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Static 3-d tree over a point set. Queries are exact; ties resolve to the
/// lowest point index.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    // Points permuted into leaf order, with their original indices.
    sorted: Vec<Vec3>,
    ids: Vec<u32>,
    nodes: Vec<KdNode>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = Self {
            points: points.to_vec(),
            sorted: Vec::new(),
            ids: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree.sorted = tree.ids.iter().map(|&i| tree.points[i as usize]).collect();
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        if end - start <= LEAF {
            self.nodes.push(KdNode::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return id;
        }
        self.nodes.push(KdNode::Leaf { start: 0, end: 0 });
        let first = self.points[self.ids[start] as usize];
        let (mut lo, mut hi) = (first, first);
        for &i in &self.ids[start..end] {
            lo = lo.min(self.points[i as usize]);
            hi = hi.max(self.points[i as usize]);
        }
        let ext = hi - lo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.ids[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a as usize][axis]
                .total_cmp(&pts[b as usize][axis])
                .then(a.cmp(&b))
        });
        let value = self.points[self.ids[mid] as usize][axis];
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id as usize] = KdNode::Split {
            axis: axis as u8,
            value,
            left,
            right,
        };
        id
    }

    /// Index and squared distance of the nearest point, `None` when empty.
    pub fn nearest(&self, q: Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        // Node, squared distance to its cell, per-axis offsets to the cell.
        let mut stack: Vec<(u32, f64, [f64; 3])> = Vec::with_capacity(64);
        stack.push((0, 0.0, [0.0; 3]));
        while let Some((ni, bound, off)) = stack.pop() {
            if bound > best.1 {
                continue;
            }
            match self.nodes[ni as usize] {
                KdNode::Leaf { start, end } => {
                    let (s, e) = (start as usize, end as usize);
                    for (p, &id) in self.sorted[s..e].iter().zip(&self.ids[s..e]) {
                        let d2 = p.distance_squared(q);
                        if d2 < best.1 || (d2 == best.1 && (id as usize) < best.0) {
                            best = (id as usize, d2);
                        }
                    }
                }
                KdNode::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let a = axis as usize;
                    let diff = q[a] - value;
                    let (near, far) = if diff < 0.0 {
                        (left, right)
                    } else {
                        (right, left)
                    };
                    let mut far_off = off;
                    far_off[a] = diff;
                    let far_bound = bound - off[a] * off[a] + diff * diff;
                    stack.push((far, far_bound, far_off));
                    stack.push((near, bound, off));
                }
            }
        }
        Some(best)
    }

    /// Calls `f(index, squared_distance)` for every point within `radius` of `q`.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, q: Vec3, radius: f64, mut f: F) {
        if self.points.is_empty() {
            return;
        }
        let r2 = radius * radius;
        let mut stack: Vec<(u32, f64, [f64; 3])> = Vec::with_capacity(64);
        stack.push((0, 0.0, [0.0; 3]));
        while let Some((ni, bound, off)) = stack.pop() {
            if bound > r2 {
                continue;
            }
            match self.nodes[ni as usize] {
                KdNode::Leaf { start, end } => {
                    let (s, e) = (start as usize, end as usize);
                    for (p, &id) in self.sorted[s..e].iter().zip(&self.ids[s..e]) {
                        let d2 = p.distance_squared(q);
                        if d2 <= r2 {
                            f(id as usize, d2);
                        }
                    }
                }
                KdNode::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let a = axis as usize;
                    let diff = q[a] - value;
                    let (near, far) = if diff < 0.0 {
                        (left, right)
                    } else {
                        (right, left)
                    };
                    let mut far_off = off;
                    far_off[a] = diff;
                    stack.push((far, bound - off[a] * off[a] + diff * diff, far_off));
                    stack.push((near, bound, off));
                }
            }
        }
    }
}
