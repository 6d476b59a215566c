use alloc::vec::Vec;

use super::{Ast, Combine, Shape2d};
use crate::math::{self, Vec3};

fn sd_rect(u: f64, v: f64, cx: f64, cy: f64, hw: f64, hh: f64) -> f64 {
    let dx = math::abs(u - cx) - hw;
    let dy = math::abs(v - cy) - hh;
    let ox = dx.max(0.0);
    let oy = dy.max(0.0);
    math::sqrt(ox * ox + oy * oy) + dx.max(dy).min(0.0)
}

fn sd_circle(u: f64, v: f64, cx: f64, cy: f64, r: f64) -> f64 {
    let (du, dv) = (u - cx, v - cy);
    math::sqrt(du * du + dv * dv) - r
}

/// Exact signed distance to a closed polygon (even-odd inside rule).
fn sd_polygon(u: f64, v: f64, pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    let (px, py) = (u - pts[0][0], v - pts[0][1]);
    let mut d = px * px + py * py;
    let mut s = 1.0;
    let mut j = n - 1;
    for i in 0..n {
        let (vi, vj) = (pts[i], pts[j]);
        let (ex, ey) = (vj[0] - vi[0], vj[1] - vi[1]);
        let (wx, wy) = (u - vi[0], v - vi[1]);
        let t = math::clamp((wx * ex + wy * ey) / (ex * ex + ey * ey), 0.0, 1.0);
        let (bx, by) = (wx - ex * t, wy - ey * t);
        d = d.min(bx * bx + by * by);
        let c1 = v >= vi[1];
        let c2 = v < vj[1];
        let c3 = ex * wy > ey * wx;
        if (c1 && c2 && c3) || (!c1 && !c2 && !c3) {
            s = -s;
        }
        j = i;
    }
    s * math::sqrt(d)
}

#[derive(Debug, Clone)]
enum Prim {
    Rect { cx: f64, cy: f64, hw: f64, hh: f64 },
    Circle { cx: f64, cy: f64, r: f64 },
    Polygon(Vec<[f64; 2]>),
}

#[derive(Debug, Clone)]
struct Step {
    axes: (usize, usize, usize),
    center: f64,
    half: f64,
    combine: Combine,
    prims: Vec<(bool, Prim)>,
}

/// An AST lowered for fast repeated field evaluation.
#[derive(Debug, Clone)]
pub struct CompiledSdf {
    steps: Vec<Step>,
}

impl CompiledSdf {
    pub fn new(ast: &Ast) -> Self {
        let steps = ast
            .steps
            .iter()
            .map(|s| Step {
                axes: s.plane.axes(),
                center: s.offset + 0.5 * s.height,
                half: 0.5 * s.height,
                combine: s.combine,
                prims: s
                    .sketch
                    .iter()
                    .map(|p| {
                        let prim = match &p.shape {
                            Shape2d::Rect { cx, cy, w, h } => Prim::Rect {
                                cx: *cx,
                                cy: *cy,
                                hw: 0.5 * w,
                                hh: 0.5 * h,
                            },
                            Shape2d::Circle { cx, cy, r } => Prim::Circle {
                                cx: *cx,
                                cy: *cy,
                                r: *r,
                            },
                            Shape2d::Polygon(pts) => Prim::Polygon(pts.clone()),
                        };
                        (p.subtract, prim)
                    })
                    .collect(),
            })
            .collect();
        Self { steps }
    }

    /// Negative inside, positive outside. Sketch primitives combine by
    /// `min` (add) and `max(a, -b)` (sub); the 2-D field is extruded with
    /// `max(d2, |w - center| - h/2)`; steps combine by union `min`, cut
    /// `max(a, -b)` and intersect `max`.
    pub fn eval(&self, p: Vec3) -> f64 {
        let mut acc = f64::INFINITY;
        for step in &self.steps {
            let (ua, va, wa) = step.axes;
            let (u, v, w) = (p[ua], p[va], p[wa]);
            let mut d2 = f64::INFINITY;
            for (subtract, prim) in &step.prims {
                let s = match prim {
                    Prim::Rect { cx, cy, hw, hh } => sd_rect(u, v, *cx, *cy, *hw, *hh),
                    Prim::Circle { cx, cy, r } => sd_circle(u, v, *cx, *cy, *r),
                    Prim::Polygon(pts) => sd_polygon(u, v, pts),
                };
                d2 = if *subtract { d2.max(-s) } else { d2.min(s) };
            }
            let d = d2.max(math::abs(w - step.center) - step.half);
            acc = match step.combine {
                Combine::New => d,
                Combine::Union => acc.min(d),
                Combine::Cut => acc.max(-d),
                Combine::Intersect => acc.max(d),
            };
        }
        acc
    }
}

/// Approximate signed distance of the program's solid at `p`.
pub fn evaluate_sdf(ast: &Ast, p: Vec3) -> f64 {
    CompiledSdf::new(ast).eval(p)
}
