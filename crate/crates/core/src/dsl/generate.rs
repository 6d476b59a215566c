use alloc::vec::Vec;

use rand::Rng as _;

use super::render::has_solid;
use super::{
    polygon_is_collinear, Ast, Combine, DslError, Extrude, Plane, Primitive, Shape2d, COORD_LIMIT,
    RADIUS_LIMIT, SIZE_LIMIT,
};
use crate::math::{self, mix_seed, rng_from_seed, Rng};

const MAX_RETRIES: u64 = 10;
const CHECK_RESOLUTION: usize = 32;
/// Generated solids stay inside this half extent.
const REACH: f64 = 90.0;

fn round1(v: f64) -> f64 {
    let r = math::round(v * 10.0) / 10.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn range(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    round1(rng.random_range(lo..hi))
}

fn pick_plane(rng: &mut Rng) -> Plane {
    Plane::ALL[rng.random_range(0..3)]
}

/// A 2-D shape inside the square of half extent `reach` around the origin.
fn random_shape(rng: &mut Rng, min_size: f64, max_size: f64) -> Shape2d {
    match rng.random_range(0..10) {
        0..=4 => {
            let w = range(rng, min_size, max_size);
            let h = range(rng, min_size, max_size);
            let cx = range(
                rng,
                -(REACH - w / 2.0).min(40.0),
                (REACH - w / 2.0).min(40.0),
            );
            let cy = range(
                rng,
                -(REACH - h / 2.0).min(40.0),
                (REACH - h / 2.0).min(40.0),
            );
            Shape2d::Rect { cx, cy, w, h }
        }
        5..=7 => {
            let r = range(rng, min_size / 2.0, max_size / 2.0);
            let lim = (REACH - r).min(40.0);
            Shape2d::Circle {
                cx: range(rng, -lim, lim),
                cy: range(rng, -lim, lim),
                r,
            }
        }
        _ => {
            let r = range(rng, min_size / 2.0, max_size / 2.0);
            let lim = (REACH - r).min(40.0);
            let (cx, cy) = (range(rng, -lim, lim), range(rng, -lim, lim));
            let n = rng.random_range(3..=6usize);
            let phase = rng.random_range(0.0..core::f64::consts::TAU);
            let pts = (0..n)
                .map(|i| {
                    let jitter = rng.random_range(-0.25..0.25);
                    let a = phase + (i as f64 + jitter) * core::f64::consts::TAU / n as f64;
                    [round1(cx + r * math::cos(a)), round1(cy + r * math::sin(a))]
                })
                .collect();
            Shape2d::Polygon(pts)
        }
    }
}

fn random_slab(rng: &mut Rng, min_h: f64, max_h: f64) -> (f64, f64) {
    let height = range(rng, min_h, max_h);
    let lim = (REACH - height / 2.0).min(30.0);
    let center = rng.random_range(-lim..=lim);
    (round1(center - height / 2.0), height)
}

fn random_step(rng: &mut Rng, first: bool) -> Extrude {
    let plane = pick_plane(rng);
    let combine = if first {
        Combine::New
    } else {
        let u: f64 = rng.random();
        if u < 0.55 {
            Combine::Union
        } else if u < 0.9 {
            Combine::Cut
        } else {
            Combine::Intersect
        }
    };
    let (lo, hi) = if first || combine == Combine::Intersect {
        (30.0, 120.0)
    } else {
        (10.0, 70.0)
    };
    let (offset, height) = random_slab(rng, lo, hi);
    let adds = if first { rng.random_range(1..=2) } else { 1 };
    let mut sketch: Vec<Primitive> = (0..adds)
        .map(|_| Primitive::add(random_shape(rng, lo, hi)))
        .collect();
    if first && rng.random_bool(0.25) {
        sketch.push(Primitive::sub(random_shape(rng, 5.0, 25.0)));
    }
    Extrude {
        plane,
        offset,
        height,
        combine,
        sketch,
    }
}

/// A valid random program of `complexity` extrusions whose solid is
/// non-empty at the coarse check resolution. Draws are retried up to ten
/// times.
pub fn random_program(seed: u64, complexity: usize) -> Result<Ast, DslError> {
    if !(1..=8).contains(&complexity) {
        return Err(DslError::InvalidArgument(alloc::format!(
            "complexity {complexity} outside [1, 8]"
        )));
    }
    for attempt in 0..=MAX_RETRIES {
        let mut rng = rng_from_seed(mix_seed(&[seed, complexity as u64, attempt]));
        let steps = (0..complexity)
            .map(|i| random_step(&mut rng, i == 0))
            .collect();
        let ast = Ast { steps };
        if ast.validate().is_ok() && has_solid(&ast, CHECK_RESOLUTION) {
            return Ok(ast);
        }
    }
    Err(DslError::GenerationExhausted)
}

fn jitter(rng: &mut Rng, v: f64, magnitude: f64) -> f64 {
    let u: f64 = rng.random_range(-1.0..=1.0);
    v * (1.0 + u * magnitude)
}

fn jitter_coord(rng: &mut Rng, v: f64, m: f64) -> f64 {
    math::clamp(jitter(rng, v, m), -COORD_LIMIT, COORD_LIMIT)
}

fn jitter_size(rng: &mut Rng, v: f64, m: f64, limit: f64) -> f64 {
    math::clamp(jitter(rng, v, m), 0.01, limit)
}

/// Scales every number by `1 + u * magnitude` with `u` uniform in `[-1, 1]`
/// and, with probability `magnitude / 2`, drops one primitive or flips one
/// boolean. Values are clamped back into range so the result always
/// validates. `magnitude` is clamped to `[0, 1]`; zero returns the input.
pub fn perturb_program(ast: &Ast, magnitude: f64, seed: u64) -> Ast {
    let m = if magnitude.is_finite() {
        math::clamp(magnitude, 0.0, 1.0)
    } else {
        0.0
    };
    if m == 0.0 {
        return ast.clone();
    }
    let mut rng = rng_from_seed(seed);
    let mut out = ast.clone();
    for step in &mut out.steps {
        step.offset = jitter_coord(&mut rng, step.offset, m);
        step.height = jitter_size(&mut rng, step.height, m, SIZE_LIMIT);
        for prim in &mut step.sketch {
            match &mut prim.shape {
                Shape2d::Rect { cx, cy, w, h } => {
                    *cx = jitter_coord(&mut rng, *cx, m);
                    *cy = jitter_coord(&mut rng, *cy, m);
                    *w = jitter_size(&mut rng, *w, m, SIZE_LIMIT);
                    *h = jitter_size(&mut rng, *h, m, SIZE_LIMIT);
                }
                Shape2d::Circle { cx, cy, r } => {
                    *cx = jitter_coord(&mut rng, *cx, m);
                    *cy = jitter_coord(&mut rng, *cy, m);
                    *r = jitter_size(&mut rng, *r, m, RADIUS_LIMIT);
                }
                Shape2d::Polygon(pts) => {
                    let moved: Vec<[f64; 2]> = pts
                        .iter()
                        .map(|p| {
                            [
                                jitter_coord(&mut rng, p[0], m),
                                jitter_coord(&mut rng, p[1], m),
                            ]
                        })
                        .collect();
                    if !polygon_is_collinear(&moved) {
                        *pts = moved;
                    }
                }
            }
        }
    }
    if rng.random_bool(m / 2.0) {
        let droppable: Vec<usize> = (0..out.steps.len())
            .filter(|&i| out.steps[i].sketch.len() >= 2)
            .collect();
        let flippable = out.steps.len() >= 2;
        let want_drop = rng.random_bool(0.5);
        if (want_drop || !flippable) && !droppable.is_empty() {
            let s = droppable[rng.random_range(0..droppable.len())];
            let k = rng.random_range(0..out.steps[s].sketch.len());
            out.steps[s].sketch.remove(k);
        } else if flippable {
            let s = rng.random_range(1..out.steps.len());
            let others: Vec<Combine> = [Combine::Union, Combine::Cut, Combine::Intersect]
                .into_iter()
                .filter(|&c| c != out.steps[s].combine)
                .collect();
            out.steps[s].combine = others[rng.random_range(0..others.len())];
        }
    }
    out
}
